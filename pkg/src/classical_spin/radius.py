"""Drivers: bound tables, single-state classification and Monte-Carlo radius estimates."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bounds import BoundRecord, r_hat_max
from .classicality_lp import (
    CAPPED,
    INFEASIBLE,
    Dictionary,
    HighsColumnLp,
    KmaxResult,
    default_dictionary_size,
    extract_decomposition,
    generate_dictionary,
    refine_columns,
)
from .ensemble import DICTIONARY_STREAM, GENERATOR_VERSION, RandomStream, hs_random_state
from .spin_core import SpinJ, frobenius_distance, maximally_mixed, read_density_matrix, spin_of, validate_density_matrix

CSV_HEADER = ("twice_j", "r_hat_max", "r_tilde_max", "gurvits")


class SampleFailure(RuntimeError):
    def __init__(self, stream_index: int, reason: str):
        super().__init__(f"sample with stream_index={stream_index} failed: {reason}")
        self.stream_index = stream_index


def bound_table(spins) -> list[BoundRecord]:
    spins = list(spins)
    if not spins:
        raise ValueError("bound_table needs at least one spin")
    return [BoundRecord.for_spin(s) for s in spins]


def format_bound_table(rows) -> str:
    lines = [f"{'twice_j':>7}  {'j':>5}  {'p_tilde_max':>22}  {'r_hat_max':>22}  {'gurvits':>22}"]
    for r in rows:
        lines.append(
            f"{r.spin.twice_j:>7}  {str(r.spin.j):>5}  {r.p_tilde_max:>22.16g}  {r.r_hat_max:>22.16g}  {r.gurvits_radius:>22.16g}"
        )
    return "\n".join(lines)


@dataclass(frozen=True)
class SampleRecord:
    stream_index: int
    r: float
    k_max: float
    r_l: float
    status: str
    duality_gap: float
    residual: float
    rounds: int

    @property
    def capped(self) -> bool:
        return self.status == CAPPED


@dataclass(frozen=True)
class RadiusEstimate:
    spin: SpinJ
    n_samples: int
    dict_size: int
    seed: int
    refine_rounds: int
    r_tilde_max: float
    per_sample: list = field(repr=False)
    wall_time: float = 0.0
    include_capped: bool = False
    solver: str = ""

    @property
    def n_capped(self) -> int:
        return sum(s.capped for s in self.per_sample)

    def argmin(self) -> int | None:
        """stream_index of the sample attaining r_tilde_max."""
        pool = [s for s in self.per_sample if self.include_capped or not s.capped]
        return min(pool, key=lambda s: s.r_l).stream_index if pool else None

    def to_json(self) -> dict:
        return {
            "twice_j": self.spin.twice_j,
            "n_samples": self.n_samples,
            "dict_size": self.dict_size,
            "seed": self.seed,
            "refine_rounds": self.refine_rounds,
            "include_capped": self.include_capped,
            "r_tilde_max": self.r_tilde_max,
            "r_hat_max": r_hat_max(self.spin),
            "argmin_stream_index": self.argmin(),
            "n_capped": self.n_capped,
            "solver": self.solver,
            "wall_time": self.wall_time,
            "per_sample": [dict(asdict(s), capped=s.capped) for s in self.per_sample],
        }


# per-process cache so that workers build each dictionary once
_DICTIONARIES: dict = {}


def _dictionary(twice_j: int, size: int, seed: int) -> Dictionary:
    key = (twice_j, size, seed)
    if key not in _DICTIONARIES:
        _DICTIONARIES.clear()
        _DICTIONARIES[key] = generate_dictionary(SpinJ(twice_j), size, RandomStream(seed, DICTIONARY_STREAM))
    return _DICTIONARIES[key]


def _solve_sample(task) -> SampleRecord:
    twice_j, size, seed, rounds, index = task
    spin = SpinJ(twice_j)
    rho = hs_random_state(spin, RandomStream(seed, index))
    r = frobenius_distance(rho, maximally_mixed(spin))
    try:
        res = refine_columns(rho, _dictionary(twice_j, size, seed), rounds)
    except Exception as exc:  # solver errors carry no sample context
        raise SampleFailure(index, repr(exc)) from exc
    if res.status == INFEASIBLE:
        raise SampleFailure(index, "LP infeasible at k=0; dictionary too small")
    return SampleRecord(index, r, res.k_max, res.k_max * r, res.status, res.duality_gap, res.residual, res.rounds)


def _radius(records, include_capped: bool) -> float:
    pool = [s.r_l for s in records if include_capped or not s.capped]
    return min(pool) if pool else math.nan


def estimate_radius(
    spin: SpinJ,
    n_samples: int = 1000,
    dict_size: int | None = None,
    seed: int = 0,
    refine_rounds: int = 0,
    workers: int = 1,
    include_capped: bool = False,
) -> RadiusEstimate:
    """Minimum of r_l = k_max ||rho - rho0|| over Hilbert-Schmidt samples.

    Sample i uses stream ``(seed, i)``; the dictionary uses ``(seed, DICTIONARY_STREAM)``.
    Samples capped at k=1 only bound the radius along their direction from
    below by their own distance, so they are left out of the minimum unless
    ``include_capped`` is set.  With no uncapped sample the radius is nan.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    if dict_size is None:
        dict_size = default_dictionary_size(spin)
    t0 = time.perf_counter()
    tasks = [(spin.twice_j, dict_size, seed, refine_rounds, i) for i in range(n_samples)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map preserves task order, so the reduction is schedule independent
            records = list(pool.map(_solve_sample, tasks, chunksize=max(1, n_samples // (8 * workers))))
    else:
        records = [_solve_sample(t) for t in tasks]
    solver = HighsColumnLp.name
    return RadiusEstimate(
        spin,
        n_samples,
        dict_size,
        seed,
        refine_rounds,
        _radius(records, include_capped),
        records,
        time.perf_counter() - t0,
        include_capped,
        solver,
    )


@dataclass(frozen=True)
class ClassificationReport:
    spin: SpinJ
    k_max: float
    status: str
    distance: float
    r_l: float
    r_hat_max: float
    result: KmaxResult = field(repr=False)

    def decomposition(self):
        return extract_decomposition(self.result)

    def format(self) -> str:
        inside = "inside" if self.distance <= self.r_hat_max else "outside"
        return "\n".join(
            [
                f"twice_j      {self.spin.twice_j}",
                f"k_max        {self.k_max:.12g}",
                f"status       {self.status}",
                f"distance     {self.distance:.12g}",
                f"r_l          {self.r_l:.12g}",
                f"r_hat_max    {self.r_hat_max:.12g} (state is {inside} the guaranteed classical ball)",
                f"duality_gap  {self.result.duality_gap:.3g}",
                f"residual     {self.result.residual:.3g}",
            ]
        )


def classify_rho(rho, dict_size: int | None = None, seed: int = 0, refine_rounds: int = 0) -> ClassificationReport:
    rho = validate_density_matrix(rho)
    spin = spin_of(rho)
    if dict_size is None:
        dict_size = default_dictionary_size(spin)
    dictionary = generate_dictionary(spin, dict_size, RandomStream(seed, DICTIONARY_STREAM))
    res = refine_columns(rho, dictionary, refine_rounds)
    if res.status == INFEASIBLE:
        raise RuntimeError("LP infeasible at k=0; dictionary too small")
    dist = frobenius_distance(rho, maximally_mixed(spin))
    return ClassificationReport(spin, res.k_max, res.status, dist, res.k_max * dist, r_hat_max(spin), res)


def classify_state(path, dict_size: int | None = None, seed: int = 0, refine_rounds: int = 0) -> ClassificationReport:
    return classify_rho(read_density_matrix(path), dict_size, seed, refine_rounds)


def emit_figure_data(estimates, bounds, path) -> Path:
    """CSV of the three radius curves, one row per twice_j in increasing order."""
    estimates = {e.spin.twice_j: e for e in estimates}
    bounds = {b.spin.twice_j: b for b in bounds}
    if set(estimates) != set(bounds):
        raise ValueError(f"j grids differ: {sorted(estimates)} vs {sorted(bounds)}")
    path = Path(path)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for tj in sorted(estimates):
                b = bounds[tj]
                w.writerow([tj, repr(b.r_hat_max), repr(estimates[tj].r_tilde_max), repr(b.gurvits_radius)])
    except OSError as exc:
        raise OSError(f"cannot write figure data to {path}: {exc}") from exc
    return path


def read_figure_data(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [{"twice_j": int(r["twice_j"]), **{k: float(r[k]) for k in CSV_HEADER[1:]}} for r in rows]


def run_record(config: dict, estimates, wall_time: float) -> dict:
    estimates = list(estimates)
    return {
        "config": config,
        "generator_version": GENERATOR_VERSION,
        "solver": HighsColumnLp.name,
        "numpy": np.__version__,
        "summary": [
            {"twice_j": e.spin.twice_j, "r_tilde_max": e.r_tilde_max, "r_hat_max": r_hat_max(e.spin), "n_capped": e.n_capped}
            for e in estimates
        ],
        "estimates": [e.to_json() for e in estimates],
        "wall_time": wall_time,
    }


def write_run_record(record: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(record, indent=1, allow_nan=True) + "\n")
    return path


def record_path(csv_path) -> Path:
    """RunRecord location next to a CSV: ``out.csv`` -> ``out.run.json``."""
    return Path(csv_path).with_suffix(".run.json")
