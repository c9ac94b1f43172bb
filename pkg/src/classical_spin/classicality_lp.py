"""Classicality test by linear programming over coherent-state dictionaries.

For a state rho we maximize k subject to

    sum_i w_i |alpha_i><alpha_i| + k (rho0 - rho) = rho0,   w >= 0,  0 <= k <= 1,

so that rho_k = (1-k) rho0 + k rho is an explicit mixture of dictionary
coherent states.  The Hermitian equality is written over its real degrees of
freedom: the diagonal, then (Re, Im) of each strict upper-triangle entry.
The bound k <= 1 is the extra row k + s = 1 with slack s >= 0.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.spatial import cKDTree

from .ensemble import _as_generator
from .lp_engines import HighsColumnLp
from .spin_core import Direction, SpinJ, coherent_states, maximally_mixed, spin_of
from .tensor_rep import _search_grid, minimize_on_sphere

log = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
DUALITY_GAP_TOL = 1e-7
CAP_TOL = 1e-9
DEDUP_TOL = 1e-9
PRICING_TOL = 1e-9

OPTIMAL = "optimal"
INFEASIBLE = "infeasible-at-zero"
CAPPED = "capped-at-one"


def default_dictionary_size(spin: SpinJ) -> int:
    if spin.twice_j <= 6:
        return 20_000
    if spin.twice_j <= 13:
        return 100_000
    return 1_000_000


# -- Hermitian <-> real vector ---------------------------------------------------


def _upper(d: int):
    return np.triu_indices(d, k=1)


def hermitian_to_real(mat) -> np.ndarray:
    """Real coordinates (diag, then Re/Im of the strict upper triangle, interleaved)."""
    mat = np.asarray(mat)
    d = mat.shape[-1]
    iu = _upper(d)
    off = mat[..., iu[0], iu[1]]
    pairs = np.stack([off.real, off.imag], axis=-1).reshape(mat.shape[:-2] + (-1,))
    return np.concatenate([np.diagonal(mat, axis1=-2, axis2=-1).real, pairs], axis=-1)


def real_to_hermitian(vec, d: int) -> np.ndarray:
    """Inverse of :func:`hermitian_to_real`."""
    vec = np.asarray(vec, dtype=float)
    iu = _upper(d)
    mat = np.diag(vec[:d]).astype(complex)
    off = vec[d::2] + 1j * vec[d + 1 :: 2]
    mat[iu] = off
    mat[iu[1], iu[0]] = off.conj()
    return mat


def _projector_coordinates(vecs: np.ndarray) -> np.ndarray:
    # hermitian_to_real(|v><v|) for a stack of vectors, one column per vector
    d = vecs.shape[-1]
    iu = _upper(d)
    off = vecs[:, iu[0]] * vecs[:, iu[1]].conj()
    pairs = np.stack([off.real, off.imag], axis=-1).reshape(len(vecs), -1)
    return np.ascontiguousarray(np.concatenate([np.abs(vecs) ** 2, pairs], axis=1).T)


def _real_frobenius(vec: np.ndarray, d: int) -> float:
    # each off-diagonal coordinate appears twice in the full matrix
    return float(np.sqrt(np.sum(vec[:d] ** 2) + 2 * np.sum(vec[d:] ** 2)))


# -- dictionary -------------------------------------------------------------------


def _unit_vectors(theta, phi):
    st = np.sin(theta)
    return np.column_stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)])


def _fresh_mask(points: np.ndarray, existing: np.ndarray | None) -> np.ndarray:
    # drop points within DEDUP_TOL of an existing point or of an earlier new one
    keep = np.ones(len(points), dtype=bool)
    if existing is not None and len(existing) and len(points):
        dist, _ = cKDTree(existing).query(points)
        keep &= dist > DEDUP_TOL
    if len(points) > 1:
        for i, j in sorted(cKDTree(points).query_pairs(DEDUP_TOL)):
            if keep[i]:
                keep[j] = False
    return keep


@dataclass(frozen=True, eq=False)
class Dictionary:
    """Ordered coherent-state atoms; ``columns[:, i]`` holds the real coordinates of atom i.

    Directions closer than ``DEDUP_TOL`` (chordal) to an earlier one are dropped.
    """

    spin: SpinJ
    theta: np.ndarray
    phi: np.ndarray
    columns: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        theta = np.clip(np.atleast_1d(np.asarray(self.theta, dtype=float)).ravel(), 0.0, np.pi)
        phi = np.mod(np.atleast_1d(np.asarray(self.phi, dtype=float)).ravel(), 2 * np.pi)
        if theta.shape != phi.shape:
            raise ValueError("theta and phi must have equal length")
        keep = _fresh_mask(_unit_vectors(theta, phi), None)
        theta, phi = theta[keep], phi[keep]
        self._freeze(theta, phi, _projector_coordinates(coherent_states(self.spin, theta, phi)))

    def _freeze(self, theta, phi, cols):
        for arr in (theta, phi, cols):
            arr.flags.writeable = False
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_directions(cls, spin: SpinJ, directions) -> "Dictionary":
        directions = list(directions)
        return cls(spin, [d.theta for d in directions], [d.phi for d in directions])

    def __len__(self) -> int:
        return len(self.theta)

    def direction(self, i: int) -> Direction:
        return Direction(float(self.theta[i]), float(self.phi[i]))

    def directions(self) -> list[Direction]:
        return [Direction(float(t), float(p)) for t, p in zip(self.theta, self.phi)]

    def projector(self, i: int) -> np.ndarray:
        v = coherent_states(self.spin, self.theta[i], self.phi[i])
        return np.outer(v, v.conj())

    def extended(self, theta, phi) -> "Dictionary":
        """New dictionary with extra atoms appended; existing columns are reused."""
        theta = np.clip(np.atleast_1d(np.asarray(theta, dtype=float)), 0.0, np.pi)
        phi = np.mod(np.atleast_1d(np.asarray(phi, dtype=float)), 2 * np.pi)
        keep = _fresh_mask(_unit_vectors(theta, phi), _unit_vectors(self.theta, self.phi))
        theta, phi = theta[keep], phi[keep]
        out = object.__new__(Dictionary)
        object.__setattr__(out, "spin", self.spin)
        out._freeze(
            np.concatenate([self.theta, theta]),
            np.concatenate([self.phi, phi]),
            np.hstack([self.columns, _projector_coordinates(coherent_states(self.spin, theta, phi))]),
        )
        return out


def generate_dictionary(spin: SpinJ, size: int, stream) -> Dictionary:
    """``size`` area-uniform random directions (cos theta and phi uniform).

    Draws come in (cos theta, phi) pairs, so a larger ``size`` on the same
    stream extends the smaller dictionary.
    """
    if size < spin.dim**2:
        raise ValueError(f"dictionary size {size} is below (2j+1)^2 = {spin.dim ** 2}")
    u = _as_generator(stream).random((size, 2))
    return Dictionary(spin, np.arccos(1.0 - 2.0 * u[:, 0]), 2 * np.pi * u[:, 1])


# -- LP ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LpStandardForm:
    """max c.x  s.t.  A x = b,  x >= 0;  x = (w_1..w_M, k, slack)."""

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray

    @property
    def n_atoms(self) -> int:
        return self.A.shape[1] - 2


def _lp_data(rho, dictionary: Dictionary):
    rho = np.asarray(rho, dtype=complex)
    spin = spin_of(rho)
    if spin != dictionary.spin:
        raise ValueError(f"state has 2j={spin.twice_j} but dictionary has 2j={dictionary.spin.twice_j}")
    rho0 = maximally_mixed(spin)
    return hermitian_to_real(rho0 - rho), hermitian_to_real(rho0)


def _k_and_slack_columns(k_column: np.ndarray) -> np.ndarray:
    out = np.zeros((len(k_column) + 1, 2))
    out[:-1, 0] = k_column
    out[-1, :] = 1.0
    return out


def build_lp(rho, dictionary: Dictionary) -> LpStandardForm:
    """Standard form with one column per atom, then k, then the slack of k <= 1."""
    k_column, rhs = _lp_data(rho, dictionary)
    n_rows, M = dictionary.columns.shape
    A = np.zeros((n_rows + 1, M + 2))
    A[:n_rows, :M] = dictionary.columns
    A[:, M:] = _k_and_slack_columns(k_column)
    c = np.zeros(M + 2)
    c[M] = 1.0
    return LpStandardForm(A, np.append(rhs, 1.0), c)


EngineFactory = Callable[[np.ndarray], object]


@dataclass(frozen=True, eq=False)
class KmaxResult:
    k_max: float
    weights: np.ndarray
    duality_gap: float
    status: str
    residual: float
    dictionary: Dictionary
    primal_objective: float = float("nan")
    dual_objective: float = float("nan")
    dual_infeasibility: float = float("nan")
    dual: np.ndarray | None = field(default=None, repr=False)
    rounds: int = 0
    engine: str = ""

    @property
    def certified(self) -> bool:
        return self.status in (OPTIMAL, CAPPED)

    def dual_matrix(self) -> np.ndarray:
        """Hermitian Lambda with <a|Lambda|a> equal to the reduced profit of atom a."""
        d = self.dictionary.spin.dim
        z = -np.array(self.dual[: d * d])
        z[d:] /= 2
        return real_to_hermitian(z, d)


class _KmaxProblem:
    """Restricted master LP over a growing working set of atoms."""

    def __init__(self, rho, dictionary: Dictionary, engine: EngineFactory):
        self.k_column, self.rhs = _lp_data(rho, dictionary)
        self.d = dictionary.spin.dim
        self.dictionary = dictionary
        self.lp = engine(np.append(self.rhs, 1.0))
        self.lp.add_columns(_k_and_slack_columns(self.k_column), [1.0, 0.0])
        self.order: list[int] = []  # dictionary index of each atom column in the engine
        self.in_lp = np.zeros(len(dictionary), dtype=bool)

    def add(self, idx) -> None:
        idx = np.asarray(idx, dtype=int)
        idx = idx[~self.in_lp[idx]]
        if len(idx) == 0:
            return
        cols = np.vstack([self.dictionary.columns[:, idx], np.zeros((1, len(idx)))])
        self.lp.add_columns(cols, np.zeros(len(idx)))
        self.in_lp[idx] = True
        self.order.extend(idx.tolist())

    def extend_dictionary(self, theta, phi) -> int:
        old = len(self.dictionary)
        self.dictionary = self.dictionary.extended(theta, phi)
        new = len(self.dictionary) - old
        self.in_lp = np.concatenate([self.in_lp, np.zeros(new, dtype=bool)])
        self.add(np.arange(old, len(self.dictionary)))
        return new

    def sift(self, batch: int):
        """Solve, pricing every dictionary atom against the duals until none improves."""
        atoms = self.dictionary.columns
        dd = self.d * self.d
        while True:
            sol = self.lp.solve()
            if not sol.feasible:
                missing = np.flatnonzero(~self.in_lp)
                if len(missing) == 0:
                    return sol
                # the restricted LP may be infeasible only because atoms are missing
                self.add(missing[: max(len(self.order), batch)])
                continue
            profit = -(sol.y[:dd] @ atoms)
            profit[self.in_lp] = -np.inf
            if profit.max(initial=-np.inf) <= PRICING_TOL:
                return sol
            cand = np.flatnonzero(profit > PRICING_TOL)
            self.add(cand[np.argsort(-profit[cand])[:batch]])

    def result(self, sol, rounds: int = 0) -> KmaxResult:
        M = len(self.dictionary)
        name = getattr(self.lp, "name", type(self.lp).__name__)
        if not sol.feasible:
            return KmaxResult(
                0.0, np.zeros(M), float("nan"), INFEASIBLE, float("nan"), self.dictionary, rounds=rounds, engine=name
            )
        d, dd = self.d, self.d * self.d
        k = float(np.clip(sol.x[0], 0.0, 1.0))
        weights = np.zeros(M)
        weights[self.order] = np.clip(sol.x[2:], 0.0, None)
        y = np.asarray(sol.y, dtype=float)
        dual = float(np.append(self.rhs, 1.0) @ y)
        # dual feasibility over the whole dictionary plus the k and slack columns
        reduced = np.concatenate(
            [-(y[:dd] @ self.dictionary.columns), [1.0 - (y[:dd] @ self.k_column + y[-1]), -y[-1]]]
        )
        resid_vec = self.dictionary.columns @ weights + self.k_column * k - self.rhs
        return KmaxResult(
            k_max=k,
            weights=weights,
            duality_gap=abs(k - dual),
            status=CAPPED if k >= 1.0 - CAP_TOL else OPTIMAL,
            residual=_real_frobenius(resid_vec, d),
            dictionary=self.dictionary,
            primal_objective=k,
            dual_objective=dual,
            dual_infeasibility=float(max(0.0, reduced.max())),
            dual=y,
            rounds=rounds,
            engine=name,
        )


def _initial_set(M: int, d: int, working_set: int | None):
    if working_set is None:
        working_set = max(20 * d * d, 200)
    if working_set <= 0 or working_set >= M:
        return np.arange(M)
    # evenly spaced indices; dictionary order carries no structure
    return np.unique(np.linspace(0, M - 1, working_set).astype(int))


def _start(rho, dictionary, engine, working_set):
    problem = _KmaxProblem(rho, dictionary, engine)
    d = dictionary.spin.dim
    problem.add(_initial_set(len(dictionary), d, working_set))
    return problem, max(d * d, 50)


def solve_kmax(
    rho,
    dictionary: Dictionary,
    engine: EngineFactory = HighsColumnLp,
    working_set: int | None = None,
) -> KmaxResult:
    """Largest k in [0, 1] with rho_k a mixture of dictionary atoms.

    The LP over the whole dictionary is solved by sifting: a restricted LP on a
    working set of atoms is solved, every dictionary atom is priced against its
    duals, and improving atoms join the working set until none is left.  The
    returned optimum, duals and certificate refer to the full dictionary.
    ``working_set=0`` passes every atom to the engine at once.
    """
    problem, batch = _start(rho, dictionary, engine, working_set)
    return problem.result(problem.sift(batch))


def extract_decomposition(result: KmaxResult, dictionary: Dictionary | None = None, threshold: float = 1e-10):
    """Atoms with weight above ``threshold`` as ``[(weight, Direction), ...]``, heaviest first."""
    if not result.certified:
        raise ValueError(f"no decomposition for status {result.status!r}")
    dictionary = dictionary if dictionary is not None else result.dictionary
    idx = np.flatnonzero(result.weights > threshold)
    idx = idx[np.argsort(-result.weights[idx], kind="stable")]
    return [(float(result.weights[i]), dictionary.direction(i)) for i in idx]


def decomposition_to_json(decomposition) -> str:
    return json.dumps([{"weight": w, "theta": d.theta, "phi": d.phi} for w, d in decomposition], indent=1)


def decomposition_matrix(spin: SpinJ, decomposition) -> np.ndarray:
    out = np.zeros((spin.dim, spin.dim), dtype=complex)
    for w, d in decomposition:
        v = coherent_states(spin, d.theta, d.phi)
        out += w * np.outer(v, v.conj())
    return out


# -- column generation ----------------------------------------------------------


def price_columns(dual_matrix: np.ndarray, spin: SpinJ, n_candidates: int | None = None, tol: float = PRICING_TOL):
    """Coherent states with <alpha|Lambda|alpha> > tol as ``(theta, phi, values)``, best first.

    The best one comes from a grid search plus local ascent; the rest are the
    best grid nodes.
    """
    if n_candidates is None:
        n_candidates = spin.dim

    def neg_value(theta, phi):
        v = coherent_states(spin, theta, phi)
        return -np.einsum("...a,ab,...b->...", v.conj(), dual_matrix, v).real

    best_dir, best_val = minimize_on_sphere(neg_value, spin.twice_j)
    found = [(best_dir.theta, best_dir.phi, -best_val)]
    t, p = _search_grid(40 * spin.twice_j**2)
    vals = -neg_value(t, p)
    for i in np.argsort(-vals)[: n_candidates - 1]:
        found.append((t[i], p[i], vals[i]))
    found = np.array([f for f in found if f[2] > tol]).reshape(-1, 3)
    return found[:, 0], found[:, 1], found[:, 2]


def refine_columns(
    rho,
    dictionary: Dictionary,
    rounds: int,
    engine: EngineFactory = HighsColumnLp,
    working_set: int | None = None,
) -> KmaxResult:
    """Column generation over the continuum of coherent states.

    Each round prices coherent states against the dual matrix of the current
    LP, appends the improving ones to the dictionary and re-solves (sifting the
    whole dictionary again).  Stops early once no atom has reduced profit above
    ``PRICING_TOL``.  The returned result refers to the extended dictionary.
    """
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    problem, batch = _start(rho, dictionary, engine, working_set)
    result = problem.result(problem.sift(batch))
    for r in range(rounds):
        if result.status != OPTIMAL:
            break
        theta, phi, vals = price_columns(result.dual_matrix(), dictionary.spin)
        if len(vals) == 0:
            break
        if problem.extend_dictionary(theta, phi) == 0:
            break
        log.debug("round %d: best reduced profit %.3e", r + 1, vals.max())
        result = problem.result(problem.sift(batch), rounds=r + 1)
    return result


def write_mps(lp: LpStandardForm, path) -> None:
    """Dump the LP in free MPS format (objective sense MAX)."""
    lines = ["NAME KMAX", "OBJSENSE", "    MAX", "ROWS", " N  OBJ"]
    n_rows, n_cols = lp.A.shape
    lines += [f" E  R{i}" for i in range(n_rows)]
    lines.append("COLUMNS")
    for j in range(n_cols):
        name = f"W{j}" if j < n_cols - 2 else ("K" if j == n_cols - 2 else "S")
        if lp.c[j]:
            lines.append(f"    {name} OBJ {float(lp.c[j])!r}")
        for i in np.flatnonzero(lp.A[:, j]):
            lines.append(f"    {name} R{i} {float(lp.A[i, j])!r}")
    lines.append("RHS")
    for i in np.flatnonzero(lp.b):
        lines.append(f"    RHS R{i} {float(lp.b[i])!r}")
    lines.append("ENDATA")
    Path(path).write_text("\n".join(lines) + "\n")
