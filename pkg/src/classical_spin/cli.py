"""Command line entry point: ``classical-spin {bound-table,classify,radius,figure}``."""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from pathlib import Path

from .bounds import BoundRecord
from .classicality_lp import decomposition_to_json
from .radius import (
    bound_table,
    classify_state,
    emit_figure_data,
    estimate_radius,
    format_bound_table,
    record_path,
    run_record,
    write_run_record,
)
from .spin_core import SpinJ

log = logging.getLogger("classical_spin")


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _non_negative(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _add_lp_flags(p, samples: bool = True):
    p.add_argument("--dict-size", type=_positive, default=None, help="dictionary size (default depends on j)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--refine", type=_non_negative, default=0, help="column generation rounds")
    if samples:
        p.add_argument("--samples", type=_positive, default=1000)
        p.add_argument("--workers", type=_positive, default=1)
        p.add_argument(
            "--include-capped",
            action="store_true",
            help="let samples certified classical at k=1 enter the minimum with r_l = ||rho - rho0||",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="classical-spin", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound-table", help="closed-form radii for 2j = 1..N")
    p.add_argument("--twice-j-max", type=_positive, default=21)

    p = sub.add_parser("classify", help="k_max of one state read from JSON")
    p.add_argument("--state", required=True, type=Path)
    _add_lp_flags(p, samples=False)
    p.add_argument("--decomposition", type=Path, default=None, help="write the coherent-state mixture as JSON")

    p = sub.add_parser("radius", help="Monte-Carlo radius estimate for one spin")
    p.add_argument("--twice-j", type=_positive, required=True)
    p.add_argument("--out", type=Path, required=True, help="CSV path; the run record goes next to it")
    _add_lp_flags(p)

    p = sub.add_parser("figure", help="radius curves for a range of spins")
    p.add_argument("--twice-j-min", type=_positive, default=2)
    p.add_argument("--twice-j-max", type=_positive, required=True)
    p.add_argument("--out", type=Path, required=True)
    _add_lp_flags(p)
    return parser


def _config(args) -> dict:
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items())}


def _run_estimates(args, spins):
    t0 = time.perf_counter()
    estimates = []
    for spin in spins:
        est = estimate_radius(
            spin,
            n_samples=args.samples,
            dict_size=args.dict_size,
            seed=args.seed,
            refine_rounds=args.refine,
            workers=args.workers,
            include_capped=args.include_capped,
        )
        log.info("2j=%d  r_tilde_max=%.10g  (%.1f s)", spin.twice_j, est.r_tilde_max, est.wall_time)
        estimates.append(est)
    emit_figure_data(estimates, [BoundRecord.for_spin(s) for s in spins], args.out)
    write_run_record(run_record(_config(args), estimates, time.perf_counter() - t0), record_path(args.out))
    return estimates


def _cmd_bound_table(args) -> int:
    print(format_bound_table(bound_table(SpinJ(n) for n in range(1, args.twice_j_max + 1))))
    return 0


def _cmd_classify(args) -> int:
    report = classify_state(args.state, args.dict_size, args.seed, args.refine)
    print(report.format())
    if args.decomposition is not None:
        args.decomposition.write_text(decomposition_to_json(report.decomposition()) + "\n")
        print(f"decomposition  {args.decomposition}")
    return 0


def _cmd_radius(args) -> int:
    (est,) = _run_estimates(args, [SpinJ(args.twice_j)])
    print(f"twice_j       {est.spin.twice_j}")
    print(f"r_tilde_max   {est.r_tilde_max!r}")
    print(f"capped        {est.n_capped}/{est.n_samples}")
    print(f"argmin        stream_index={est.argmin()}")
    print(f"wall_time     {est.wall_time:.1f} s")
    return 0


def _cmd_figure(args) -> int:
    if args.twice_j_min > args.twice_j_max:
        raise ValueError("--twice-j-min exceeds --twice-j-max")
    estimates = _run_estimates(args, [SpinJ(n) for n in range(args.twice_j_min, args.twice_j_max + 1)])
    for e in estimates:
        value = "nan" if math.isnan(e.r_tilde_max) else f"{e.r_tilde_max:.10g}"
        print(f"2j={e.spin.twice_j:<3d} r_tilde_max={value}")
    print(f"wrote {args.out}")
    return 0


COMMANDS = {
    "bound-table": _cmd_bound_table,
    "classify": _cmd_classify,
    "radius": _cmd_radius,
    "figure": _cmd_figure,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
