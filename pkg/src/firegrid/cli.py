"""Command-line front end: ``firegrid solve|sweep|synth-scores|validate``.

Parameter precedence is case file < ``--config`` JSON < explicit flags.
Exit codes: 0 success, 1 input error, 2 iteration limit / stall / oracle mismatch.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .grid import CaseError, RiskIntake, load_case, validate_case, write_scores_csv

PARAM_FLAGS = {
    "risk_tolerance": float,
    "risk_intake": str,
    "budget": int,
    "shed_penalty": float,
    "big_M": float,
    "convergence_gap": float,
    "max_iterations": int,
    "solver": str,
    "mip_gap": float,
}


class InputError(Exception):
    pass


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file of robust_params overrides")
    p.add_argument("--risk-tolerance", dest="risk_tolerance", type=float)
    p.add_argument("--risk-intake", dest="risk_intake", choices=[m.value for m in RiskIntake])
    p.add_argument("--budget", type=int)
    p.add_argument("--shed-penalty", dest="shed_penalty", type=float)
    p.add_argument("--big-m", dest="big_M", type=float)
    p.add_argument("--gap", dest="convergence_gap", type=float)
    p.add_argument("--max-iterations", dest="max_iterations", type=int)
    p.add_argument("--solver", choices=["auto", "native", "highs"])
    p.add_argument("--mip-gap", dest="mip_gap", type=float)
    p.add_argument("--deviation", type=float, help="uncertainty deviation as a fraction of nominal")


def _prepare_case(args):
    from .experiments import with_deviation
    from .grid import RobustParams

    path = Path(args.case)
    if not path.is_file():
        raise InputError(f"case file not found: {path}")
    case = load_case(path)
    overrides: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg, dict):
            raise InputError("config must be a JSON object")
        overrides.update(cfg)
    for key in PARAM_FLAGS:
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if overrides:
        merged = {**case.params.to_dict(), **overrides}
        case = case.with_params(**RobustParams.from_dict(merged).__dict__)
    if getattr(args, "deviation", None) is not None:
        case = with_deviation(case, args.deviation)
    return validate_case(case)


def cmd_solve(args) -> int:
    from .ccg import CcgStatus, run_ccg
    from .risk import quantify_line_risk

    case = _prepare_case(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    plan, trace = run_ccg(case)
    report = quantify_line_risk(plan)
    doc = {"case": case.name, "status": trace.status.value, "iterations": trace.iterations,
           "upper_bound": round(trace.upper_bound, 9), "lower_bound": round(trace.lower_bound, 9),
           "gap": round(trace.gap, 12), "params": case.params.to_dict(), "plan": plan.to_dict(case)}
    with open(out / "plan.json", "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    trace.write(out / "trace.jsonl")
    report.write_csv(out)
    report.write_json(out / "risk_summary.json")
    print(f"{trace.status.value}: objective {plan.objective:.6f} after {trace.iterations} iterations "
          f"(gap {trace.gap:.3g}); artifacts in {out}")
    return 0 if trace.status is CcgStatus.CONVERGED else 2


def _parse_values(text: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise InputError(f"cannot parse grid values {text!r}") from None
    if not vals:
        raise InputError("sweep grid is empty")
    return vals


def cmd_sweep(args) -> int:
    from .experiments import SweepSpec, monotonicity_summary, run_sweep, write_sweep_csv

    case = _prepare_case(args)
    try:
        spec = SweepSpec(args.axis, _parse_values(args.values), output=args.out)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    rows = run_sweep(case, spec)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(rows, out)
    summary = monotonicity_summary(rows, spec.axis, case.params.convergence_gap)
    with open(out.with_suffix(".summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"{len(rows)} points written to {out}; {summary['direction']} holds: {summary['holds']}")
    failed = any(r["status"] != "converged" for r in rows)
    return 2 if failed else 0


def cmd_synth_scores(args) -> int:
    from .experiments import generate_synthetic_scores

    path = Path(args.case)
    if not path.is_file():
        raise InputError(f"case file not found: {path}")
    case = load_case(path)
    if not 0.0 <= args.base_level < 1.0:
        raise InputError("--base-level must lie in [0, 1)")
    peaks = _parse_values(args.peak_hours)
    prof = generate_synthetic_scores(case, args.seed, peaks, args.base_level)
    write_scores_csv(prof, args.out)
    print(f"scores for {len(prof.line_ids)} lines x {case.horizon} hours written to {args.out}")
    return 0


def cmd_validate(args) -> int:
    """Cross-check the subproblem and the full loop against enumeration on random toys."""
    import numpy as np

    from .ccg import brute_force_worst_case, enumerate_robust_optimum, run_ccg
    from .experiments import random_toy_case
    from .subproblem import build_dual_subproblem, solve_subproblem

    failures = 0
    for k in range(args.cases):
        case = random_toy_case(args.seed + k)
        rng = np.random.default_rng(args.seed + k)
        status = rng.integers(0, 2, (len(case.lines), case.horizon))
        _, oracle = brute_force_worst_case(case, status)
        _, cost, _ = solve_subproblem(build_dual_subproblem(case, status))
        ok = abs(cost - oracle) <= 1e-6 * max(1.0, abs(oracle))
        line = f"toy {args.seed + k}: subproblem {cost:.6f} oracle {oracle:.6f}"
        if len(case.lines) * case.horizon <= args.max_line_hours:
            plan, _ = run_ccg(case)
            _, best = enumerate_robust_optimum(case, args.max_line_hours)
            ok_e2e = abs(plan.objective - best) <= 1e-6 * max(1.0, abs(best))
            ok = ok and ok_e2e
            line += f"; loop {plan.objective:.6f} enumerated {best:.6f}"
        print(("ok   " if ok else "FAIL ") + line)
        failures += not ok
    print(f"{args.cases - failures}/{args.cases} toys agree with the oracles")
    return 0 if failures == 0 else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="firegrid", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="robust solve of one case")
    p.add_argument("case")
    p.add_argument("--out", default="firegrid_out")
    _add_param_flags(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="solve along one parameter axis")
    p.add_argument("case")
    p.add_argument("--axis", required=True, choices=["risk_tolerance", "budget", "deviation", "solar_mw"])
    p.add_argument("--values", required=True, help="comma-separated grid (deviation in percent)")
    p.add_argument("--out", default="sweep.csv")
    _add_param_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("synth-scores", help="write seeded synthetic fire scores as CSV")
    p.add_argument("case")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--peak-hours", default="15")
    p.add_argument("--base-level", type=float, default=0.3)
    p.add_argument("--out", default="scores.csv")
    p.set_defaults(func=cmd_synth_scores)

    p = sub.add_parser("validate", help="oracle cross-check on random small cases")
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-line-hours", type=int, default=7)
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, CaseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
