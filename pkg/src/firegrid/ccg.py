"""Column-and-constraint generation loop and exhaustive validation oracles."""

from __future__ import annotations

import enum
import itertools
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .dispatch import deviation_profiles, pick_backend, solve_recourse
from .grid import NetworkCase, RiskIntake
from .master import (DuplicateScenarioError, FirstStageSolution, append_scenario, build_master,
                     first_stage_from_status, most_energized_plan, solve_master)
from .realization import UncertaintyRealization
from .subproblem import build_dual_subproblem, solve_subproblem

ORACLE_MAX_BINARIES = 22
TIE_TOL = 1e-9   # relative slack when comparing equal-cost plans


class CcgStatus(str, enum.Enum):
    CONVERGED = "converged"
    ITERATION_LIMIT = "iteration_limit"
    STALLED = "stalled"


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    lower_bound: float
    upper_bound: float
    gap: float
    master_objective: float
    worst_cost: float
    realization: dict
    line_status: dict
    master_time: float
    subproblem_time: float

    def to_dict(self, timing: bool = False) -> dict:
        d = {
            "iteration": self.iteration,
            "lower_bound": round(self.lower_bound, 9),
            "upper_bound": round(self.upper_bound, 9),
            "gap": round(self.gap, 12),
            "master_objective": round(self.master_objective, 9),
            "worst_cost": round(self.worst_cost, 9),
            "realization": self.realization,
            "line_status": self.line_status,
        }
        if timing:
            d["master_time"] = self.master_time
            d["subproblem_time"] = self.subproblem_time
        return d


@dataclass
class CcgTrace:
    records: list[IterationRecord] = field(default_factory=list)
    status: CcgStatus | None = None

    @property
    def lower_bound(self) -> float:
        return self.records[-1].lower_bound if self.records else -math.inf

    @property
    def upper_bound(self) -> float:
        return self.records[-1].upper_bound if self.records else math.inf

    @property
    def gap(self) -> float:
        return self.records[-1].gap if self.records else math.inf

    @property
    def iterations(self) -> int:
        return len(self.records)

    def to_jsonl(self, timing: bool = False) -> str:
        lines = [json.dumps(r.to_dict(timing), sort_keys=True) for r in self.records]
        lines.append(json.dumps({"status": self.status.value if self.status else None,
                                 "iterations": self.iterations,
                                 "lower_bound": round(self.lower_bound, 9),
                                 "upper_bound": round(self.upper_bound, 9),
                                 "gap": round(self.gap, 12)}, sort_keys=True))
        return "\n".join(lines) + "\n"

    def write(self, path, timing: bool = False) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl(timing))


def relative_gap(lb: float, ub: float) -> float:
    if not (math.isfinite(lb) and math.isfinite(ub)):
        return math.inf
    return (ub - lb) / max(abs(ub), 1e-9)


def run_ccg(case: NetworkCase, backend: str | None = None,
            prefer_energized: bool = True) -> tuple[FirstStageSolution, CcgTrace]:
    """Alternate master and worst-case subproblem until the bounds meet.

    LB is the running maximum of proven master bounds and UB the running
    minimum of proven subproblem bounds.  The returned plan is the one whose
    worst case attained the final UB, with ``objective`` set to that UB.
    With ``prefer_energized`` a converged run then looks for an equally
    cheap plan with more energized line-hours and keeps it if its worst
    case still meets UB.
    """
    p = case.params
    scenarios = [UncertaintyRealization.nominal(case)]
    master = build_master(case, scenarios)
    trace = CcgTrace()
    lb, ub = -math.inf, math.inf
    best: FirstStageSolution | None = None
    for it in range(p.max_iterations):
        mb = backend or pick_backend(case, len(master.scenarios) + 1, master.status_cols.size)
        t0 = time.perf_counter()
        fs = solve_master(master, backend=mb)
        t1 = time.perf_counter()
        lb = max(lb, fs.lower_bound)
        sb = backend
        sub = build_dual_subproblem(case, fs)
        real, cost, dual = solve_subproblem(sub, backend=sb)
        t2 = time.perf_counter()
        # the proven subproblem bound is a valid worst-case value for this plan
        plan_ub = max(dual.bound, cost)
        if plan_ub < ub:
            ub = plan_ub
            best = fs
        gap = relative_gap(lb, ub)
        trace.records.append(IterationRecord(
            it, lb, ub, gap, fs.objective, cost, real.to_dict(case),
            {str(l): [int(v) for v in fs.line_status[k]] for k, l in enumerate(fs.line_ids)},
            t1 - t0, t2 - t1))
        if gap <= p.convergence_gap:
            trace.status = CcgStatus.CONVERGED
            break
        try:
            master = append_scenario(master, real)
        except DuplicateScenarioError:
            trace.status = CcgStatus.STALLED
            break
    else:
        trace.status = CcgStatus.ITERATION_LIMIT
    if prefer_energized and trace.status is CcgStatus.CONVERGED:
        best = _tie_break(case, master, best, ub, backend)
    plan = _with_objective(best, ub, lb)
    return plan, trace


def _tie_break(case: NetworkCase, master, best: FirstStageSolution, ub: float,
               backend: str | None) -> FirstStageSolution:
    tol = TIE_TOL * max(1.0, abs(ub))
    status = most_energized_plan(master, ub + tol, backend)
    if status is None or status.sum() <= best.line_status.sum():
        return best
    sb = backend
    real, cost, dual = solve_subproblem(build_dual_subproblem(case, status), backend=sb)
    if max(dual.bound, cost) > ub + tol:
        return best
    mb = backend or pick_backend(case, len(master.scenarios) + 1, master.status_cols.size)
    return first_stage_from_status(case, status, surrogate=best.surrogate, objective=ub,
                                   lower_bound=best.lower_bound, backend=mb)


def _with_objective(fs: FirstStageSolution, ub: float, lb: float) -> FirstStageSolution:
    from dataclasses import replace
    return replace(fs, objective=ub, lower_bound=lb)


# ---------------------------------------------------------------------------
# oracles


def _binaries(case: NetworkCase) -> list[tuple[str, int, int]]:
    dd, ds = deviation_profiles(case)
    out = []
    for t in range(case.horizon):
        out += [("demand", i, t) for i in range(dd.shape[0]) if dd[i, t] > 0]
        out += [("solar", i, t) for i in range(ds.shape[0]) if ds[i, t] > 0]
    return out


def brute_force_worst_case(case: NetworkCase, first_stage, budget: int | None = None,
                           backend: str = "native") -> tuple[UncertaintyRealization, float]:
    """Exhaustive worst case over every budget-feasible indicator assignment.

    Recourse separates by hour once line statuses are fixed, so each hour's
    cost is tabulated for every local pattern and the budget is spread over
    hours by an exact table; ties go to the lexicographically smallest
    assignment in (hour, kind, entity) order.
    """
    status = first_stage.line_status if isinstance(first_stage, FirstStageSolution) else np.asarray(first_stage)
    bins = _binaries(case)
    if len(bins) > ORACLE_MAX_BINARIES:
        raise OracleError(f"{len(bins)} uncertainty binaries exceed the enumeration bound "
                          f"{ORACLE_MAX_BINARIES}")
    E = case.params.budget if budget is None else int(budget)
    T = case.horizon
    nominal = UncertaintyRealization.nominal(case)
    dd, ds = deviation_profiles(case)
    per_hour = [[b for b in bins if b[2] == t] for t in range(T)]
    # table[t] = list of (pattern, count, cost) in ascending lexicographic order
    table = []
    for t in range(T):
        rows = []
        for pat in itertools.product((0, 1), repeat=len(per_hour[t])):
            k = sum(pat)
            if k > E:
                continue
            dem = nominal.demand.copy()
            sol = nominal.solar.copy()
            for bit, (kind, i, _) in zip(pat, per_hour[t]):
                if bit:
                    if kind == "demand":
                        dem[i, t] += dd[i, t]
                    else:
                        sol[i, t] -= ds[i, t]
            lp_sol, _, _ = solve_recourse(case, status, dem, sol, hours=[t], backend=backend)
            if not lp_sol.optimal:
                raise OracleError(f"recourse LP failed at hour {t}: {lp_sol.status.value}")
            rows.append((pat, k, float(lp_sol.objective)))
        table.append(rows)
    # best[t][e]: max cost of hours t.. with at most e binaries
    best = [[0.0] * (E + 1) for _ in range(T + 1)]
    for t in range(T - 1, -1, -1):
        for e in range(E + 1):
            best[t][e] = max(c + best[t + 1][e - k] for _, k, c in table[t] if k <= e)
    total = best[0][E]
    tol = 1e-9 * max(1.0, abs(total))
    chosen: list[tuple[int, ...]] = []
    e, acc = E, 0.0
    for t in range(T):
        for pat, k, c in table[t]:
            if k <= e and acc + c + best[t + 1][e - k] >= total - tol:
                chosen.append(pat)
                acc += c
                e -= k
                break
    ud = np.zeros_like(nominal.u_demand)
    us = np.zeros_like(nominal.u_solar)
    for t, pat in enumerate(chosen):
        for bit, (kind, i, _) in zip(pat, per_hour[t]):
            if bit:
                (ud if kind == "demand" else us)[i, t] = 1
    real = UncertaintyRealization.from_indicators(case, ud, us)
    return real, total


def robust_objective(case: NetworkCase, first_stage, backend: str = "native") -> float:
    """First-stage cost (zero) plus the exhaustive worst-case recourse cost."""
    return brute_force_worst_case(case, first_stage, backend=backend)[1]


def risk_feasible(case: NetworkCase, status: np.ndarray, tol: float = 1e-12) -> bool:
    sc = case.scores_array() * status
    if case.params.risk_intake is RiskIntake.CONSERVATIVE:
        return bool(np.all(sc.sum(axis=0) <= case.params.risk_tolerance + tol))
    return bool(sc.sum() <= case.params.risk_tolerance + tol)


def enumerate_robust_optimum(case: NetworkCase, max_line_hours: int = 12,
                             backend: str = "native") -> tuple[np.ndarray, float]:
    """Minimum robust objective over every risk-feasible line-status pattern."""
    L, T = len(case.lines), case.horizon
    if L * T > max_line_hours:
        raise OracleError(f"{L * T} line-hours exceed the enumeration bound {max_line_hours}")
    best_val, best_status = math.inf, None
    # energized-first order so ties keep the plan with more lines on
    for bits in itertools.product((1, 0), repeat=L * T):
        status = np.array(bits, dtype=np.int8).reshape(L, T)
        if not risk_feasible(case, status):
            continue
        val = robust_objective(case, status, backend)
        if val < best_val - 1e-9 * max(1.0, abs(val)):
            best_val, best_status = val, status
    if best_status is None:
        raise OracleError("no risk-feasible line pattern")
    return best_status, best_val


def evaluate_plan(case: NetworkCase, status: np.ndarray) -> FirstStageSolution:
    return first_stage_from_status(case, status)
