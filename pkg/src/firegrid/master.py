"""First-stage problem: line energization under fire-risk limits plus scenario recourse copies.

The only first-stage decisions are the hourly line statuses ``I`` and their
score variables.  Every scenario contributes a full dispatch copy and a cut
``e >= cost(block)``; the master minimizes ``e``, so its optimum is a lower
bound on the robust cost.  The first scenario is the nominal realization, so
with no uncertainty budget the master is the deterministic switching problem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dispatch import RecourseBlock, add_recourse_block, pick_backend, solve_recourse
from .grid import NetworkCase, RiskIntake
from .lp import GE, LE, LpBuilder, LinearProgram
from .milp import MilpSolution, MilpStatus, MixedIntegerProgram, solve_milp
from .realization import UncertaintyRealization


class MasterError(RuntimeError):
    pass


class DuplicateScenarioError(MasterError):
    """The realization is already in the master: column generation has stalled."""


class MasterInfeasibleError(MasterError):
    def __init__(self, message: str, rows: tuple = ()):
        self.rows = rows
        super().__init__(message)


@dataclass(frozen=True)
class MasterProblem:
    case: NetworkCase
    lp: LinearProgram
    status_cols: np.ndarray          # (lines, T) column of I
    score_cols: np.ndarray           # (lines, T) column of SC
    e_col: int
    scenarios: tuple[UncertaintyRealization, ...]
    blocks: tuple[RecourseBlock, ...] = field(repr=False)

    @property
    def mip(self) -> MixedIntegerProgram:
        return MixedIntegerProgram(self.lp, tuple(int(j) for j in self.status_cols.ravel()))


@dataclass(frozen=True, eq=False)
class FirstStageSolution:
    """Line plan with its nominal-scenario dispatch and the master bound."""

    line_ids: tuple[int, ...]
    line_status: np.ndarray      # (lines, T) int8
    scores: np.ndarray           # SC = psi * I
    dispatch: np.ndarray         # (gens, T) MW
    segments: np.ndarray         # (gens, max segments, T) MW
    solar: np.ndarray            # (solar, T) MW
    served: np.ndarray           # (demands, T) MW
    demand: np.ndarray           # nominal demand the dispatch serves
    flows: np.ndarray            # (lines, T) MW
    angles: np.ndarray           # (buses, T) rad
    surrogate: float             # e at the master optimum
    objective: float             # first-stage cost (zero) plus e
    lower_bound: float           # proven master bound
    nominal_cost: float          # recourse cost of the nominal realization
    mip_nodes: int = 0

    def to_dict(self, case: NetworkCase) -> dict:
        r9 = lambda a: [[round(float(v), 9) for v in row] for row in a]
        return {
            "objective": round(self.objective, 9),
            "lower_bound": round(self.lower_bound, 9),
            "nominal_cost": round(self.nominal_cost, 9),
            "line_status": {str(lid): [int(v) for v in self.line_status[k]]
                            for k, lid in enumerate(self.line_ids)},
            "dispatch": {str(g.id): r9(self.dispatch[k:k + 1])[0] for k, g in enumerate(case.generators)},
            "solar": {str(s.id): r9(self.solar[k:k + 1])[0] for k, s in enumerate(case.solar)},
            "served": {str(d.bus): r9(self.served[k:k + 1])[0] for k, d in enumerate(case.demands)},
            "flows": {str(lid): r9(self.flows[k:k + 1])[0] for k, lid in enumerate(self.line_ids)},
        }


def build_master(case: NetworkCase, scenarios) -> MasterProblem:
    scenarios = tuple(scenarios)
    if not scenarios:
        raise MasterError("the master needs at least one scenario")
    keys = [s.key() for s in scenarios]
    if len(set(keys)) != len(keys):
        raise DuplicateScenarioError("scenario list contains a duplicate realization")
    for sc in scenarios:
        _check_budget(case, sc)
    T, L = case.horizon, len(case.lines)
    p = case.params
    scores = case.scores_array()
    b = LpBuilder()
    I = np.full((L, T), -1)
    SC = np.full((L, T), -1)
    for t in range(T):
        for li, line in enumerate(case.lines):
            I[li, t] = b.add_var(0.0, 1.0, tag=("I", line.id, t))
    for t in range(T):
        for li, line in enumerate(case.lines):
            SC[li, t] = b.add_var(0.0, math.inf, tag=("sc", line.id, t))
            b.add_row([SC[li, t], I[li, t]], [1.0, -scores[li, t]], GE, 0.0, tag=("score", line.id, t))
    if L:
        if p.risk_intake is RiskIntake.CONSERVATIVE:
            for t in range(T):
                b.add_row(list(SC[:, t]), [1.0] * L, LE, p.risk_tolerance, tag=("risk", t))
        else:
            b.add_row(list(SC.ravel()), [1.0] * SC.size, LE, p.risk_tolerance, tag=("risk",))
    e = b.add_var(-math.inf, math.inf, cost=1.0, tag=("e",))
    blocks = []
    for k, sc in enumerate(scenarios):
        blocks.append(_add_scenario(b, case, I, e, k, sc))
    return MasterProblem(case, b.build(), I, SC, e, scenarios, tuple(blocks))


def _check_budget(case: NetworkCase, sc: UncertaintyRealization) -> None:
    if sc.budget_used > case.params.budget:
        raise MasterError(f"realization uses {sc.budget_used} deviations, budget is {case.params.budget}")


def _add_scenario(b: LpBuilder, case: NetworkCase, I: np.ndarray, e: int, k: int,
                  sc: UncertaintyRealization) -> RecourseBlock:
    blk = add_recourse_block(b, case, sc.demand, sc.solar, I, True, scenario=k)
    b.add_row([e] + blk.cost_cols, [1.0] + [-c for c in blk.cost_coefs], GE, blk.shed_constant,
              tag=(k, "cut"))
    return blk


def append_scenario(master: MasterProblem, realization: UncertaintyRealization) -> MasterProblem:
    """Return a master with one more recourse block and cut; earlier rows are kept as-is."""
    if any(realization.key() == s.key() for s in master.scenarios):
        raise DuplicateScenarioError("realization already present in the master")
    _check_budget(master.case, realization)
    b = LpBuilder.from_lp(master.lp)
    blk = _add_scenario(b, master.case, master.status_cols, master.e_col, len(master.scenarios),
                        realization)
    return MasterProblem(master.case, b.build(), master.status_cols, master.score_cols, master.e_col,
                         master.scenarios + (realization,), master.blocks + (blk,))


def solve_master(master: MasterProblem, backend: str | None = None,
                 node_limit: int = 100_000) -> FirstStageSolution:
    case = master.case
    if backend is None:
        backend = pick_backend(case, len(master.scenarios) + 1, master.status_cols.size)
    sol: MilpSolution = solve_milp(master.mip, gap=case.params.mip_gap, node_limit=node_limit,
                                   backend=backend)
    if sol.status is MilpStatus.INFEASIBLE:
        tags = tuple(t for t in master.lp.row_tags if t and t[0] == "risk")
        raise MasterInfeasibleError("master infeasible: risk rows cannot be met", tags)
    if not sol.has_incumbent:
        raise MasterError(f"master solve ended without a plan: {sol.status.value}")
    if sol.status is not MilpStatus.OPTIMAL:
        raise MasterError(f"master solve not proven optimal: {sol.status.value}")
    status = np.round(sol.x[master.status_cols]).astype(np.int8) if master.status_cols.size \
        else np.zeros((0, case.horizon), dtype=np.int8)
    return first_stage_from_status(case, status, surrogate=float(sol.x[master.e_col]),
                                   objective=float(sol.objective), lower_bound=float(sol.bound),
                                   nodes=sol.nodes, backend="native" if backend == "native" else "highs")


def first_stage_from_status(case: NetworkCase, status: np.ndarray, surrogate: float = math.nan,
                            objective: float = math.nan, lower_bound: float = math.nan,
                            nodes: int = 0, backend: str | None = None) -> FirstStageSolution:
    """Wrap a line plan, dispatching the nominal realization on it."""
    status = np.asarray(status, dtype=np.int8).reshape(len(case.lines), case.horizon)
    nominal = UncertaintyRealization.nominal(case)
    if backend is None:
        backend = pick_backend(case)
    lp_sol, blk, _ = solve_recourse(case, status, nominal.demand, nominal.solar, backend=backend)
    if not lp_sol.optimal:
        raise MasterError(f"nominal dispatch failed: {lp_sol.status.value}")
    x = lp_sol.x

    def take(idx):
        out = np.zeros(idx.shape)
        mask = idx >= 0
        out[mask] = x[idx[mask]]
        return out

    cost = float(lp_sol.objective)
    if math.isnan(objective):
        objective = cost
    return FirstStageSolution(
        line_ids=tuple(l.id for l in case.lines), line_status=status,
        scores=case.scores_array() * status, dispatch=take(blk.pg), segments=take(blk.seg),
        solar=take(blk.ps), served=take(blk.served), demand=nominal.demand, flows=take(blk.flow),
        angles=take(blk.theta), surrogate=surrogate, objective=objective,
        lower_bound=lower_bound, nominal_cost=cost, mip_nodes=nodes)


def most_energized_plan(master: MasterProblem, cap: float, backend: str | None = None,
                        node_limit: int = 100_000) -> np.ndarray | None:
    """Among master solutions with ``e <= cap``, the one energizing the most line-hours."""
    case = master.case
    if not master.status_cols.size:
        return None
    b = LpBuilder.from_lp(master.lp)
    b.set_cost(master.e_col, 0.0)
    for j in master.status_cols.ravel():
        b.set_cost(int(j), -1.0)
    b.add_row([master.e_col], [1.0], LE, cap, tag=("cap",))
    mip = MixedIntegerProgram(b.build(), tuple(int(j) for j in master.status_cols.ravel()))
    if backend is None:
        backend = pick_backend(case, len(master.scenarios) + 1, master.status_cols.size)
    sol = solve_milp(mip, gap=0.0, node_limit=node_limit, backend=backend)
    if sol.status is not MilpStatus.OPTIMAL:
        return None
    return np.round(sol.x[master.status_cols]).astype(np.int8)
