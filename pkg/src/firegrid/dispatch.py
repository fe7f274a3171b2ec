"""Second-stage DC dispatch blocks shared by the master, the subproblem, and the oracle.

A block holds, for each hour, generator segment outputs, generator totals,
solar outputs, line flows, bus angles, and served demand.  Line statuses are
either master variables (big-M switching rows) or fixed 0/1 constants, in
which case de-energized lines are dropped and energized lines carry an
exact flow-angle equality.

The nodal balance is ``supply + inflow - outflow - served >= 0``: surplus
injection is disposed of for free, which keeps the block feasible when an
islanded generator must still run at its minimum output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .grid import NetworkCase, RiskIntake
from .lp import EQ, GE, LE, LinearProgram, LpBuilder, LpSolution, solve_lp


def _tag(scenario, *parts) -> Hashable:
    return parts if scenario is None else (scenario,) + parts


@dataclass
class RecourseBlock:
    """Column indices of one dispatch block (``-1`` marks an absent column)."""

    seg: np.ndarray        # (gens, max segments, T)
    pg: np.ndarray         # (gens, T)
    ps: np.ndarray         # (solar, T)
    flow: np.ndarray       # (lines, T)
    theta: np.ndarray      # (buses, T)
    served: np.ndarray     # (demands, T)
    sc: np.ndarray | None  # (lines, T), only with risk rows
    hours: tuple[int, ...]
    cost_cols: list[int] = field(default_factory=list)
    cost_coefs: list[float] = field(default_factory=list)
    shed_constant: float = 0.0      # K times total realized demand

    def cost(self, x: np.ndarray) -> float:
        return float(np.dot(self.cost_coefs, x[self.cost_cols])) + self.shed_constant


def nominal_profiles(case: NetworkCase) -> tuple[np.ndarray, np.ndarray]:
    T = case.horizon
    dem = np.array([d.nominal for d in case.demands], dtype=float).reshape(len(case.demands), T)
    sol = np.array([s.nominal for s in case.solar], dtype=float).reshape(len(case.solar), T)
    return dem, sol


def deviation_profiles(case: NetworkCase) -> tuple[np.ndarray, np.ndarray]:
    T = case.horizon
    dem = np.array([d.deviation for d in case.demands], dtype=float).reshape(len(case.demands), T)
    sol = np.array([s.deviation for s in case.solar], dtype=float).reshape(len(case.solar), T)
    return dem, sol


def add_recourse_block(b: LpBuilder, case: NetworkCase, demand: np.ndarray, solar: np.ndarray,
                       status, status_is_var: bool, scenario=None, hours: Sequence[int] | None = None,
                       include_risk: bool = False, price_in_objective: bool = False,
                       score_floor: np.ndarray | None = None) -> RecourseBlock:
    """Append one dispatch block to ``b``.

    ``status`` is an (lines, T) array of master column indices when
    ``status_is_var`` is true, else of fixed 0/1 values.  With
    ``price_in_objective`` the block cost enters the builder's objective and
    offset directly.  ``include_risk`` adds the score variables with their
    lower-bound and tolerance rows (only meaningful with fixed statuses);
    ``score_floor`` raises each tolerance right-hand side to at least the
    realized score total, absorbing solver tolerance in the master.
    """
    T = case.horizon
    hours = tuple(range(T)) if hours is None else tuple(hours)
    p = case.params
    K = p.shed_penalty
    bidx = case.bus_index()
    nb, nl, ng = len(case.buses), len(case.lines), len(case.generators)
    ns, nd = len(case.solar), len(case.demands)
    kmax = max((len(g.segments) for g in case.generators), default=0)
    ref = case.reference_bus
    bigm = case.line_big_m()
    scores = case.scores_array()

    blk = RecourseBlock(
        seg=np.full((ng, kmax, T), -1), pg=np.full((ng, T), -1), ps=np.full((ns, T), -1),
        flow=np.full((nl, T), -1), theta=np.full((nb, T), -1), served=np.full((nd, T), -1),
        sc=np.full((nl, T), -1) if include_risk else None, hours=hours)

    def priced(j: int, coef: float) -> None:
        blk.cost_cols.append(j)
        blk.cost_coefs.append(coef)
        if price_in_objective:
            b.set_cost(j, coef)

    # balance rows are collected per (bus, t) and emitted last
    inj: dict[tuple[int, int], tuple[list[int], list[float]]] = {
        (k, t): ([], []) for k in range(nb) for t in hours}

    for t in hours:
        for k, bus in enumerate(case.buses):
            if bus.id != ref:
                blk.theta[k, t] = b.add_var(-np.pi, np.pi, tag=_tag(scenario, "theta", bus.id, t))
        for gi, g in enumerate(case.generators):
            pj = b.add_var(g.p_min, g.p_max, tag=_tag(scenario, "p", g.id, t))
            blk.pg[gi, t] = pj
            cols, coefs = [pj], [1.0]
            for si, (w, mc) in enumerate(g.segments):
                j = b.add_var(0.0, w, tag=_tag(scenario, "seg", g.id, si, t))
                blk.seg[gi, si, t] = j
                priced(j, mc)
                cols.append(j)
                coefs.append(-1.0)
            b.add_row(cols, coefs, EQ, 0.0, tag=_tag(scenario, "gen_sum", g.id, t))
            inj[(bidx[g.bus], t)][0].append(pj)
            inj[(bidx[g.bus], t)][1].append(1.0)
        for si, s in enumerate(case.solar):
            j = b.add_var(0.0, max(float(solar[si, t]), 0.0), tag=_tag(scenario, "solar", s.id, t))
            blk.ps[si, t] = j
            inj[(bidx[s.bus], t)][0].append(j)
            inj[(bidx[s.bus], t)][1].append(1.0)
        for di, d in enumerate(case.demands):
            j = b.add_var(0.0, max(float(demand[di, t]), 0.0), tag=_tag(scenario, "served", d.bus, t))
            blk.served[di, t] = j
            priced(j, -K)
            inj[(bidx[d.bus], t)][0].append(j)
            inj[(bidx[d.bus], t)][1].append(-1.0)
            blk.shed_constant += K * float(demand[di, t])
        for li, line in enumerate(case.lines):
            fi, ti = bidx[line.from_bus], bidx[line.to_bus]
            susc = case.base_mva / line.reactance
            if status_is_var:
                I = int(status[li, t])
                f = b.add_var(-line.flow_limit, line.flow_limit, tag=_tag(scenario, "flow", line.id, t))
                b.add_row([f, I], [1.0, -line.flow_limit], LE, 0.0, tag=_tag(scenario, "flow_hi", line.id, t))
                b.add_row([f, I], [1.0, line.flow_limit], GE, 0.0, tag=_tag(scenario, "flow_lo", line.id, t))
                cols, coefs = [f], [1.0]
                if blk.theta[fi, t] >= 0:
                    cols.append(int(blk.theta[fi, t]))
                    coefs.append(-susc)
                if blk.theta[ti, t] >= 0:
                    cols.append(int(blk.theta[ti, t]))
                    coefs.append(susc)
                M = float(bigm[li])
                b.add_row(cols + [I], coefs + [M], LE, M, tag=_tag(scenario, "angle_hi", line.id, t))
                b.add_row(cols + [I], coefs + [-M], GE, -M, tag=_tag(scenario, "angle_lo", line.id, t))
            else:
                if round(float(status[li, t])) == 0:
                    continue
                f = b.add_var(-line.flow_limit, line.flow_limit, tag=_tag(scenario, "flow", line.id, t))
                cols, coefs = [f], [1.0]
                if blk.theta[fi, t] >= 0:
                    cols.append(int(blk.theta[fi, t]))
                    coefs.append(-susc)
                if blk.theta[ti, t] >= 0:
                    cols.append(int(blk.theta[ti, t]))
                    coefs.append(susc)
                b.add_row(cols, coefs, EQ, 0.0, tag=_tag(scenario, "angle", line.id, t))
            blk.flow[li, t] = f
            inj[(fi, t)][0].append(f)
            inj[(fi, t)][1].append(-1.0)
            inj[(ti, t)][0].append(f)
            inj[(ti, t)][1].append(1.0)

    for t in hours:
        for k, bus in enumerate(case.buses):
            cols, coefs = inj[(k, t)]
            b.add_row(cols, coefs, GE, 0.0, tag=_tag(scenario, "balance", bus.id, t))

    if include_risk:
        if status_is_var:
            raise ValueError("risk rows in a dispatch block need fixed line statuses")
        for t in hours:
            for li, line in enumerate(case.lines):
                j = b.add_var(0.0, np.inf, tag=_tag(scenario, "sc", line.id, t))
                blk.sc[li, t] = j
                b.add_row([j], [1.0], GE, float(scores[li, t] * round(float(status[li, t]))),
                          tag=_tag(scenario, "score", line.id, t))
        realized = scores * np.round(np.asarray(status, dtype=float))
        tol = p.risk_tolerance
        if p.risk_intake is RiskIntake.CONSERVATIVE:
            for t in hours:
                rhs = max(tol, float(realized[:, t].sum())) if score_floor is None else max(tol, float(score_floor[t]))
                b.add_row([int(blk.sc[li, t]) for li in range(nl)], [1.0] * nl, LE, rhs,
                          tag=_tag(scenario, "risk", t))
        else:
            total = float(realized[:, list(hours)].sum())
            rhs = max(tol, total)
            cols = [int(blk.sc[li, t]) for t in hours for li in range(nl)]
            b.add_row(cols, [1.0] * len(cols), LE, rhs, tag=_tag(scenario, "risk"))

    if price_in_objective:
        b.obj_offset += blk.shed_constant
    return blk


def recourse_lp(case: NetworkCase, status: np.ndarray, demand: np.ndarray, solar: np.ndarray,
                hours: Sequence[int] | None = None,
                include_risk: bool = False) -> tuple[LinearProgram, RecourseBlock]:
    """Stand-alone second-stage LP for fixed line statuses and realized profiles."""
    b = LpBuilder()
    blk = add_recourse_block(b, case, demand, solar, np.asarray(status, dtype=float), False,
                             hours=hours, include_risk=include_risk, price_in_objective=True)
    return b.build(), blk


def solve_recourse(case: NetworkCase, status: np.ndarray, demand: np.ndarray, solar: np.ndarray,
                   hours: Sequence[int] | None = None, backend: str = "native",
                   include_risk: bool = False) -> tuple[LpSolution, RecourseBlock, LinearProgram]:
    lp, blk = recourse_lp(case, status, demand, solar, hours, include_risk)
    return solve_lp(lp, backend=backend), blk, lp


NATIVE_MAX_BINARIES = 12


def pick_backend(case: NetworkCase, n_scenarios: int = 1, binaries: int = 0) -> str:
    """``auto`` selects the native solvers on small instances and HiGHS otherwise."""
    if case.params.solver != "auto":
        return case.params.solver
    if binaries > NATIVE_MAX_BINARIES:
        return "highs"
    per_hour = (len(case.lines) * 2 + len(case.buses) + sum(len(g.segments) + 1 for g in case.generators)
                + len(case.solar) + len(case.demands))
    size = per_hour * case.horizon * max(1, n_scenarios)
    return "native" if size <= 400 else "highs"
