"""Worst-case realization search through the dual of the dispatch LP.

For fixed line statuses the recourse LP is ``min c'y`` over rows ``A y (rel) b``
and boxes ``l <= y <= u``.  Its dual has one multiplier per row (``pi``) and
one per finite bound (``alpha`` for lower, ``beta`` for upper), one equality
per primal column, and objective ``b'pi + l'alpha - u'beta``.  Uncertainty
only moves upper bounds: served demand ``<= D0 + dD z`` and solar output
``<= S0 - dS z``.  Each product ``beta * z`` is replaced by ``Phi`` with
``beta = Phi + aux``, ``0 <= Phi <= M z`` and ``0 <= aux <= M (1 - z)``, which
makes the adversary's problem a MILP over the binaries ``z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Hashable

import numpy as np

from .dispatch import deviation_profiles, nominal_profiles, pick_backend, recourse_lp, solve_recourse
from .grid import NetworkCase
from .lp import EQ, GE, LE, LinearProgram, LpBuilder
from .master import FirstStageSolution
from .milp import MilpStatus, MixedIntegerProgram, solve_milp
from .realization import UncertaintyRealization

# tag families of the recourse rows, named after the multipliers they carry
FAMILIES = {
    "lambda1": "gen_sum",
    "lambda2": "balance",
    "mu5": "angle",
    "mu7": "score",
    "mu8": "risk",
}


class SubproblemError(RuntimeError):
    pass


@dataclass(frozen=True)
class UncertainBound:
    """One primal upper bound that moves with a binary."""

    kind: str          # "demand" or "solar"
    entity: int        # row index into case.demands / case.solar
    hour: int
    primal_col: int
    delta: float       # change of the upper bound when z = 1 (signed MW)
    z_col: int
    phi_col: int
    aux_col: int
    beta_col: int
    big_m: float


@dataclass(frozen=True, eq=False)
class DualSubproblem:
    case: NetworkCase
    status: np.ndarray
    primal: LinearProgram
    lp: LinearProgram
    pi_cols: np.ndarray
    alpha_cols: np.ndarray          # -1 where the bound is infinite
    beta_cols: np.ndarray
    uncertain: tuple[UncertainBound, ...]
    budget: int

    @property
    def mip(self) -> MixedIntegerProgram:
        return MixedIntegerProgram(self.lp, tuple(u.z_col for u in self.uncertain))


@dataclass(frozen=True, eq=False)
class DualSolution:
    pi: dict[Hashable, float]
    alpha: dict[Hashable, float]
    beta: dict[Hashable, float]
    phi: np.ndarray
    aux: np.ndarray
    z: np.ndarray
    objective: float
    bound: float
    linearization_error: float
    constraint_residual: float
    nodes: int = 0

    def family(self, name: str) -> dict[Hashable, float]:
        """Row multipliers of one family, e.g. ``"lambda2"`` for nodal balances."""
        key = FAMILIES[name]
        return {t: v for t, v in self.pi.items() if t[0] == key or (key == "angle" and t[0].startswith("angle"))}


def _solar_big_m(case: NetworkCase) -> float:
    if case.params.big_M is not None:
        return max(float(case.params.big_M), 10.0 * case.params.shed_penalty)
    return 10.0 * case.params.shed_penalty


def build_dual_subproblem(case: NetworkCase, first_stage: FirstStageSolution | np.ndarray,
                          budget: int | None = None, solar_big_m: float | None = None) -> DualSubproblem:
    """Adversary MILP for the line plan of ``first_stage`` under budget ``E``."""
    if isinstance(first_stage, FirstStageSolution):
        status = first_stage.line_status
    else:
        status = first_stage
    if status is None:
        raise SubproblemError("first stage carries no line statuses")
    status = np.asarray(status, dtype=float)
    if status.shape != (len(case.lines), case.horizon):
        raise SubproblemError(f"line status shape {status.shape} != {(len(case.lines), case.horizon)}")
    E = case.params.budget if budget is None else int(budget)
    if E < 0:
        raise SubproblemError("budget must be >= 0")
    d0, s0 = nominal_profiles(case)
    dd, ds = deviation_profiles(case)
    K = case.params.shed_penalty
    m_solar = _solar_big_m(case) if solar_big_m is None else float(solar_big_m)

    primal, blk = recourse_lp(case, status, d0, s0, include_risk=True)
    m, n = primal.num_rows, primal.num_cols
    b = LpBuilder()
    b.obj_offset = primal.obj_offset
    pi = np.empty(m, dtype=int)
    for r, (sense, rhs, tag) in enumerate(zip(primal.senses, primal.rhs, primal.row_tags)):
        lo, hi = {GE: (0.0, math.inf), LE: (-math.inf, 0.0), EQ: (-math.inf, math.inf)}[sense]
        pi[r] = b.add_var(lo, hi, cost=rhs, tag=("pi",) + tuple(tag))
    alpha = np.full(n, -1)
    beta = np.full(n, -1)
    for j in range(n):
        if math.isfinite(primal.lb[j]):
            alpha[j] = b.add_var(0.0, math.inf, cost=primal.lb[j], tag=("alpha",) + tuple(primal.col_tags[j]))
        if math.isfinite(primal.ub[j]):
            beta[j] = b.add_var(0.0, math.inf, cost=-primal.ub[j], tag=("beta",) + tuple(primal.col_tags[j]))
    At = primal.A.T.tocsr()
    for j in range(n):
        lo_, hi_ = At.indptr[j], At.indptr[j + 1]
        cols = [int(pi[r]) for r in At.indices[lo_:hi_]]
        coefs = list(At.data[lo_:hi_])
        if alpha[j] >= 0:
            cols.append(int(alpha[j]))
            coefs.append(1.0)
        if beta[j] >= 0:
            cols.append(int(beta[j]))
            coefs.append(-1.0)
        b.add_row(cols, coefs, EQ, primal.c[j], tag=("dual",) + tuple(primal.col_tags[j]))

    unc: list[UncertainBound] = []
    zs: list[int] = []

    def linearize(kind, ent, t, j, delta, M, z_gain):
        z = b.add_var(0.0, 1.0, cost=z_gain, tag=("z", kind, ent, t))
        phi = b.add_var(0.0, math.inf, cost=-delta, tag=("phi", kind, ent, t))
        aux = b.add_var(0.0, math.inf, tag=("aux", kind, ent, t))
        b.add_row([int(beta[j]), phi, aux], [1.0, -1.0, -1.0], EQ, 0.0, tag=("split", kind, ent, t))
        b.add_row([phi, z], [1.0, -M], LE, 0.0, tag=("phi_on", kind, ent, t))
        b.add_row([aux, z], [1.0, M], LE, M, tag=("aux_off", kind, ent, t))
        zs.append(z)
        unc.append(UncertainBound(kind, ent, t, j, delta, z, phi, aux, int(beta[j]), M))

    # demand: the bound's multiplier never exceeds K, so M = K is exact
    for t in range(case.horizon):
        for di in range(len(case.demands)):
            if dd[di, t] > 0:
                linearize("demand", di, t, int(blk.served[di, t]), float(dd[di, t]), K,
                          K * float(dd[di, t]))
        for si in range(len(case.solar)):
            if ds[si, t] > 0:
                linearize("solar", si, t, int(blk.ps[si, t]), -float(ds[si, t]), m_solar, 0.0)
    if zs:
        b.add_row(zs, [1.0] * len(zs), LE, float(E), tag=("budget",))
    return DualSubproblem(case, status, primal, b.build(maximize=True), pi, alpha, beta,
                          tuple(unc), E)


def _indicators(sub: DualSubproblem, z: np.ndarray) -> UncertaintyRealization:
    case = sub.case
    T = case.horizon
    ud = np.zeros((len(case.demands), T), dtype=np.int8)
    us = np.zeros((len(case.solar), T), dtype=np.int8)
    for u, val in zip(sub.uncertain, z):
        if val > 0.5:
            (ud if u.kind == "demand" else us)[u.entity, u.hour] = 1
    return UncertaintyRealization.from_indicators(case, ud, us)


def solve_subproblem(sub: DualSubproblem, backend: str | None = None, node_limit: int = 200_000,
                     max_m_doublings: int = 6) -> tuple[UncertaintyRealization, float, DualSolution]:
    """Maximize recourse cost over the budgeted vertices.

    Returns the realization, its recourse cost from a primal re-solve, and
    the dual solution.  If a solar multiplier reaches its linearization
    bound the bound is doubled and the problem rebuilt.
    """
    case = sub.case
    if backend is None:
        backend = pick_backend(case, binaries=len(sub.uncertain))
    for _ in range(max_m_doublings + 1):
        res = solve_milp(sub.mip, gap=case.params.mip_gap, node_limit=node_limit, backend=backend)
        if res.status is MilpStatus.UNBOUNDED:
            raise SubproblemError("dual subproblem unbounded: recourse infeasible for some realization "
                                  "(cannot happen with load shedding; internal error)")
        if res.status is MilpStatus.INFEASIBLE or not res.has_incumbent:
            raise SubproblemError(f"dual subproblem failed: {res.status.value}")
        x = res.x
        hit = [u for u in sub.uncertain if u.kind == "solar"
               and x[u.beta_col] >= u.big_m * (1.0 - 1e-9)]
        if not hit:
            break
        M = 2.0 * max(u.big_m for u in hit)
        sub = build_dual_subproblem(case, sub.status, sub.budget, solar_big_m=M)
    else:
        raise SubproblemError("solar dual multiplier keeps reaching its linearization bound")

    z = np.array([round(x[u.z_col]) for u in sub.uncertain], dtype=float)
    real = _indicators(sub, z)
    lp_sol, _, _ = solve_recourse(case, sub.status, real.demand, real.solar, backend=backend,
                                  include_risk=False)
    if not lp_sol.optimal:
        raise SubproblemError(f"recourse re-solve failed: {lp_sol.status.value}")
    cost = float(lp_sol.objective)

    phi = np.array([x[u.phi_col] for u in sub.uncertain])
    aux = np.array([x[u.aux_col] for u in sub.uncertain])
    bet = np.array([x[u.beta_col] for u in sub.uncertain])
    lin_err = float(np.max(np.abs(phi - z * bet))) if phi.size else 0.0
    resid = sub.lp.primal_residual(x)
    tags = sub.primal.row_tags
    pi = {tags[r]: float(x[sub.pi_cols[r]]) for r in range(len(tags))}
    ctags = sub.primal.col_tags
    alpha = {ctags[j]: float(x[c]) for j, c in enumerate(sub.alpha_cols) if c >= 0}
    beta = {ctags[j]: float(x[c]) for j, c in enumerate(sub.beta_cols) if c >= 0}
    dual = DualSolution(pi, alpha, beta, phi, aux, z, float(res.objective), float(res.bound),
                        lin_err, resid, res.nodes)
    return real, cost, dual
