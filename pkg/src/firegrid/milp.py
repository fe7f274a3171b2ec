"""Branch-and-bound over binary variables on top of :mod:`firegrid.lp`.

The native search is deterministic: most-fractional branching (ties to the
lowest variable index), the up-branch is dived into first, and when a dive
ends the open node with the best bound is resumed.  Every integral node is
*polished* by fixing its binaries to exact 0/1 and re-solving the residual
LP, so incumbents are exactly integral and feasible to LP accuracy.
"""

from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .lp import EQ, GE, LE, LinearProgram, LpSolution, LpStatus, solve_lp

INT_TOL = 1e-6


class MilpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NODE_LIMIT = "node_limit"


class MilpError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class MixedIntegerProgram:
    lp: LinearProgram
    binaries: tuple[int, ...]

    def __post_init__(self):
        b = np.asarray(self.binaries, dtype=int)
        if b.size:
            if b.min() < 0 or b.max() >= self.lp.num_cols:
                raise MilpError("binary index out of range")
            if np.any(self.lp.lb[b] < 0) or np.any(self.lp.ub[b] > 1):
                raise MilpError("binary variables must have bounds within [0, 1]")

    @property
    def maximize(self) -> bool:
        return self.lp.maximize


@dataclass(frozen=True, eq=False)
class MilpSolution:
    status: MilpStatus
    x: np.ndarray | None = None
    objective: float = math.nan
    bound: float = math.nan
    nodes: int = 0
    gap: float = math.nan
    gap_proven: bool = False
    bound_history: tuple[float, ...] = ()
    incumbent_history: tuple[float, ...] = ()
    lp_solution: LpSolution | None = field(default=None, repr=False)

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None


def _abs_tol(gap: float, value: float) -> float:
    if not math.isfinite(value):
        return 0.0
    return max(gap, 1e-9) * max(1.0, abs(value))


def relative_gap(incumbent: float, bound: float) -> float:
    if not (math.isfinite(incumbent) and math.isfinite(bound)):
        return math.inf
    return abs(incumbent - bound) / max(1.0, abs(incumbent))


def polish(mip: MixedIntegerProgram, x: np.ndarray, backend: str = "native",
           lb: np.ndarray | None = None, ub: np.ndarray | None = None) -> LpSolution:
    """Fix binaries at ``round(x)`` and re-solve the continuous remainder."""
    lb = mip.lp.lb.copy() if lb is None else lb.copy()
    ub = mip.lp.ub.copy() if ub is None else ub.copy()
    b = np.asarray(mip.binaries, dtype=int)
    if b.size:
        fixed = np.round(x[b])
        lb[b] = fixed
        ub[b] = fixed
    sol = solve_lp(mip.lp.with_bounds(lb, ub), backend=backend)
    if sol.optimal and b.size:
        xs = sol.x.copy()
        xs[b] = np.round(xs[b])
        sol = LpSolution(status=sol.status, x=xs, objective=sol.objective, duals=sol.duals,
                         reduced_costs=sol.reduced_costs, dual_objective=sol.dual_objective,
                         iterations=sol.iterations)
    return sol


# ---------------------------------------------------------------------------
# bound propagation


def propagate_bounds(lp: LinearProgram, lb: np.ndarray, ub: np.ndarray,
                     binaries: np.ndarray, passes: int = 3) -> bool:
    """Tighten ``lb``/``ub`` in place from row activities; False if a row is infeasible.

    Only finite implied bounds are applied and binary bounds are rounded
    inward, so a fixed binary collapses the big-M rows it controls.
    """
    A = lp.A.tocsr()
    is_bin = np.zeros(lp.num_cols, dtype=bool)
    is_bin[binaries] = True
    tol = 1e-9
    for _ in range(passes):
        changed = False
        for r in range(lp.num_rows):
            lo_i, hi_i = A.indptr[r], A.indptr[r + 1]
            if hi_i == lo_i:
                continue
            cols = A.indices[lo_i:hi_i]
            a = A.data[lo_i:hi_i]
            l, u = lb[cols], ub[cols]
            amin = np.where(a > 0, a * l, a * u)
            amax = np.where(a > 0, a * u, a * l)
            sense, rhs = lp.senses[r], lp.rhs[r]
            ninf_min = ~np.isfinite(amin)
            ninf_max = ~np.isfinite(amax)
            smin = amin[~ninf_min].sum()
            smax = amax[~ninf_max].sum()
            scale = 1e-9 * max(1.0, abs(rhs))
            if sense in (LE, EQ) and not ninf_min.any() and smin > rhs + 1e-6 * max(1.0, abs(rhs)):
                return False
            if sense in (GE, EQ) and not ninf_max.any() and smax < rhs - 1e-6 * max(1.0, abs(rhs)):
                return False
            for k, j in enumerate(cols):
                ak = a[k]
                if sense in (LE, EQ):
                    # ak * x_j <= rhs - (min activity of the others)
                    others = ninf_min.sum() - (1 if ninf_min[k] else 0)
                    if others == 0:
                        rest = smin - (0.0 if ninf_min[k] else amin[k])
                        bound = (rhs - rest) / ak
                        if ak > 0 and bound < ub[j] - scale:
                            ub[j] = math.floor(bound + 1e-9) if is_bin[j] else bound
                            changed = True
                        elif ak < 0 and bound > lb[j] + scale:
                            lb[j] = math.ceil(bound - 1e-9) if is_bin[j] else bound
                            changed = True
                if sense in (GE, EQ):
                    others = ninf_max.sum() - (1 if ninf_max[k] else 0)
                    if others == 0:
                        rest = smax - (0.0 if ninf_max[k] else amax[k])
                        bound = (rhs - rest) / ak
                        if ak > 0 and bound > lb[j] + scale:
                            lb[j] = math.ceil(bound - 1e-9) if is_bin[j] else bound
                            changed = True
                        elif ak < 0 and bound < ub[j] - scale:
                            ub[j] = math.floor(bound + 1e-9) if is_bin[j] else bound
                            changed = True
                if lb[j] > ub[j] + tol:
                    return False
                if lb[j] > ub[j]:
                    lb[j] = ub[j]
        if not changed:
            break
    return True


# ---------------------------------------------------------------------------
# search


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    lb: np.ndarray = field(compare=False)
    ub: np.ndarray = field(compare=False)


def solve_milp(mip: MixedIntegerProgram, gap: float = 1e-9, node_limit: int = 100_000,
               backend: str = "native", propagate: bool = True) -> MilpSolution:
    """Solve ``mip`` to relative ``gap`` (``|inc - bound| / max(1, |inc|)``).

    ``backend="native"`` runs the search here with the native simplex;
    ``backend="highs"`` delegates to HiGHS through :func:`scipy.optimize.milp`
    and then polishes the incumbent the same way.
    """
    if not 0.0 <= gap < 1.0:
        raise MilpError("gap must lie in [0, 1)")
    if backend == "highs":
        return _solve_highs(mip, gap, node_limit)
    if backend != "native":
        raise MilpError(f"unknown MILP backend {backend!r}")

    lp = mip.lp
    sign = -1.0 if lp.maximize else 1.0
    bins = np.asarray(sorted(mip.binaries), dtype=int)

    inc_x: np.ndarray | None = None
    inc_sol: LpSolution | None = None
    inc_val = math.inf                       # minimization form
    open_heap: list[_Node] = []
    seq = 0
    nodes = 0
    bound_hist: list[float] = []
    inc_hist: list[float] = []

    def global_lower(current_bound: float) -> float:
        vals = [current_bound] if current_bound is not None else []
        if open_heap:
            vals.append(open_heap[0].bound)
        if not vals:
            return inc_val
        return min(min(vals), inc_val)

    current: _Node | None = _Node(-math.inf, 0, lp.lb.copy(), lp.ub.copy())
    while current is not None or open_heap:
        if current is None:
            current = heapq.heappop(open_heap)
            if current.bound >= inc_val - _abs_tol(gap, inc_val):
                current = None
                continue
        if nodes >= node_limit:
            heapq.heappush(open_heap, current)
            current = None
            break
        node, current = current, None
        nodes += 1
        lb, ub = node.lb, node.ub
        if propagate and bins.size and not propagate_bounds(lp, lb, ub, bins):
            bound_hist.append(global_lower(None))
            continue
        sol = solve_lp(lp.with_bounds(lb, ub), backend="native")
        if sol.status is LpStatus.INFEASIBLE:
            bound_hist.append(global_lower(None))
            continue
        if sol.status is LpStatus.UNBOUNDED:
            if nodes == 1:
                return MilpSolution(status=MilpStatus.UNBOUNDED, nodes=nodes)
            raise MilpError("unbounded relaxation below the root")
        if not sol.optimal:
            raise MilpError(f"node LP failed: {sol.status.value}")
        z = sign * sol.objective
        if z >= inc_val - _abs_tol(gap, inc_val):
            bound_hist.append(global_lower(None))
            continue
        xb = sol.x[bins]
        frac = np.minimum(xb - np.floor(xb), np.ceil(xb) - xb)
        if not np.any(frac > INT_TOL):
            pol = polish(mip, sol.x, "native", lb, ub)
            if pol.optimal:
                zp = sign * pol.objective
                if zp < inc_val:
                    inc_val, inc_x, inc_sol = zp, pol.x, pol
                    inc_hist.append(sign * zp)
            bound_hist.append(global_lower(None))
            continue
        k = int(np.argmax(frac))          # first maximal entry => lowest index on ties
        j = int(bins[k])
        up_lb, up_ub = lb.copy(), ub.copy()
        up_lb[j] = 1.0
        dn_lb, dn_ub = lb.copy(), ub.copy()
        dn_ub[j] = 0.0
        seq += 1
        heapq.heappush(open_heap, _Node(z, seq, dn_lb, dn_ub))
        seq += 1
        current = _Node(z, seq, up_lb, up_ub)
        bound_hist.append(global_lower(z))

    lower = inc_val if not open_heap else min(open_heap[0].bound, inc_val)
    if open_heap and (inc_x is None or open_heap[0].bound < inc_val - _abs_tol(gap, inc_val)):
        status = MilpStatus.NODE_LIMIT
    elif inc_x is None:
        status = MilpStatus.INFEASIBLE
    else:
        status = MilpStatus.OPTIMAL
    if inc_x is None:
        return MilpSolution(status=status, nodes=nodes, bound=sign * lower,
                            bound_history=tuple(sign * v for v in bound_hist))
    return MilpSolution(
        status=status, x=inc_x, objective=sign * inc_val, bound=sign * lower, nodes=nodes,
        gap=relative_gap(inc_val, lower), gap_proven=status is MilpStatus.OPTIMAL,
        bound_history=tuple(sign * v for v in bound_hist),
        incumbent_history=tuple(inc_hist), lp_solution=inc_sol)


def _solve_highs(mip: MixedIntegerProgram, gap: float, node_limit: int) -> MilpSolution:
    from scipy.optimize import Bounds, LinearConstraint, milp

    lp = mip.lp
    sign = -1.0 if lp.maximize else 1.0
    s = np.asarray(lp.senses)
    rlo = np.where(s == LE, -np.inf, lp.rhs)
    rhi = np.where(s == GE, np.inf, lp.rhs)
    integrality = np.zeros(lp.num_cols)
    integrality[list(mip.binaries)] = 1
    cons = [LinearConstraint(lp.A, rlo, rhi)] if lp.num_rows else []
    res = milp(sign * lp.c, integrality=integrality, bounds=Bounds(lp.lb, lp.ub),
               constraints=cons,
               options={"disp": False, "mip_rel_gap": max(gap, 1e-12), "node_limit": node_limit,
                        "presolve": True})
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    dual_bound = getattr(res, "mip_dual_bound", None)
    if res.status == 2:
        return MilpSolution(status=MilpStatus.INFEASIBLE, nodes=nodes)
    if res.status == 3:
        return MilpSolution(status=MilpStatus.UNBOUNDED, nodes=nodes)
    if res.x is None:
        if res.status == 1:
            return MilpSolution(status=MilpStatus.NODE_LIMIT, nodes=nodes)
        raise MilpError(f"HiGHS MILP failure: {res.message}")
    pol = polish(mip, np.asarray(res.x), "highs")
    if not pol.optimal:
        raise MilpError(f"polishing LP failed: {pol.status.value}")
    zp = sign * pol.objective
    if dual_bound is not None and math.isfinite(dual_bound):
        lower = dual_bound + sign * lp.obj_offset
    else:
        lower = zp
    # the polish can only improve the incumbent; the bound is HiGHS' proven one
    lower = min(lower, zp)
    status = MilpStatus.OPTIMAL if res.status == 0 else MilpStatus.NODE_LIMIT
    return MilpSolution(
        status=status, x=pol.x, objective=pol.objective, bound=sign * lower, nodes=nodes,
        gap=relative_gap(zp, lower), gap_proven=status is MilpStatus.OPTIMAL,
        bound_history=(sign * lower,), incumbent_history=(pol.objective,), lp_solution=pol)
