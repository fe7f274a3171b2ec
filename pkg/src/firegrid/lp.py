"""Linear programs with bounded variables: model type, builder, solver entry point.

Rows are ``a_r . x  (<=|==|>=)  b_r`` and every variable carries a box
``lb <= x <= ub`` (infinite bounds allowed).  Dual values follow one
convention regardless of objective sense: ``dual[r]`` is the sensitivity of
the optimal objective to ``b_r``.  Under minimization that makes duals of
``>=`` rows non-negative and duals of ``<=`` rows non-positive.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np
import scipy.sparse as sp

LE, EQ, GE = "<=", "==", ">="
_SENSES = (LE, EQ, GE)

FEAS_TOL = 1e-7
DUAL_TOL = 1e-7


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"
    ITERATION_LIMIT = "iteration_limit"


class LpError(ValueError):
    """Raised for malformed linear programs or mismatched dual tags."""


@dataclass(frozen=True, eq=False)
class LinearProgram:
    c: np.ndarray
    A: sp.csr_matrix
    senses: tuple[str, ...]
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    maximize: bool = False
    obj_offset: float = 0.0
    row_tags: tuple[Hashable, ...] | None = None
    col_tags: tuple[Hashable, ...] | None = None

    def __post_init__(self):
        m, n = self.A.shape
        if self.c.shape != (n,) or self.lb.shape != (n,) or self.ub.shape != (n,):
            raise LpError("cost/bound vectors must match the column count")
        if self.rhs.shape != (m,) or len(self.senses) != m:
            raise LpError("rhs/senses must match the row count")
        if any(s not in _SENSES for s in self.senses):
            raise LpError(f"unknown relation in {set(self.senses)}")
        if not np.all(np.isfinite(self.rhs)):
            raise LpError("right-hand sides must be finite")
        if not np.all(np.isfinite(self.c)):
            raise LpError("costs must be finite")
        if np.any(self.lb > self.ub):
            j = int(np.argmax(self.lb > self.ub))
            raise LpError(f"variable {j}: lower bound {self.lb[j]} exceeds upper {self.ub[j]}")
        if np.any(self.lb == np.inf) or np.any(self.ub == -np.inf):
            raise LpError("lower bound +inf or upper bound -inf")
        if self.row_tags is not None and len(self.row_tags) != m:
            raise LpError("row_tags length mismatch")
        if self.col_tags is not None and len(self.col_tags) != n:
            raise LpError("col_tags length mismatch")

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]

    @property
    def num_cols(self) -> int:
        return self.A.shape[1]

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.obj_offset

    def row_activity(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x

    def primal_residual(self, x: np.ndarray) -> float:
        """Largest row or bound violation at ``x`` (absolute units)."""
        act = self.A @ x
        s = np.asarray(self.senses)
        viol = np.zeros(self.num_rows)
        viol = np.where(s == LE, np.maximum(act - self.rhs, 0.0), viol)
        viol = np.where(s == GE, np.maximum(self.rhs - act, 0.0), viol)
        viol = np.where(s == EQ, np.abs(act - self.rhs), viol)
        bviol = np.maximum(np.maximum(self.lb - x, x - self.ub), 0.0)
        worst = 0.0
        if viol.size:
            worst = float(viol.max())
        if bviol.size:
            worst = max(worst, float(bviol.max()))
        return worst

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "LinearProgram":
        return LinearProgram(self.c, self.A, self.senses, self.rhs, lb, ub,
                             self.maximize, self.obj_offset, self.row_tags, self.col_tags)

    def fingerprint(self) -> bytes:
        """Canonical byte string of the numeric content (for determinism checks)."""
        A = self.A.tocsr()
        parts = [self.c, A.data, A.indices.astype(np.int64), A.indptr.astype(np.int64),
                 self.rhs, self.lb, self.ub]
        return (b"".join(np.ascontiguousarray(p, dtype=np.float64).tobytes() for p in parts)
                + "".join(self.senses).encode() + bytes([self.maximize]))


@dataclass(frozen=True, eq=False)
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float = math.nan
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    dual_objective: float = math.nan
    iterations: int = 0
    ray: np.ndarray | None = None
    basis: np.ndarray | None = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class LpBuilder:
    """Incremental construction of a :class:`LinearProgram` from tagged rows/columns."""

    def __init__(self):
        self._c: list[float] = []
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._col_tags: list[Hashable] = []
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._vals: list[float] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self._row_tags: list[Hashable] = []
        self.obj_offset = 0.0

    @classmethod
    def from_lp(cls, lp: LinearProgram) -> "LpBuilder":
        b = cls()
        b._c = list(lp.c)
        b._lb = list(lp.lb)
        b._ub = list(lp.ub)
        b._col_tags = list(lp.col_tags) if lp.col_tags is not None else [None] * lp.num_cols
        coo = lp.A.tocoo()
        b._rows, b._cols, b._vals = list(coo.row), list(coo.col), list(coo.data)
        b._senses = list(lp.senses)
        b._rhs = list(lp.rhs)
        b._row_tags = list(lp.row_tags) if lp.row_tags is not None else [None] * lp.num_rows
        b.obj_offset = lp.obj_offset
        return b

    @property
    def num_cols(self) -> int:
        return len(self._c)

    @property
    def num_rows(self) -> int:
        return len(self._rhs)

    def add_var(self, lb: float = 0.0, ub: float = math.inf, cost: float = 0.0,
                tag: Hashable = None) -> int:
        self._c.append(float(cost))
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._col_tags.append(tag)
        return len(self._c) - 1

    def add_row(self, cols: Sequence[int], coefs: Sequence[float], sense: str, rhs: float,
                tag: Hashable = None) -> int:
        if sense not in _SENSES:
            raise LpError(f"unknown relation {sense!r}")
        r = len(self._rhs)
        for j, a in zip(cols, coefs):
            if a != 0.0:
                self._rows.append(r)
                self._cols.append(int(j))
                self._vals.append(float(a))
        self._senses.append(sense)
        self._rhs.append(float(rhs))
        self._row_tags.append(tag)
        return r

    def set_cost(self, j: int, cost: float) -> None:
        self._c[j] = float(cost)

    def set_bounds(self, j: int, lb: float, ub: float) -> None:
        self._lb[j] = float(lb)
        self._ub[j] = float(ub)

    def build(self, maximize: bool = False) -> LinearProgram:
        m, n = len(self._rhs), len(self._c)
        A = sp.csr_matrix((np.asarray(self._vals, dtype=float),
                           (np.asarray(self._rows, dtype=np.int64),
                            np.asarray(self._cols, dtype=np.int64))), shape=(m, n))
        A.sum_duplicates()
        return LinearProgram(
            c=np.asarray(self._c, dtype=float), A=A, senses=tuple(self._senses),
            rhs=np.asarray(self._rhs, dtype=float), lb=np.asarray(self._lb, dtype=float),
            ub=np.asarray(self._ub, dtype=float), maximize=maximize,
            obj_offset=self.obj_offset, row_tags=tuple(self._row_tags),
            col_tags=tuple(self._col_tags))


# ---------------------------------------------------------------------------
# dual bookkeeping


def _slack_bounds(senses: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """Bounds of s in ``a x + s = b`` encoding each row relation."""
    s = np.asarray(senses)
    lo = np.where(s == LE, 0.0, np.where(s == GE, -np.inf, 0.0))
    hi = np.where(s == LE, np.inf, np.where(s == GE, 0.0, 0.0))
    return lo, hi


def _box_min(d: np.ndarray, lo: np.ndarray, hi: np.ndarray, tol: float) -> float:
    """sum_j min over [lo_j, hi_j] of d_j * v; -inf if unbounded beyond ``tol``."""
    d = np.where(np.abs(d) <= tol, 0.0, d)
    pos, neg = d > 0, d < 0
    if np.any(pos & ~np.isfinite(lo)) or np.any(neg & ~np.isfinite(hi)):
        return -math.inf
    return float(np.sum(d[pos] * lo[pos]) + np.sum(d[neg] * hi[neg]))


def dual_objective(lp: LinearProgram, y: np.ndarray, tol: float = DUAL_TOL) -> float:
    """Lagrangian dual value of ``lp`` at multipliers ``y`` (same convention as duals)."""
    sign = -1.0 if lp.maximize else 1.0
    ym = sign * y                       # multipliers of the minimization form
    cm = sign * lp.c
    d = cm - lp.A.T @ ym
    slo, shi = _slack_bounds(lp.senses)
    val = float(lp.rhs @ ym) + _box_min(d, lp.lb, lp.ub, tol) + _box_min(-ym, slo, shi, tol)
    return sign * val + lp.obj_offset


def complementary_slackness(lp: LinearProgram, x: np.ndarray, y: np.ndarray) -> float:
    """Largest |multiplier| x distance-to-its-bound product, rows and columns."""
    sign = -1.0 if lp.maximize else 1.0
    ym = sign * y
    d = sign * lp.c - lp.A.T @ ym
    d = np.where(np.abs(d) <= DUAL_TOL, 0.0, d)
    gap_lo = np.where(np.isfinite(lp.lb), x - lp.lb, np.inf)
    gap_hi = np.where(np.isfinite(lp.ub), lp.ub - x, np.inf)
    col = np.where(d > 0, d * np.minimum(gap_lo, 1e300), np.where(d < 0, -d * np.minimum(gap_hi, 1e300), 0.0))
    slack = lp.rhs - lp.A @ x
    row = np.abs(ym * slack)
    row = np.where(np.asarray(lp.senses) == EQ, 0.0, row)
    worst = 0.0
    if col.size:
        worst = float(np.max(col))
    if row.size:
        worst = max(worst, float(np.max(row)))
    return worst


def farkas_margin(lp: LinearProgram, ray: np.ndarray, tol: float = FEAS_TOL) -> float:
    """Infeasibility proof strength of ``ray``.

    For multipliers ``y`` (``>=`` rows non-negative, ``<=`` rows non-positive)
    every feasible point satisfies ``y.b = y.A x + y.s``.  The returned value is
    ``y.b - max_{box} (y.A x + y.s)``; a positive number proves infeasibility.
    Components of ``A^T y`` within ``tol`` of zero are treated as zero.
    """
    y = np.asarray(ray, dtype=float)
    g = lp.A.T @ y
    slo, shi = _slack_bounds(lp.senses)
    return float(lp.rhs @ y) + _box_min(-g, lp.lb, lp.ub, tol) + _box_min(-y, slo, shi, tol)


def extract_duals(sol: LpSolution, row_tags: Sequence[Hashable]) -> dict[Hashable, float]:
    """Map semantic row tags to dual multipliers of an optimal solve."""
    if sol.status is not LpStatus.OPTIMAL or sol.duals is None:
        raise LpError(f"duals need an optimal solution, got {sol.status.value}")
    if len(row_tags) != len(sol.duals):
        raise LpError(f"{len(row_tags)} tags for {len(sol.duals)} rows")
    return {tag: float(v) for tag, v in zip(row_tags, sol.duals)}


# ---------------------------------------------------------------------------
# solving


def solve_lp(lp: LinearProgram, backend: str = "native", **options) -> LpSolution:
    """Solve ``lp``.

    ``backend="native"`` runs the bounded-variable revised simplex in
    :mod:`firegrid.simplex`; ``backend="highs"`` delegates to HiGHS through
    :func:`scipy.optimize.linprog`.  Both return duals in the convention of
    this module, and both attach a Farkas ray to infeasible results.
    """
    if backend == "native":
        from .simplex import simplex_solve
        sol = simplex_solve(lp, **options)
    elif backend == "highs":
        sol = _solve_highs(lp)
    else:
        raise LpError(f"unknown LP backend {backend!r}")
    if sol.status is LpStatus.INFEASIBLE and sol.ray is None:
        ray = farkas_ray(lp, backend)
        sol = LpSolution(status=sol.status, iterations=sol.iterations, ray=ray)
    return sol


def _finish(lp: LinearProgram, x: np.ndarray, y: np.ndarray, iterations: int,
            basis=None) -> LpSolution:
    sign = -1.0 if lp.maximize else 1.0
    rc = lp.c - lp.A.T @ y
    return LpSolution(
        status=LpStatus.OPTIMAL, x=x, objective=lp.objective_value(x), duals=y,
        reduced_costs=rc, dual_objective=dual_objective(lp, y), iterations=iterations,
        basis=basis)


def _solve_highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog

    sign = -1.0 if lp.maximize else 1.0
    s = np.asarray(lp.senses)
    A = lp.A.tocsr()
    le, ge, eq = np.flatnonzero(s == LE), np.flatnonzero(s == GE), np.flatnonzero(s == EQ)
    ub_rows = np.concatenate([le, ge])
    A_ub = sp.vstack([A[le], -A[ge]]).tocsr() if ub_rows.size else None
    b_ub = np.concatenate([lp.rhs[le], -lp.rhs[ge]]) if ub_rows.size else None
    A_eq = A[eq] if eq.size else None
    b_eq = lp.rhs[eq] if eq.size else None
    bounds = np.column_stack([np.where(np.isfinite(lp.lb), lp.lb, -np.inf),
                              np.where(np.isfinite(lp.ub), lp.ub, np.inf)])
    res = linprog(sign * lp.c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    iters = int(getattr(res, "nit", 0) or 0)
    if res.status == 2:
        return LpSolution(status=LpStatus.INFEASIBLE, iterations=iters)
    if res.status == 3:
        return LpSolution(status=LpStatus.UNBOUNDED, iterations=iters)
    if res.status == 1:
        return LpSolution(status=LpStatus.ITERATION_LIMIT, iterations=iters)
    if res.status != 0:
        return LpSolution(status=LpStatus.NUMERICAL_FAILURE, iterations=iters)
    y = np.zeros(lp.num_rows)
    if ub_rows.size:
        mu = res.ineqlin.marginals
        y[le] = mu[: le.size]
        y[ge] = -mu[le.size:]
    if eq.size:
        y[eq] = res.eqlin.marginals
    return _finish(lp, np.asarray(res.x, dtype=float), sign * y, iters)


def farkas_ray(lp: LinearProgram, backend: str = "native") -> np.ndarray | None:
    """Infeasibility certificate from the duals of the elastic (phase-one) LP.

    The elastic LP minimizes total row violation; its optimal multipliers are
    bounded by one in magnitude and satisfy :func:`farkas_margin` > 0 exactly
    when ``lp`` is infeasible.
    """
    b = LpBuilder()
    n = lp.num_cols
    for j in range(n):
        b.add_var(lp.lb[j], lp.ub[j], 0.0)
    A = lp.A.tocsr()
    for r in range(lp.num_rows):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        cols, vals = list(A.indices[lo:hi]), list(A.data[lo:hi])
        sense = lp.senses[r]
        if sense in (GE, EQ):
            cols.append(b.add_var(0.0, math.inf, 1.0))
            vals.append(1.0)
        if sense in (LE, EQ):
            cols.append(b.add_var(0.0, math.inf, 1.0))
            vals.append(-1.0)
        b.add_row(cols, vals, sense, lp.rhs[r])
    elastic = b.build()
    sol = solve_lp(elastic, backend=backend)
    if not sol.optimal or sol.objective <= FEAS_TOL:
        return None
    return sol.duals


# ---------------------------------------------------------------------------
# text interchange


def _fmt(v: float) -> str:
    return repr(float(v))


def write_lp_format(lp: LinearProgram, path, binaries: Sequence[int] = ()) -> None:
    """Dump ``lp`` in CPLEX LP text format for cross-checking with external solvers."""
    names = [f"x{j}" for j in range(lp.num_cols)]

    def expr(cols, vals):
        if len(cols) == 0:
            return "0 x0"
        out = []
        for j, v in zip(cols, vals):
            out.append(f"{'-' if v < 0 else '+'} {_fmt(abs(v))} {names[j]}")
        return " ".join(out)

    lines = ["\\ generated by firegrid", "Maximize" if lp.maximize else "Minimize"]
    nz = np.flatnonzero(lp.c)
    lines.append(" obj: " + expr(nz, lp.c[nz]))
    lines.append("Subject To")
    A = lp.A.tocsr()
    op = {LE: "<=", GE: ">=", EQ: "="}
    for r in range(lp.num_rows):
        lo, hi = A.indptr[r], A.indptr[r + 1]
        lines.append(f" r{r}: {expr(A.indices[lo:hi], A.data[lo:hi])} {op[lp.senses[r]]} {_fmt(lp.rhs[r])}")
    lines.append("Bounds")
    for j in range(lp.num_cols):
        lo, hi = lp.lb[j], lp.ub[j]
        if not np.isfinite(lo) and not np.isfinite(hi):
            lines.append(f" {names[j]} free")
        else:
            lo_s = "-inf" if not np.isfinite(lo) else _fmt(lo)
            hi_s = "+inf" if not np.isfinite(hi) else _fmt(hi)
            lines.append(f" {lo_s} <= {names[j]} <= {hi_s}")
    if len(binaries):
        lines.append("Binary")
        lines.append(" " + " ".join(names[j] for j in binaries))
    lines.append("End")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
