"""Dense bounded-variable revised simplex.

Each row gets a slack so the working system is ``[A | I] z = b`` with box
bounds on every column (slack bounds encode the row relation).  Rows whose
slack cannot absorb the starting residual receive an artificial column;
phase one drives the artificials to zero, phase two prices the real costs.

Pricing is Dantzig's rule with a Harris two-pass ratio test; after
``stall_threshold`` consecutive degenerate pivots the method switches to
Bland's rule until the objective moves again.  The basis inverse is kept
explicitly and rebuilt from scratch every ``refactor_every`` pivots.
"""

from __future__ import annotations

import math

import numpy as np

from .lp import EQ, GE, LE, LinearProgram, LpSolution, LpStatus, _finish, farkas_margin

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
OPT_TOL = 1e-9


def _pow2(v: np.ndarray) -> np.ndarray:
    return np.exp2(np.round(np.log2(v)))


def _equilibrate(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row then column max-abs scale factors, rounded to powers of two."""
    absA = np.abs(A)
    rmax = absA.max(axis=1) if A.shape[1] else np.zeros(A.shape[0])
    R = np.where(rmax > 0, 1.0 / np.where(rmax > 0, rmax, 1.0), 1.0)
    R = _pow2(R)
    cmax = (absA * R[:, None]).max(axis=0) if A.shape[0] else np.zeros(A.shape[1])
    C = np.where(cmax > 0, 1.0 / np.where(cmax > 0, cmax, 1.0), 1.0)
    C = _pow2(C)
    return R, C


class _Tableau:
    """Working state of one simplex run (scaled units)."""

    def __init__(self, M, b, lo, hi, x, basis, refactor_every, stall_threshold):
        self.M = M
        self.b = b
        self.lo = lo
        self.hi = hi
        self.x = x
        self.basis = basis
        self.m = M.shape[0]
        self.is_basic = np.zeros(M.shape[1], dtype=bool)
        self.is_basic[basis] = True
        self.refactor_every = refactor_every
        self.stall_threshold = stall_threshold
        self.iterations = 0
        self.ray = None
        self.refactor()

    def refactor(self) -> bool:
        B = self.M[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B) if self.m else np.zeros((0, 0))
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(self.Binv)):
            return False
        nonbasic = ~self.is_basic
        rhs = self.b - self.M[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.Binv @ rhs
        self.since_refactor = 0
        return True

    def run(self, cost: np.ndarray, max_iter: int) -> LpStatus:
        opt_tol = OPT_TOL * max(1.0, float(np.max(np.abs(cost))) if cost.size else 1.0)
        bland = False
        degenerate = 0
        failures = 0
        while True:
            if self.iterations >= max_iter:
                return LpStatus.ITERATION_LIMIT
            if self.since_refactor >= self.refactor_every:
                if not self.refactor():
                    return LpStatus.NUMERICAL_FAILURE
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.M
            nb = ~self.is_basic
            can_inc = nb & (self.x < self.hi)
            can_dec = nb & (self.x > self.lo)
            inc = can_inc & (d < -opt_tol)
            dec = can_dec & (d > opt_tol)
            cand = inc | dec
            if not cand.any():
                if self.since_refactor == 0:
                    return LpStatus.OPTIMAL
                if not self.refactor():
                    return LpStatus.NUMERICAL_FAILURE
                continue
            if bland:
                q = int(np.flatnonzero(cand)[0])
            else:
                score = np.where(cand, np.abs(d), -1.0)
                q = int(np.argmax(score))
            sigma = 1.0 if inc[q] else -1.0
            w = self.Binv @ self.M[:, q]
            delta = -sigma * w
            xb = self.x[self.basis]
            lob, hib = self.lo[self.basis], self.hi[self.basis]
            down = (delta < -PIVOT_TOL) & np.isfinite(lob)
            up = (delta > PIVOT_TOL) & np.isfinite(hib)
            ratio = np.full(self.m, np.inf)
            relaxed = np.full(self.m, np.inf)
            ratio[down] = (xb[down] - lob[down]) / -delta[down]
            relaxed[down] = (xb[down] - lob[down] + FEAS_TOL) / -delta[down]
            ratio[up] = (hib[up] - xb[up]) / delta[up]
            relaxed[up] = (hib[up] - xb[up] + FEAS_TOL) / delta[up]
            ratio = np.maximum(ratio, 0.0)
            t_flip = self.hi[q] - self.lo[q]
            r = -1
            t = math.inf
            if np.isfinite(relaxed).any():
                if bland:
                    tmin = ratio.min()
                    ties = np.flatnonzero(ratio <= tmin + 1e-12)
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    # drifted basics can push the relaxed bound below every clipped ratio
                    tmax = max(relaxed.min(), ratio.min())
                    ok = np.flatnonzero(ratio <= tmax)
                    r = int(ok[np.argmax(np.abs(delta[ok]))])
                t = float(ratio[r])
            if t_flip <= t:
                if not np.isfinite(t_flip):
                    ray = np.zeros_like(self.x)
                    ray[q] = sigma
                    ray[self.basis] = delta
                    self.ray = ray
                    return LpStatus.UNBOUNDED
                self.x[q] = self.hi[q] if sigma > 0 else self.lo[q]
                self.x[self.basis] = xb + delta * t_flip
                self.iterations += 1
                degenerate = 0
                bland = False
                continue
            piv = w[r]
            if abs(piv) < PIVOT_TOL:
                failures += 1
                if failures > 3 or not self.refactor():
                    return LpStatus.NUMERICAL_FAILURE
                continue
            leaving = self.basis[r]
            self.x[self.basis] = xb + delta * t
            self.x[q] += sigma * t
            self.x[leaving] = self.lo[leaving] if delta[r] < 0 else self.hi[leaving]
            self.basis[r] = q
            self.is_basic[q] = True
            self.is_basic[leaving] = False
            row = self.Binv[r] / piv
            self.Binv -= np.outer(w, row)
            self.Binv[r] = row
            self.since_refactor += 1
            self.iterations += 1
            if t <= 1e-12:
                degenerate += 1
                if degenerate >= self.stall_threshold:
                    bland = True
            else:
                degenerate = 0
                bland = False


def simplex_solve(lp: LinearProgram, max_iter: int | None = None, refactor_every: int = 100,
                  stall_threshold: int = 50, scale: bool = True) -> LpSolution:
    m, n = lp.num_rows, lp.num_cols
    sign = -1.0 if lp.maximize else 1.0
    A = lp.A.toarray()
    if scale and m and n:
        R, C = _equilibrate(A)
    else:
        R, C = np.ones(m), np.ones(n)
    As = A * R[:, None] * C[None, :]
    bs = lp.rhs * R
    cs = sign * lp.c * C
    lbs, ubs = lp.lb / C, lp.ub / C

    senses = np.asarray(lp.senses)
    slo = np.where(senses == GE, -np.inf, 0.0)
    shi = np.where(senses == LE, np.inf, 0.0)

    xs = np.where(np.isfinite(lbs), lbs, np.where(np.isfinite(ubs), ubs, 0.0))
    resid = bs - As @ xs
    s_val = np.clip(resid, slo, shi)
    need_art = np.abs(resid - s_val) > 0.0
    art_rows = np.flatnonzero(need_art)
    k = art_rows.size

    M = np.zeros((m, n + m + k))
    M[:, :n] = As
    M[:, n:n + m] = np.eye(m)
    art_sign = np.sign(resid[art_rows] - s_val[art_rows])
    M[art_rows, n + m + np.arange(k)] = art_sign
    lo = np.concatenate([lbs, slo, np.zeros(k)])
    hi = np.concatenate([ubs, shi, np.full(k, np.inf)])
    x = np.concatenate([xs, s_val, np.abs(resid[art_rows] - s_val[art_rows])])
    basis = np.arange(n, n + m)
    basis[art_rows] = n + m + np.arange(k)

    if max_iter is None:
        max_iter = 50 * (m + n) + 1000
    tab = _Tableau(M, bs, lo, hi, x, basis, refactor_every, stall_threshold)

    if k:
        c1 = np.zeros(n + m + k)
        c1[n + m:] = 1.0
        status = tab.run(c1, max_iter)
        if status is not LpStatus.OPTIMAL:
            return LpSolution(status=status, iterations=tab.iterations)
        infeas = float(c1 @ tab.x)
        # row scaling can hide a real violation, so also test the unscaled rows
        x1 = np.clip(tab.x[:n] * C, lp.lb, lp.ub)
        bscale = 1.0 + float(np.max(np.abs(lp.rhs)))
        if infeas > FEAS_TOL * max(1.0, float(np.max(np.abs(bs)))) or \
                lp.primal_residual(x1) > 1e-7 * bscale:
            y1 = c1[tab.basis] @ tab.Binv
            ray = y1 * R
            scale_ray = np.max(np.abs(ray)) if ray.size else 0.0
            if scale_ray > 0:
                ray = ray / scale_ray
            if farkas_margin(lp, ray) <= 0:
                ray = None
            return LpSolution(status=LpStatus.INFEASIBLE, iterations=tab.iterations, ray=ray)
        tab.hi[n + m:] = 0.0
        tab.x[n + m:] = np.clip(tab.x[n + m:], 0.0, 0.0)
        tab.refactor()

    c2 = np.concatenate([cs, np.zeros(m + k)])
    for attempt in range(3):
        status = tab.run(c2, max_iter)
        if status is LpStatus.UNBOUNDED:
            ray = tab.ray[:n] * C
            return LpSolution(status=status, iterations=tab.iterations, ray=ray)
        if status is not LpStatus.OPTIMAL:
            return LpSolution(status=status, iterations=tab.iterations)
        xstruct = tab.x[:n] * C
        # basic values may sit a hair outside their box after Harris steps
        xstruct = np.clip(xstruct, lp.lb, lp.ub)
        resid = lp.primal_residual(xstruct)
        bscale = 1.0 + float(np.max(np.abs(lp.rhs))) if m else 1.0
        if resid <= 1e-7 * bscale:
            y = sign * (c2[tab.basis] @ tab.Binv) * R
            return _finish(lp, xstruct, y, tab.iterations, basis=tab.basis.copy())
        if not tab.refactor():
            break
    return LpSolution(status=LpStatus.NUMERICAL_FAILURE, iterations=tab.iterations)
