import itertools
import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from firegrid.lp import GE, LE, LinearProgram, LpBuilder, solve_lp
from firegrid.milp import (MilpError, MilpStatus, MixedIntegerProgram, propagate_bounds,
                           solve_milp)


def random_mip(seed: int, max_binaries: int = 12):
    rng = np.random.default_rng(seed)
    nb = int(rng.integers(1, max_binaries + 1))
    nc = int(rng.integers(0, 4))
    n, m = nb + nc, int(rng.integers(1, 7))
    A = rng.normal(size=(m, n))
    senses = tuple(rng.choice([LE, GE], size=m))
    x0 = np.concatenate([rng.integers(0, 2, nb), rng.random(nc)])
    act = A @ x0
    rhs = np.where(np.array(senses) == LE, act + rng.random(m), act - rng.random(m))
    lb = np.zeros(n)
    ub = np.concatenate([np.ones(nb), np.full(nc, 3.0)])
    lp = LinearProgram(rng.normal(size=n), sp.csr_matrix(A), senses, rhs, lb, ub,
                       maximize=bool(seed % 2))
    return MixedIntegerProgram(lp, tuple(range(nb)))


def enumerate_mip(mip: MixedIntegerProgram) -> float:
    """Best objective over all binary assignments, solving the residual LP for each."""
    lp = mip.lp
    nb = len(mip.binaries)
    best = math.nan
    for bits in itertools.product((0, 1), repeat=nb):
        lo, hi = lp.lb.copy(), lp.ub.copy()
        lo[list(mip.binaries)] = bits
        hi[list(mip.binaries)] = bits
        r = solve_lp(lp.with_bounds(lo, hi), backend="highs")
        if r.optimal and (math.isnan(best) or (r.objective > best if lp.maximize else r.objective < best)):
            best = r.objective
    return best


def test_knapsack():
    b = LpBuilder()
    x, y = b.add_var(0, 1, 3.0), b.add_var(0, 1, 2.0)
    b.add_row([x, y], [1, 1], LE, 1.0)
    sol = solve_milp(MixedIntegerProgram(b.build(maximize=True), (x, y)))
    assert sol.status is MilpStatus.OPTIMAL
    assert sol.objective == 3.0
    assert sol.x[x] == 1.0 and sol.x[y] == 0.0


def test_integral_root_needs_no_branching():
    b = LpBuilder()
    x, y = b.add_var(0, 1, -1.0), b.add_var(0, 1, -1.0)
    b.add_row([x, y], [1, 1], LE, 2.0)
    sol = solve_milp(MixedIntegerProgram(b.build(), (x, y)))
    assert sol.nodes == 1
    assert sol.objective == pytest.approx(-2.0)


def test_node_limit_is_not_reported_optimal():
    mip = random_mip(3, 12)
    sol = solve_milp(mip, node_limit=1, propagate=False)
    assert sol.status in (MilpStatus.NODE_LIMIT, MilpStatus.OPTIMAL)
    if sol.status is MilpStatus.NODE_LIMIT:
        assert not sol.gap_proven


def test_node_limit_flags_unproven_gap():
    # a pure-integer problem whose root relaxation is fractional
    b = LpBuilder()
    xs = [b.add_var(0, 1, -(k + 1.0)) for k in range(6)]
    b.add_row(xs, [2.0 + k for k in range(6)], LE, 7.5)
    sol = solve_milp(MixedIntegerProgram(b.build(), tuple(xs)), node_limit=1, propagate=False)
    assert sol.status is MilpStatus.NODE_LIMIT
    assert not sol.gap_proven


def test_infeasible():
    b = LpBuilder()
    x = b.add_var(0, 1)
    b.add_row([x], [1.0], GE, 0.3)
    b.add_row([x], [1.0], LE, 0.7)
    assert solve_milp(MixedIntegerProgram(b.build(), (x,))).status is MilpStatus.INFEASIBLE


def test_binary_bounds_checked():
    b = LpBuilder()
    x = b.add_var(0, 2)
    with pytest.raises(MilpError):
        MixedIntegerProgram(b.build(), (x,))
    with pytest.raises(MilpError):
        solve_milp(MixedIntegerProgram(b.build(), ()), gap=1.5)


def test_propagation_collapses_big_m_rows():
    # f <= 100 I  and  f >= -100 I : fixing I = 0 forces f = 0
    b = LpBuilder()
    f = b.add_var(-100, 100)
    i = b.add_var(0, 1)
    b.add_row([f, i], [1, -100], LE, 0)
    b.add_row([f, i], [1, 100], GE, 0)
    lp = b.build()
    lo, hi = lp.lb.copy(), lp.ub.copy()
    hi[i] = 0.0
    assert propagate_bounds(lp, lo, hi, np.array([i]))
    assert lo[f] == pytest.approx(0.0) and hi[f] == pytest.approx(0.0)


@pytest.mark.parametrize("seed", range(30))
def test_matches_enumeration(seed):
    mip = random_mip(1000 + seed, 10)
    best = enumerate_mip(mip)
    sol = solve_milp(mip)
    if math.isnan(best):
        assert sol.status is MilpStatus.INFEASIBLE
        return
    assert sol.status is MilpStatus.OPTIMAL
    assert sol.objective == pytest.approx(best, rel=1e-6, abs=1e-6)
    # incumbent exactly integral and feasible
    xb = sol.x[list(mip.binaries)]
    assert np.all((xb == 0.0) | (xb == 1.0))
    assert mip.lp.primal_residual(sol.x) <= 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_bound_history_monotone(seed):
    mip = random_mip(seed, 8)
    sol = solve_milp(mip)
    h = np.array(sol.bound_history)
    if h.size > 1:
        step = np.diff(h) if not mip.maximize else -np.diff(h)
        assert np.all(step >= -1e-9 * (1 + np.abs(h[1:])))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_highs_backend_agrees(seed):
    mip = random_mip(seed, 8)
    a, h = solve_milp(mip), solve_milp(mip, backend="highs")
    assert a.status is h.status
    if a.status is MilpStatus.OPTIMAL:
        assert a.objective == pytest.approx(h.objective, rel=1e-6, abs=1e-6)


def test_deterministic():
    mip = random_mip(77)
    s1, s2 = solve_milp(mip), solve_milp(mip)
    assert s1.x.tobytes() == s2.x.tobytes()
    assert s1.nodes == s2.nodes
    assert s1.bound_history == s2.bound_history
