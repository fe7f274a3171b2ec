import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from firegrid.ccg import brute_force_worst_case
from firegrid.dispatch import solve_recourse
from firegrid.experiments import random_toy_case
from firegrid.grid import (Bus, DemandPoint, FireScoreProfile, Generator, Line, NetworkCase,
                           RobustParams, SolarUnit)
from firegrid.realization import UncertaintyRealization
from firegrid.subproblem import build_dual_subproblem, solve_subproblem


def one_bus_case(budget=1) -> NetworkCase:
    return NetworkCase(
        buses=(Bus(1, True),), lines=(),
        generators=(Generator(1, 1, 0.0, 100.0, ((100.0, 10.0),)),),
        solar=(), demands=(DemandPoint(1, (50.0,), (20.0,)),),
        fire_scores=FireScoreProfile.zeros([], 1), horizon=1,
        params=RobustParams(budget=budget, solver="native"))


def congested_case(budget=2) -> NetworkCase:
    # cheap generator behind a tight line, expensive local unit and solar at the load bus
    return NetworkCase(
        buses=(Bus(1, True), Bus(2)), lines=(Line(1, 1, 2, 0.1, 40.0),),
        generators=(Generator(1, 1, 0.0, 200.0, ((200.0, 10.0),)),
                    Generator(2, 2, 0.0, 30.0, ((30.0, 80.0),))),
        solar=(SolarUnit(1, 2, (20.0, 20.0), (10.0, 10.0)),),
        demands=(DemandPoint(2, (70.0, 70.0), (15.0, 15.0)),),
        fire_scores=FireScoreProfile.zeros([1], 2), horizon=2,
        params=RobustParams(budget=budget, solver="native"))


def test_one_bus_worst_case_adds_200():
    case = one_bus_case()
    real, cost, dual = solve_subproblem(build_dual_subproblem(case, np.zeros((0, 1))))
    assert cost == pytest.approx(700.0)
    assert cost - 500.0 == pytest.approx(200.0)
    assert real.u_demand.tolist() == [[1]]
    assert dual.objective == pytest.approx(700.0)


def test_zero_budget_returns_nominal():
    case = congested_case(budget=0)
    status = np.ones((1, 2))
    real, cost, dual = solve_subproblem(build_dual_subproblem(case, status))
    assert real == UncertaintyRealization.nominal(case)
    nominal, _, _ = solve_recourse(case, status, real.demand, real.solar)
    assert cost == pytest.approx(nominal.objective, rel=1e-9)
    assert dual.objective == pytest.approx(nominal.objective, rel=1e-6)


def test_congested_worst_case_prices_the_local_unit():
    case = congested_case(budget=1)
    real, cost, _ = solve_subproblem(build_dual_subproblem(case, np.ones((1, 2))))
    # nominal hour: 40 imported at 10, 20 solar, 10 local at 80 = 1200
    # one deviation (15 MW demand up or 10 MW solar down) adds 15*80 or 10*80
    assert cost == pytest.approx(2 * 1200 + 15 * 80)
    assert real.budget_used == 1 and real.u_demand.sum() == 1


def test_linearization_exact_and_budget_respected():
    case = congested_case(budget=2)
    _, _, dual = solve_subproblem(build_dual_subproblem(case, np.ones((1, 2))))
    assert dual.linearization_error <= 1e-9
    assert dual.z.sum() <= 2
    assert np.all((dual.z == 0) | (dual.z == 1))
    assert dual.constraint_residual <= 1e-6
    assert all(v >= -1e-9 for v in dual.family("lambda2").values())


@pytest.mark.parametrize("seed", range(15))
def test_matches_brute_force(seed):
    case = random_toy_case(seed)
    rng = np.random.default_rng(seed)
    status = rng.integers(0, 2, (len(case.lines), case.horizon))
    real, cost, dual = solve_subproblem(build_dual_subproblem(case, status))
    oracle_real, oracle = brute_force_worst_case(case, status)
    assert cost == pytest.approx(oracle, rel=1e-6, abs=1e-6)
    assert real.budget_used <= case.params.budget


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_primal_dual_consistency(seed):
    case = random_toy_case(seed)
    status = np.ones((len(case.lines), case.horizon))
    real, cost, dual = solve_subproblem(build_dual_subproblem(case, status))
    lp_sol, _, _ = solve_recourse(case, status, real.demand, real.solar)
    assert cost == pytest.approx(lp_sol.objective, rel=1e-6)
    assert dual.objective == pytest.approx(cost, rel=1e-6, abs=1e-6)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000))
def test_worst_cost_monotone_in_budget(seed):
    case = random_toy_case(seed)
    status = np.ones((len(case.lines), case.horizon))
    costs = [solve_subproblem(build_dual_subproblem(case, status, budget=E))[1] for E in range(4)]
    assert all(b >= a - 1e-6 * max(1.0, abs(a)) for a, b in zip(costs, costs[1:]))


def test_highs_backend_agrees():
    case = congested_case(budget=2)
    sub = build_dual_subproblem(case, np.ones((1, 2)))
    assert solve_subproblem(sub, backend="highs")[1] == pytest.approx(solve_subproblem(sub)[1], rel=1e-6)
