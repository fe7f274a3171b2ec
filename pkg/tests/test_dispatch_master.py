import math

import numpy as np
import pytest

from firegrid.dispatch import nominal_profiles, solve_recourse
from firegrid.experiments import generate_synthetic_scores
from firegrid.grid import (Bus, DemandPoint, FireScoreProfile, Generator, Line, NetworkCase,
                           RiskIntake, RobustParams, build_6bus_case)
from firegrid.lp import LpStatus
from firegrid.master import (DuplicateScenarioError, MasterError, append_scenario, build_master,
                             first_stage_from_status, most_energized_plan, solve_master)
from firegrid.realization import RealizationError, UncertaintyRealization


def scored(case, seed):
    return case.with_scores(generate_synthetic_scores(case, seed))


def one_bus_case(budget=1, deviation=20.0) -> NetworkCase:
    return NetworkCase(
        buses=(Bus(1, True),), lines=(),
        generators=(Generator(1, 1, 0.0, 100.0, ((100.0, 10.0),)),),
        solar=(), demands=(DemandPoint(1, (50.0,), (deviation,)),),
        fire_scores=FireScoreProfile.zeros([], 1), horizon=1,
        params=RobustParams(budget=budget, solver="native"))


def two_bus_case(score=0.5, tol=1.0, horizon=2) -> NetworkCase:
    return NetworkCase(
        buses=(Bus(1, True), Bus(2)), lines=(Line(1, 1, 2, 0.1, 100.0),),
        generators=(Generator(1, 1, 0.0, 200.0, ((200.0, 10.0),)),),
        solar=(), demands=(DemandPoint(2, (50.0,) * horizon, (5.0,) * horizon),),
        fire_scores=FireScoreProfile.from_array([1], np.full((1, horizon), score)), horizon=horizon,
        params=RobustParams(budget=1, risk_tolerance=tol, solver="native"))


def test_one_bus_recourse_cost():
    case = one_bus_case()
    dem, sol = nominal_profiles(case)
    lp_sol, blk, lp = solve_recourse(case, np.zeros((0, 1)), dem, sol)
    assert lp_sol.objective == pytest.approx(500.0)
    assert blk.cost(lp_sol.x) == pytest.approx(500.0)


def test_one_bus_master_with_no_lines():
    case = one_bus_case()
    fs = solve_master(build_master(case, [UncertaintyRealization.nominal(case)]))
    assert fs.line_status.shape == (0, 1)
    assert fs.lower_bound == pytest.approx(500.0)
    assert fs.dispatch[0, 0] == pytest.approx(50.0)


def test_all_lines_off_sheds_remote_load():
    case = two_bus_case()
    dem, sol = nominal_profiles(case)
    lp_sol, blk, _ = solve_recourse(case, np.zeros((1, 2)), dem, sol)
    K = case.params.shed_penalty
    assert lp_sol.objective == pytest.approx(K * 50.0 * 2)
    assert np.allclose(lp_sol.x[blk.served], 0.0)


def test_line_on_serves_load():
    case = two_bus_case()
    dem, sol = nominal_profiles(case)
    lp_sol, blk, _ = solve_recourse(case, np.ones((1, 2)), dem, sol)
    assert lp_sol.objective == pytest.approx(10.0 * 100.0)
    assert lp_sol.x[blk.flow] == pytest.approx(np.full((1, 2), 50.0))


def test_risk_rows_force_lines_off():
    # scores 0.5 with tolerance 0.4 leave no room for the line
    case = two_bus_case(score=0.5, tol=0.4)
    fs = solve_master(build_master(case, [UncertaintyRealization.nominal(case)]))
    assert np.all(fs.line_status == 0)
    assert np.all(fs.scores == 0.0)


def test_cumulative_mode_allows_one_hour():
    case = two_bus_case(score=0.5, tol=0.6)
    case = case.with_params(risk_intake=RiskIntake.CUMULATIVE)
    fs = solve_master(build_master(case, [UncertaintyRealization.nominal(case)]))
    assert fs.line_status.sum() == 1


def test_zero_budget_master_equals_deterministic_dispatch():
    case = build_6bus_case(horizon=24)
    case = scored(case, 1).with_params(budget=0, risk_tolerance=0.5)
    fs = solve_master(build_master(case, [UncertaintyRealization.nominal(case)]))
    dem, sol = nominal_profiles(case)
    lp_sol, _, _ = solve_recourse(case, fs.line_status, dem, sol, backend="highs")
    assert fs.lower_bound == pytest.approx(lp_sol.objective, rel=1e-6)
    assert fs.nominal_cost == pytest.approx(lp_sol.objective, rel=1e-9)


def test_appending_scenario_never_lowers_bound():
    case = two_bus_case(score=0.1, tol=1.0)
    nominal = UncertaintyRealization.nominal(case)
    m0 = build_master(case, [nominal])
    b0 = solve_master(m0).lower_bound
    worse = UncertaintyRealization.from_indicators(case, u_demand=np.array([[1, 0]]))
    m1 = append_scenario(m0, worse)
    assert len(m1.scenarios) == 2 and len(m0.scenarios) == 1
    assert solve_master(m1).lower_bound >= b0 - 1e-9
    assert solve_master(m1).lower_bound == pytest.approx(10.0 * (55 + 50))


def test_duplicate_scenario_rejected():
    case = two_bus_case()
    nominal = UncertaintyRealization.nominal(case)
    with pytest.raises(DuplicateScenarioError):
        build_master(case, [nominal, UncertaintyRealization.nominal(case)])
    with pytest.raises(DuplicateScenarioError):
        append_scenario(build_master(case, [nominal]), UncertaintyRealization.nominal(case))
    with pytest.raises(MasterError):
        build_master(case, [])


def test_realization_budget_checked():
    case = two_bus_case()
    with pytest.raises(RealizationError):
        UncertaintyRealization.from_indicators(case, u_demand=np.array([[1, 2]]))
    over = UncertaintyRealization.from_indicators(case, u_demand=np.array([[1, 1]]))
    with pytest.raises(MasterError, match="budget"):
        append_scenario(build_master(case, [UncertaintyRealization.nominal(case)]), over)
    r = UncertaintyRealization.from_indicators(case, u_demand=np.array([[0, 1]]))
    assert r.budget_used == 1
    assert r.demand.tolist() == [[50.0, 55.0]]
    assert r.to_dict(case)["demand_up"] == {"2": [2]}


def test_switching_consistency_on_master_plan():
    case = scored(build_6bus_case(horizon=24), 2).with_params(
        budget=0, risk_tolerance=0.3)
    fs = solve_master(build_master(case, [UncertaintyRealization.nominal(case)]))
    off = fs.line_status == 0
    assert np.all(np.abs(fs.flows[off]) <= 1e-6)
    for li, line in enumerate(case.lines):
        f, t = case.bus_index()[line.from_bus], case.bus_index()[line.to_bus]
        on = fs.line_status[li] == 1
        dc = case.base_mva * (fs.angles[f] - fs.angles[t]) / line.reactance
        assert np.allclose(fs.flows[li, on], dc[on], atol=1e-5)
        assert np.all(np.abs(fs.flows[li]) <= line.flow_limit + 1e-6)
    assert np.all(np.abs(fs.angles) <= math.pi + 1e-9)
    # nodal surplus is non-negative
    for bi, bus in enumerate(case.buses):
        inj = sum(fs.dispatch[g] for g, gen in enumerate(case.generators) if gen.bus == bus.id)
        inj = inj + sum(fs.solar[s] for s, su in enumerate(case.solar) if su.bus == bus.id)
        inj = inj - sum(fs.served[d] for d, dp in enumerate(case.demands) if dp.bus == bus.id)
        for li, line in enumerate(case.lines):
            if line.from_bus == bus.id:
                inj = inj - fs.flows[li]
            if line.to_bus == bus.id:
                inj = inj + fs.flows[li]
        assert np.all(np.asarray(inj) >= -1e-6)


def test_dispatch_within_generator_limits():
    case = scored(build_6bus_case(horizon=24), 3).with_params(budget=0)
    fs = solve_master(build_master(case, [UncertaintyRealization.nominal(case)]))
    for g, gen in enumerate(case.generators):
        assert np.all(fs.dispatch[g] <= gen.p_max + 1e-6)
        assert np.allclose(fs.segments[g].sum(axis=0), fs.dispatch[g], atol=1e-6)
    assert np.all(fs.served <= fs.demand + 1e-6)


def test_most_energized_plan_prefers_on_lines():
    # line on or off costs the same when the load sits at the generator bus
    case = NetworkCase(
        buses=(Bus(1, True), Bus(2)), lines=(Line(1, 1, 2, 0.1, 100.0),),
        generators=(Generator(1, 1, 0.0, 200.0, ((200.0, 10.0),)),),
        solar=(), demands=(DemandPoint(1, (50.0,), (0.0,)),),
        fire_scores=FireScoreProfile.from_array([1], np.array([[0.1]])), horizon=1,
        params=RobustParams(budget=0, risk_tolerance=1.0, solver="native"))
    m = build_master(case, [UncertaintyRealization.nominal(case)])
    status = most_energized_plan(m, cap=500.0 + 1e-6)
    assert status.tolist() == [[1]]


def test_first_stage_from_status_round_trip():
    case = two_bus_case()
    fs = first_stage_from_status(case, np.array([[1, 0]]))
    assert fs.nominal_cost == pytest.approx(10.0 * 50 + case.params.shed_penalty * 50)
    d = fs.to_dict(case)
    assert d["line_status"] == {"1": [1, 0]}
    assert d["served"]["2"] == [50.0, 0.0]


def test_recourse_infeasible_is_reported():
    # p_min above everything the bus can absorb is fine under free disposal
    case = NetworkCase(
        buses=(Bus(1, True), Bus(2)), lines=(Line(1, 1, 2, 0.1, 100.0),),
        generators=(Generator(1, 2, 80.0, 200.0, ((200.0, 10.0),)),),
        solar=(), demands=(DemandPoint(1, (50.0,), (0.0,)),),
        fire_scores=FireScoreProfile.zeros([1], 1), horizon=1, params=RobustParams(solver="native"))
    dem, sol = nominal_profiles(case)
    lp_sol, _, _ = solve_recourse(case, np.zeros((1, 1)), dem, sol)
    assert lp_sol.status is LpStatus.OPTIMAL
    assert lp_sol.objective == pytest.approx(800.0 + case.params.shed_penalty * 50)


def test_auto_backend_rule():
    from firegrid.dispatch import pick_backend
    small = two_bus_case().with_params(solver="auto")
    assert pick_backend(small) == "native"
    assert pick_backend(small, binaries=13) == "highs"
    assert pick_backend(build_6bus_case(horizon=24)) == "highs"
    assert pick_backend(small.with_params(solver="highs")) == "highs"
