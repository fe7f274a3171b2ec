import json
import math

import numpy as np
import pytest

from firegrid.ccg import (CcgStatus, OracleError, brute_force_worst_case, enumerate_robust_optimum,
                          relative_gap, risk_feasible, run_ccg)
from firegrid.experiments import random_toy_case
from firegrid.grid import (Bus, DemandPoint, FireScoreProfile, Generator, Line, NetworkCase,
                           RiskIntake, RobustParams, build_6bus_case)


def two_bus_case(score=0.1, tol=1.0, budget=1) -> NetworkCase:
    return NetworkCase(
        buses=(Bus(1, True), Bus(2)), lines=(Line(1, 1, 2, 0.1, 100.0),),
        generators=(Generator(1, 1, 0.0, 200.0, ((200.0, 10.0),)),),
        solar=(), demands=(DemandPoint(2, (50.0, 50.0), (5.0, 5.0)),),
        fire_scores=FireScoreProfile.from_array([1], np.full((1, 2), score)), horizon=2,
        params=RobustParams(budget=budget, risk_tolerance=tol, solver="native", convergence_gap=1e-8))


def test_two_bus_robust_optimum():
    plan, trace = run_ccg(two_bus_case())
    assert trace.status is CcgStatus.CONVERGED
    assert plan.line_status.tolist() == [[1, 1]]
    assert plan.objective == pytest.approx(10.0 * (55 + 50))


def test_all_lines_off_sheds_everything():
    case = two_bus_case(score=0.5, tol=0.1)
    plan, trace = run_ccg(case)
    assert trace.status is CcgStatus.CONVERGED
    assert plan.line_status.sum() == 0
    K = case.params.shed_penalty
    # worst case raises one hour's demand, all of it shed
    assert plan.objective == pytest.approx(K * (55 + 50))


def test_trace_invariants():
    case = random_toy_case(4)
    plan, trace = run_ccg(case)
    lbs = [r.lower_bound for r in trace.records]
    ubs = [r.upper_bound for r in trace.records]
    assert all(b >= a for a, b in zip(lbs, lbs[1:]))
    assert all(b <= a for a, b in zip(ubs, ubs[1:]))
    assert all(lb <= ub + 1e-6 * max(1.0, abs(ub)) for lb, ub in zip(lbs, ubs))
    assert [r.iteration for r in trace.records] == list(range(trace.iterations))
    assert trace.status is CcgStatus.CONVERGED
    assert trace.gap <= case.params.convergence_gap
    assert plan.objective == pytest.approx(trace.upper_bound)


def test_trace_jsonl(tmp_path):
    _, trace = run_ccg(two_bus_case())
    path = tmp_path / "trace.jsonl"
    trace.write(path)
    lines = [json.loads(l) for l in path.read_text().splitlines()]
    assert lines[-1]["status"] == "converged"
    assert lines[-1]["iterations"] == trace.iterations
    assert {"iteration", "lower_bound", "upper_bound", "gap", "realization"} <= set(lines[0])
    assert "master_time" not in lines[0]
    assert "master_time" in json.loads(trace.to_jsonl(timing=True).splitlines()[0])


def test_iteration_limit_reported():
    case = random_toy_case(7).with_params(max_iterations=1)
    _, trace = run_ccg(case)
    if trace.gap > case.params.convergence_gap:
        assert trace.status is CcgStatus.ITERATION_LIMIT
    assert trace.iterations == 1


def test_relative_gap():
    assert relative_gap(90.0, 100.0) == pytest.approx(0.1)
    assert relative_gap(-math.inf, 5.0) == math.inf
    assert relative_gap(0.0, 0.0) == 0.0


def test_risk_feasible_modes():
    case = two_bus_case(score=0.3, tol=0.4)
    assert risk_feasible(case, np.array([[1, 1]]))
    cum = case.with_params(risk_intake=RiskIntake.CUMULATIVE)
    assert not risk_feasible(cum, np.array([[1, 1]]))
    assert risk_feasible(cum, np.array([[1, 0]]))


def test_oracle_size_guard():
    case = build_6bus_case(horizon=24)
    with pytest.raises(OracleError):
        brute_force_worst_case(case, np.ones((7, 24)))
    with pytest.raises(OracleError):
        enumerate_robust_optimum(case)


@pytest.mark.parametrize("seed", range(8))
def test_matches_enumerated_optimum(seed):
    case = random_toy_case(seed, max_buses=3, max_hours=2)
    if len(case.lines) * case.horizon > 8:
        pytest.skip("too many line-hours for this quick check")
    plan, trace = run_ccg(case)
    status, best = enumerate_robust_optimum(case, max_line_hours=8)
    assert trace.status is CcgStatus.CONVERGED
    assert plan.objective == pytest.approx(best, rel=1e-6, abs=1e-6)
    assert risk_feasible(case, plan.line_status)


def test_deterministic_trace():
    case = random_toy_case(11)
    a = run_ccg(case)[1].to_jsonl()
    b = run_ccg(case)[1].to_jsonl()
    assert a == b
