import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from firegrid.cli import main
from firegrid.experiments import (SweepSpec, generate_synthetic_scores, monotonicity_summary,
                                  random_toy_case, run_sweep, safe_line_index, sweep_point,
                                  with_deviation, write_sweep_csv)
from firegrid.grid import CaseError, build_6bus_case, dump_case, read_scores_csv


@pytest.fixture
def small_case_file(tmp_path):
    case = build_6bus_case(horizon=3)
    case = case.with_scores(generate_synthetic_scores(case, 1)).with_params(budget=1, risk_tolerance=0.5)
    path = tmp_path / "case.json"
    dump_case(case, path)
    return path


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1), st.floats(0.01, 0.95))
def test_synthetic_scores_bounds(seed, base):
    case = build_6bus_case(horizon=24)
    a = generate_synthetic_scores(case, seed, base_level=base).as_array()
    assert a.shape == (7, 24)
    assert np.all(a >= 0.0) and np.all(a < 1.0)
    safe = safe_line_index(7)
    assert np.all(a[safe] == 0.0)
    others = np.delete(a, safe, axis=0)
    assert np.all(others > 0.0)


def test_synthetic_scores_deterministic():
    case = build_6bus_case(horizon=24)
    a = generate_synthetic_scores(case, 5).as_array()
    assert a.tobytes() == generate_synthetic_scores(case, 5).as_array().tobytes()
    assert not np.array_equal(a, generate_synthetic_scores(case, 6).as_array())


def test_synthetic_scores_peak_hour():
    case = build_6bus_case(horizon=24)
    a = generate_synthetic_scores(case, 3, peak_hours=(15.0,), noise=0.0).as_array()
    assert int(np.argmax(a[0])) == 14


def test_zero_base_level_gives_zero_scores():
    case = build_6bus_case(horizon=24)
    assert np.all(generate_synthetic_scores(case, 1, base_level=0.0).as_array() == 0.0)
    with pytest.raises(ValueError):
        generate_synthetic_scores(case, 1, base_level=1.0)


def test_with_deviation():
    case = with_deviation(build_6bus_case(horizon=2), 0.2)
    assert case.demands[0].deviation == pytest.approx([0.2 * v for v in case.demands[0].nominal])
    with pytest.raises(CaseError):
        with_deviation(case, 1.5)


def test_sweep_point_axes():
    case = build_6bus_case(horizon=2)
    assert sweep_point(case, "budget", 7).params.budget == 7
    assert sweep_point(case, "risk_tolerance", 0.3).params.risk_tolerance == 0.3
    assert [s.bus for s in sweep_point(case, "solar_mw", 25).solar] == [3, 4, 5, 6]
    with pytest.raises(ValueError):
        SweepSpec("budget", (1.5,))
    with pytest.raises(ValueError):
        SweepSpec("nonsense", (1.0,))
    with pytest.raises(ValueError):
        SweepSpec("budget", ())


def test_random_toy_case_limits():
    for seed in range(20):
        case = random_toy_case(seed)
        assert len(case.buses) <= 4 and case.horizon <= 3
        n_bin = sum(v > 0 for d in case.demands for v in d.deviation) + \
            sum(v > 0 for s in case.solar for v in s.deviation)
        assert n_bin <= 22


def test_run_sweep_and_summary(tmp_path):
    case = build_6bus_case(horizon=2)
    case = case.with_scores(generate_synthetic_scores(case, 1)).with_params(risk_tolerance=0.5)
    rows = run_sweep(case, SweepSpec("budget", (0, 1, 2)), workers=1)
    assert [r["value"] for r in rows] == [0, 1, 2]
    assert all(r["status"] == "converged" for r in rows)
    summary = monotonicity_summary(rows, "budget")
    assert summary["holds"] and summary["direction"] == "non-decreasing"
    path = tmp_path / "s.csv"
    write_sweep_csv(rows, path)
    out = list(csv.DictReader(path.open()))
    assert len(out) == 3 and float(out[2]["objective"]) >= float(out[0]["objective"])


def test_monotonicity_flags_violation():
    rows = [{"value": 0, "objective": 10.0, "status": "converged"},
            {"value": 1, "objective": 9.0, "status": "converged"}]
    s = monotonicity_summary(rows, "budget")
    assert not s["holds"] and s["violations"] == [[0, 1]]


def test_cli_solve_artifacts_and_determinism(small_case_file, tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["solve", str(small_case_file), "--out", str(a)]) == 0
    assert main(["solve", str(small_case_file), "--out", str(b)]) == 0
    names = ["plan.json", "trace.jsonl", "line_risk.csv", "line_status.csv", "risk_summary.json"]
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes()
    doc = json.loads((a / "plan.json").read_text())
    assert doc["status"] == "converged"
    assert doc["params"]["budget"] == 1


def test_cli_flag_overrides(small_case_file, tmp_path):
    out = tmp_path / "o"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"budget": 0}))
    assert main(["solve", str(small_case_file), "--out", str(out), "--config", str(cfg),
                 "--risk-intake", "cumulative"]) == 0
    params = json.loads((out / "plan.json").read_text())["params"]
    assert params["budget"] == 0 and params["risk_intake"] == "cumulative"


@pytest.mark.parametrize("argv", [
    ["solve", "missing.json"],
    ["solve", "{case}", "--budget", "-1"],
    ["solve", "{case}", "--risk-tolerance", "-0.5"],
    ["solve", "{case}", "--config", "nope.json"],
    ["sweep", "{case}", "--axis", "budget", "--values", "a,b"],
    ["sweep", "{case}", "--axis", "budget", "--values", "1.5"],
    ["synth-scores", "{case}", "--base-level", "1.2"],
])
def test_cli_input_errors_exit_1(small_case_file, tmp_path, argv, capsys):
    argv = [a.replace("{case}", str(small_case_file)) for a in argv]
    argv += ["--out", str(tmp_path / "x")]
    assert main(argv) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_sweep(small_case_file, tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", str(small_case_file), "--axis", "budget", "--values", "0,1",
                 "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 3
    assert json.loads(out.with_suffix(".summary.json").read_text())["holds"] is True


def test_cli_synth_scores(small_case_file, tmp_path):
    out = tmp_path / "scores.csv"
    assert main(["synth-scores", str(small_case_file), "--seed", "4", "--out", str(out)]) == 0
    prof = read_scores_csv(out, list(range(1, 8)), 3)
    assert prof.as_array().shape == (7, 3)


def test_cli_validate(capsys):
    assert main(["validate", "--cases", "3", "--seed", "0"]) == 0
    assert "3/3 toys agree" in capsys.readouterr().out
