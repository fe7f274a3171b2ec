"""Synthetic inputs and parameter sweeps."""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .grid import (Bus, CaseError, DemandPoint, FireScoreProfile, Generator, Line, NetworkCase,
                   RobustParams, SolarUnit, segmentize_quadratic, validate_case)

AXES = ("risk_tolerance", "budget", "deviation", "solar_mw")
# expected direction of the objective as the axis value grows
DIRECTION = {"risk_tolerance": "non-increasing", "budget": "non-decreasing",
             "deviation": "non-decreasing", "solar_mw": "non-increasing"}
SOLAR_BUSES = (3, 4, 5, 6)


def safe_line_index(n_lines: int) -> int:
    return (n_lines * 2) // 3


def generate_synthetic_scores(case: NetworkCase, seed: int, peak_hours: Sequence[float] = (15.0,),
                              base_level: float = 0.3, noise: float = 0.1) -> FireScoreProfile:
    """Seeded diurnal score profiles with one all-zero safe line.

    Each line gets a random severity factor; hourly scores follow a cosine
    bump around the nearest peak hour (1-based clock hours) with relative
    Gaussian noise, clipped into ``[0.05 base_level, 0.999]``.
    """
    if not 0.0 <= base_level < 1.0:
        raise ValueError("base_level must lie in [0, 1)")
    rng = np.random.default_rng(seed)
    L, T = len(case.lines), case.horizon
    hour = (np.arange(T) % 24) + 1.0
    bump = np.zeros(T)
    for p in peak_hours:
        bump = np.maximum(bump, 0.5 * (1.0 + np.cos(2.0 * np.pi * (hour - p) / 24.0)))
    factor = rng.uniform(0.5, 1.5, L)
    eps = rng.standard_normal((L, T))
    raw = base_level * factor[:, None] * (0.25 + 0.75 * bump[None, :]) * (1.0 + noise * eps)
    scores = np.clip(raw, 0.05 * base_level, 0.999)
    if L:
        scores[safe_line_index(L)] = 0.0
    return FireScoreProfile.from_array([l.id for l in case.lines], scores)


def with_deviation(case: NetworkCase, fraction: float) -> NetworkCase:
    """Set every demand and solar deviation to ``fraction`` of its nominal profile."""
    if not 0.0 <= fraction <= 1.0:
        raise CaseError("deviation fraction must lie in [0, 1]", "deviation")
    dem = tuple(replace(d, deviation=tuple(fraction * v for v in d.nominal)) for d in case.demands)
    sol = tuple(replace(s, deviation=tuple(fraction * v for v in s.nominal)) for s in case.solar)
    return replace(case, demands=dem, solar=sol)


def random_toy_case(seed: int, max_buses: int = 4, max_hours: int = 3,
                    max_binaries: int = 22) -> NetworkCase:
    """Small random connected network with congestion-prone ratings."""
    for attempt in range(100):
        rng = np.random.default_rng([seed, attempt])
        nb = int(rng.integers(2, max_buses + 1))
        T = int(rng.integers(1, max_hours + 1))
        buses = tuple(Bus(i + 1, i == 0) for i in range(nb))
        edges = [(int(rng.integers(1, i + 1)), i + 1) for i in range(1, nb)]
        for a in range(1, nb + 1):
            for b in range(a + 1, nb + 1):
                if (a, b) not in edges and rng.random() < 0.3:
                    edges.append((a, b))
        lines = tuple(Line(k + 1, a, b, float(rng.uniform(0.02, 0.3)), float(rng.uniform(20, 80)))
                      for k, (a, b) in enumerate(edges))
        gens = []
        for g in range(int(rng.integers(1, 3))):
            pmax = float(rng.uniform(50, 150))
            pmin = float(rng.uniform(0, 0.3)) * pmax
            gens.append(Generator(g + 1, int(rng.integers(1, nb + 1)), pmin, pmax,
                                  segmentize_quadratic(0.0, float(rng.uniform(10, 40)),
                                                       float(rng.uniform(0, 0.05)), pmin, pmax, 2)))
        dems = []
        for bus in sorted(rng.choice(np.arange(1, nb + 1), size=int(rng.integers(1, nb + 1)),
                                     replace=False)):
            nom = rng.uniform(10, 80, T)
            dems.append(DemandPoint(int(bus), tuple(float(v) for v in nom),
                                    tuple(float(v) for v in nom * rng.choice([0.0, 0.1, 0.3], T))))
        sol = []
        if rng.random() < 0.6:
            nom = rng.uniform(0, 60, T)
            sol.append(SolarUnit(1, int(rng.integers(1, nb + 1)), tuple(float(v) for v in nom),
                                 tuple(float(v) for v in nom * rng.uniform(0, 0.5, T))))
        scores = FireScoreProfile.from_array([l.id for l in lines], rng.uniform(0, 0.2, (len(lines), T)))
        params = RobustParams(budget=int(rng.integers(0, 5)), risk_tolerance=float(rng.uniform(0, 0.5)),
                              solver="native", convergence_gap=1e-8)
        case = NetworkCase(buses, lines, tuple(gens), tuple(sol), tuple(dems), scores, T, params,
                           name=f"toy{seed}")
        n_bin = sum(1 for d in dems for v in d.deviation if v > 0) + \
            sum(1 for s in sol for v in s.deviation if v > 0)
        if n_bin <= max_binaries:
            return validate_case(case)
    raise RuntimeError("could not draw a toy case within the binary limit")


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple[float, ...]
    fixed: dict = field(default_factory=dict)     # RobustParams overrides
    output: str | None = None
    deviation: float | None = None                # fraction applied before the sweep

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}")
        if not self.values:
            raise ValueError("sweep grid is empty")
        for v in self.values:
            if not math.isfinite(v):
                raise ValueError("sweep values must be finite")
            if self.axis == "budget" and (v < 0 or float(v) != int(v)):
                raise ValueError("budget values must be integers >= 0")
            if self.axis == "deviation" and not 0 <= v <= 100:
                raise ValueError("deviation values are percentages in [0, 100]")
            if self.axis in ("risk_tolerance", "solar_mw") and v < 0:
                raise ValueError(f"{self.axis} values must be >= 0")


def sweep_point(case: NetworkCase, axis: str, value: float, solar_deviation: float = 0.1) -> NetworkCase:
    from .risk import with_solar

    if axis == "risk_tolerance":
        return case.with_params(risk_tolerance=float(value))
    if axis == "budget":
        return case.with_params(budget=int(value))
    if axis == "deviation":
        return with_deviation(case, float(value) / 100.0)
    if axis == "solar_mw":
        return with_solar(case, {b: float(value) for b in SOLAR_BUSES if b in case.bus_ids},
                          solar_deviation)
    raise ValueError(f"unknown axis {axis!r}")


def _run_point(args) -> dict:
    from .ccg import run_ccg
    from .risk import quantify_line_risk

    index, case, axis, value = args
    row = {"index": index, "axis": axis, "value": value}
    try:
        point = validate_case(sweep_point(case, axis, value))
        plan, trace = run_ccg(point)
        rep = quantify_line_risk(plan)
        row.update(objective=plan.objective, lower_bound=trace.lower_bound,
                   iterations=trace.iterations, status=trace.status.value,
                   pct_lines_energized=rep.pct_lines_energized,
                   pct_load_served=rep.pct_load_served, error="")
    except Exception as exc:  # recorded in-row so the sweep continues
        row.update(objective=math.nan, lower_bound=math.nan, iterations=0, status="error",
                   pct_lines_energized=math.nan, pct_load_served=math.nan,
                   error=f"{type(exc).__name__}: {exc}")
    return row


def standard_sweep(axis: str, seed: int) -> tuple[NetworkCase, SweepSpec]:
    """Six-bus case with synthetic scores and the default grid for one sweep axis."""
    from .grid import build_6bus_case
    from .risk import with_solar

    base = build_6bus_case()
    base = base.with_scores(generate_synthetic_scores(base, seed))
    if axis == "risk_tolerance":
        case = with_solar(base, {3: 100.0}, 0.1, drop_generators=(3,)).with_params(budget=5)
        return case, SweepSpec(axis, tuple(k / 10 for k in range(11)))
    if axis == "budget":
        return base.with_params(risk_tolerance=0.1), SweepSpec(axis, (0, 1, 5, 10, 20, 50))
    if axis == "deviation":
        return base.with_params(risk_tolerance=0.1, budget=50), SweepSpec(axis, (5, 10, 15, 20))
    if axis == "solar_mw":
        case = replace(base, generators=base.generators[:2]).with_params(risk_tolerance=0.1, budget=5)
        return case, SweepSpec(axis, (0, 25, 50, 100))
    raise ValueError(f"unknown axis {axis!r}")


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("FIREGRID_WORKERS", "1")))
    except ValueError:
        return 1


def run_sweep(case: NetworkCase, spec: SweepSpec, workers: int | None = None) -> list[dict]:
    """Solve every grid point; rows come back in grid order."""
    base = case.with_params(**spec.fixed) if spec.fixed else case
    if spec.deviation is not None:
        base = with_deviation(base, spec.deviation)
    jobs = [(k, base, spec.axis, v) for k, v in enumerate(spec.values)]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(jobs) == 1:
        rows = [_run_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_point, jobs))
    return sorted(rows, key=lambda r: r["index"])


def monotonicity_summary(rows: Sequence[dict], axis: str, rel_tol: float = 1e-4) -> dict:
    """Direction check on emitted rows, allowing the solve's relative gap."""
    direction = DIRECTION[axis]
    ok_rows = [r for r in rows if r["status"] != "error"]
    pairs = list(zip(ok_rows, ok_rows[1:]))
    violations = []
    for a, b in pairs:
        x, y = float(a["objective"]), float(b["objective"])
        slack = rel_tol * max(abs(x), abs(y), 1.0)
        bad = y > x + slack if direction == "non-increasing" else y < x - slack
        if bad:
            violations.append([a["value"], b["value"]])
    return {"axis": axis, "direction": direction, "holds": not violations and len(ok_rows) == len(rows),
            "violations": violations, "failed_points": len(rows) - len(ok_rows)}


SWEEP_COLUMNS = ("index", "axis", "value", "objective", "lower_bound", "iterations", "status",
                 "pct_lines_energized", "pct_load_served", "error")


def write_sweep_csv(rows: Sequence[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in SWEEP_COLUMNS])


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.9g}"
    return str(v)
