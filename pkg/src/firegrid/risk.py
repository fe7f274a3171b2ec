"""Risk-of-operation reports for solved line plans."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .grid import CaseError, NetworkCase, RiskIntake, SolarUnit, solar_shape
from .master import FirstStageSolution


@dataclass(frozen=True, eq=False)
class RiskReport:
    line_ids: tuple[int, ...]
    line_risk: np.ndarray          # sum over hours of realized scores, per line
    line_status: np.ndarray        # (lines, T)
    pct_lines_energized: float
    pct_load_served: float
    operation_cost: float

    def write_csv(self, directory) -> list[Path]:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        risk_path, status_path = d / "line_risk.csv", d / "line_status.csv"
        with open(risk_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["line_id", "risk_of_operation"])
            for lid, r in zip(self.line_ids, self.line_risk):
                w.writerow([lid, f"{r:.9g}"])
        with open(status_path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            T = self.line_status.shape[1] if self.line_status.ndim == 2 else 0
            w.writerow(["line_id"] + [f"h{t + 1}" for t in range(T)])
            for lid, row in zip(self.line_ids, self.line_status):
                w.writerow([lid] + [int(v) for v in row])
        return [risk_path, status_path]

    def summary(self) -> dict:
        return {
            "operation_cost": round(self.operation_cost, 6),
            "pct_lines_energized": round(self.pct_lines_energized, 9),
            "pct_load_served": round(self.pct_load_served, 9),
            "line_risk": {str(l): round(float(r), 9) for l, r in zip(self.line_ids, self.line_risk)},
        }

    def write_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.summary(), fh, indent=1, sort_keys=True)
            fh.write("\n")


def quantify_line_risk(plan: FirstStageSolution) -> RiskReport:
    """Per-line score totals over the hours each line is energized."""
    status = np.asarray(plan.line_status)
    risk = np.clip(np.asarray(plan.scores) * status, 0.0, None).sum(axis=1) if status.size \
        else np.zeros(len(plan.line_ids))
    energized = 100.0 * float(status.mean()) if status.size else 0.0
    total = float(np.sum(plan.demand))
    served = 100.0 * float(np.sum(plan.served)) / total if total > 0 else 100.0
    return RiskReport(plan.line_ids, risk, status, energized, min(max(served, 0.0), 100.0),
                      float(plan.objective))


def with_solar(case: NetworkCase, siting: Mapping[int, float], deviation: float = 0.1,
               drop_generators: Sequence[int] = ()) -> NetworkCase:
    """Replace the case's solar fleet with one unit per sited bus (and drop generators)."""
    buses = set(case.bus_ids)
    for bus in siting:
        if bus not in buses:
            raise CaseError(f"siting references unknown bus {bus}", "siting")
    shape = solar_shape(case.horizon)
    units = []
    for k, (bus, mw) in enumerate(sorted(siting.items()), start=1):
        if mw < 0:
            raise CaseError(f"negative solar capacity at bus {bus}", "siting")
        nom = mw * shape
        units.append(SolarUnit(k, int(bus), tuple(float(v) for v in nom),
                               tuple(float(v) for v in deviation * nom)))
    gens = tuple(g for g in case.generators if g.id not in set(drop_generators))
    return replace(case, solar=tuple(units), generators=gens)


def compare_solar_siting(case: NetworkCase, total_solar: float, sitings: Sequence[Mapping[int, float]],
                         modes: Sequence[RiskIntake] = (RiskIntake.CONSERVATIVE, RiskIntake.CUMULATIVE),
                         deviation: float = 0.1, backend: str | None = None) -> list[dict]:
    """Robust cost, energized share and served share of each siting under each intake mode."""
    from .ccg import run_ccg

    for s in sitings:
        if abs(sum(s.values()) - total_solar) > 1e-6 * max(1.0, total_solar):
            raise CaseError(f"siting {dict(s)} does not sum to {total_solar} MW", "siting")
    rows = []
    for k, s in enumerate(sitings):
        sited = with_solar(case, s, deviation)
        for mode in modes:
            c = sited.with_params(risk_intake=mode)
            plan, trace = run_ccg(c, backend=backend)
            rep = quantify_line_risk(plan)
            rows.append({
                "siting": k,
                "buses": {str(b): float(mw) for b, mw in sorted(s.items())},
                "mode": mode.value,
                "cost": plan.objective,
                "lower_bound": trace.lower_bound,
                "status": trace.status.value,
                "pct_lines_energized": rep.pct_lines_energized,
                "pct_load_served": rep.pct_load_served,
            })
    return rows
