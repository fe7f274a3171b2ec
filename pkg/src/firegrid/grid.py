"""Network instance types, the 6-bus test system, and case-file ingestion.

Profiles are stored as tuples so every type is immutable and compares by
value; model builders convert them to arrays on demand.  Hours are 0-based
in memory and 1-based in files.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


class CaseError(ValueError):
    """A case violates a schema rule or a domain invariant."""

    def __init__(self, message: str, entity: str | None = None):
        self.entity = entity
        super().__init__(f"{entity}: {message}" if entity else message)


class RiskIntake(str, enum.Enum):
    CONSERVATIVE = "conservative"   # score cap applied to every hour separately
    CUMULATIVE = "cumulative"       # one cap on the score sum over the horizon


@dataclass(frozen=True)
class Bus:
    id: int
    reference: bool = False


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    reactance: float      # p.u.
    flow_limit: float     # MW


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_min: float
    p_max: float
    segments: tuple[tuple[float, float], ...]   # (width MW, marginal cost $/MWh)

    @property
    def marginal_costs(self) -> tuple[float, ...]:
        return tuple(c for _, c in self.segments)

    def cost(self, p: float) -> float:
        """Segment cost of dispatch ``p``, filling the cheapest segments first."""
        total, left = 0.0, p
        for width, mc in self.segments:
            take = min(width, max(left, 0.0))
            total += take * mc
            left -= take
        return total


@dataclass(frozen=True)
class SolarUnit:
    id: int
    bus: int
    nominal: tuple[float, ...]     # MW available per hour
    deviation: tuple[float, ...]   # MW per hour


@dataclass(frozen=True)
class DemandPoint:
    bus: int
    nominal: tuple[float, ...]
    deviation: tuple[float, ...]


@dataclass(frozen=True)
class FireScoreProfile:
    line_ids: tuple[int, ...]
    scores: tuple[tuple[float, ...], ...]   # [line][hour]

    @classmethod
    def zeros(cls, line_ids: Sequence[int], horizon: int) -> "FireScoreProfile":
        return cls(tuple(line_ids), tuple((0.0,) * horizon for _ in line_ids))

    @classmethod
    def from_array(cls, line_ids: Sequence[int], arr) -> "FireScoreProfile":
        arr = np.asarray(arr, dtype=float)
        return cls(tuple(int(i) for i in line_ids), tuple(tuple(float(v) for v in row) for row in arr))

    def as_array(self) -> np.ndarray:
        if not self.scores:
            return np.zeros((0, 0))
        return np.asarray(self.scores, dtype=float)

    def for_line(self, line_id: int) -> tuple[float, ...]:
        return self.scores[self.line_ids.index(line_id)]


@dataclass(frozen=True)
class RobustParams:
    risk_tolerance: float = 0.0
    risk_intake: RiskIntake = RiskIntake.CONSERVATIVE
    budget: int = 0
    shed_penalty: float = 1000.0
    big_M: float | None = None        # None: per-line value from flow limit and angle span
    convergence_gap: float = 1e-4
    max_iterations: int = 50
    solver: str = "auto"              # "native", "highs", or size-based "auto"
    mip_gap: float = 1e-9

    def to_dict(self) -> dict:
        return {
            "risk_tolerance": self.risk_tolerance,
            "risk_intake": self.risk_intake.value,
            "budget": self.budget,
            "shed_penalty": self.shed_penalty,
            "big_M": self.big_M,
            "convergence_gap": self.convergence_gap,
            "max_iterations": self.max_iterations,
            "solver": self.solver,
            "mip_gap": self.mip_gap,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "RobustParams":
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise CaseError(f"unknown robust_params keys {sorted(extra)}", "robust_params")
        kw = dict(d)
        if "risk_intake" in kw:
            try:
                kw["risk_intake"] = RiskIntake(str(kw["risk_intake"]).lower())
            except ValueError:
                raise CaseError(f"risk_intake must be one of {[m.value for m in RiskIntake]}",
                                "robust_params") from None
        if "budget" in kw:
            b = kw["budget"]
            if isinstance(b, bool) or not float(b).is_integer():
                raise CaseError("budget of uncertainty must be an integer", "robust_params")
            kw["budget"] = int(b)
        if "max_iterations" in kw:
            kw["max_iterations"] = int(kw["max_iterations"])
        for key in ("risk_tolerance", "shed_penalty", "convergence_gap", "mip_gap"):
            if key in kw:
                kw[key] = float(kw[key])
        if kw.get("big_M") is not None:
            kw["big_M"] = float(kw["big_M"])
        return cls(**kw)


@dataclass(frozen=True)
class NetworkCase:
    buses: tuple[Bus, ...]
    lines: tuple[Line, ...]
    generators: tuple[Generator, ...]
    solar: tuple[SolarUnit, ...]
    demands: tuple[DemandPoint, ...]
    fire_scores: FireScoreProfile
    horizon: int
    params: RobustParams = field(default_factory=RobustParams)
    base_mva: float = 100.0
    name: str = "case"

    # -- index helpers -----------------------------------------------------
    @property
    def bus_ids(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.buses)

    def bus_index(self) -> dict[int, int]:
        return {b.id: k for k, b in enumerate(self.buses)}

    @property
    def reference_bus(self) -> int:
        return next(b.id for b in self.buses if b.reference)

    def scores_array(self) -> np.ndarray:
        """Fire scores ordered like ``self.lines``: shape (lines, horizon)."""
        if not self.lines:
            return np.zeros((0, self.horizon))
        order = [self.fire_scores.line_ids.index(l.id) for l in self.lines]
        return self.fire_scores.as_array()[order]

    def line_big_m(self) -> np.ndarray:
        """Big-M per line: flow limit plus the largest angle-difference flow."""
        if self.params.big_M is not None:
            return np.full(len(self.lines), float(self.params.big_M))
        return np.array([natural_big_m(l, self.base_mva) for l in self.lines])

    def max_marginal_cost(self) -> float:
        costs = [c for g in self.generators for c in g.marginal_costs]
        return max(costs) if costs else 0.0

    def total_demand(self) -> float:
        return float(sum(sum(d.nominal) for d in self.demands))

    def with_params(self, **changes) -> "NetworkCase":
        return replace(self, params=replace(self.params, **changes))

    def with_scores(self, scores: FireScoreProfile) -> "NetworkCase":
        return replace(self, fire_scores=scores)


def natural_big_m(line: Line, base_mva: float) -> float:
    # angles live in [-pi, pi], so |theta_f - theta_t| <= 2 pi
    return line.flow_limit + base_mva * 2.0 * math.pi / line.reactance


# ---------------------------------------------------------------------------
# cost segments


def segmentize_quadratic(a: float, b: float, c: float, p_min: float, p_max: float,
                         n_segments: int) -> tuple[tuple[float, float], ...]:
    """Equal-width piecewise-linear segments of ``a + b p + c p^2`` over ``[0, p_max]``.

    Each segment is priced at the average slope of the quadratic across it,
    ``b + c (p_lo + p_hi)``; the fixed term ``a`` does not enter.
    """
    if p_min > p_max:
        raise CaseError(f"p_min {p_min} exceeds p_max {p_max}")
    if n_segments < 1:
        raise CaseError("need at least one cost segment")
    if c < 0:
        raise CaseError("negative quadratic coefficient makes the cost non-convex")
    width = p_max / n_segments
    segs = []
    for k in range(n_segments):
        lo, hi = k * width, (k + 1) * width
        segs.append((width, b + c * (lo + hi)))
    return tuple(segs)


# ---------------------------------------------------------------------------
# validation


def _check_profile(values: Sequence[float], horizon: int, what: str, entity: str) -> None:
    if len(values) != horizon:
        raise CaseError(f"{what} has length {len(values)}, expected horizon {horizon}", entity)
    if any(not math.isfinite(v) for v in values):
        raise CaseError(f"{what} contains non-finite values", entity)


def validate_case(case: NetworkCase) -> NetworkCase:
    """Check every invariant; return ``case`` unchanged or raise :class:`CaseError`."""
    T = case.horizon
    if not isinstance(T, int) or T < 1:
        raise CaseError("horizon must be a positive integer", "horizon")
    if case.base_mva <= 0:
        raise CaseError("base_mva must be positive", "base_mva")
    if not case.buses:
        raise CaseError("case has no buses", "buses")
    ids = [b.id for b in case.buses]
    if len(set(ids)) != len(ids):
        raise CaseError("duplicate bus id", "buses")
    if list(ids) != sorted(ids):
        raise CaseError("buses must be sorted by id", "buses")
    refs = [b.id for b in case.buses if b.reference]
    if len(refs) != 1:
        raise CaseError(f"exactly one reference bus required, found {len(refs)}", "buses")
    bus_set = set(ids)

    line_ids = [l.id for l in case.lines]
    if len(set(line_ids)) != len(line_ids):
        raise CaseError("duplicate line id", "lines")
    for l in case.lines:
        ent = f"line {l.id}"
        if l.from_bus not in bus_set or l.to_bus not in bus_set:
            raise CaseError("references an unknown bus", ent)
        if l.from_bus == l.to_bus:
            raise CaseError("from_bus equals to_bus", ent)
        if not l.reactance > 0:
            raise CaseError(f"reactance x_l must be > 0 (got {l.reactance})", ent)
        if not l.flow_limit > 0:
            raise CaseError(f"flow limit must be > 0 (got {l.flow_limit})", ent)

    gen_ids = [g.id for g in case.generators]
    if len(set(gen_ids)) != len(gen_ids):
        raise CaseError("duplicate generator id", "generators")
    for g in case.generators:
        ent = f"generator {g.id}"
        if g.bus not in bus_set:
            raise CaseError("references an unknown bus", ent)
        if not 0 <= g.p_min <= g.p_max:
            raise CaseError(f"need 0 <= p_min <= p_max (got {g.p_min}, {g.p_max})", ent)
        if not g.segments:
            raise CaseError("no cost segments", ent)
        if any(w <= 0 for w, _ in g.segments):
            raise CaseError("segment widths must be positive", ent)
        if sum(w for w, _ in g.segments) < g.p_max - 1e-9:
            raise CaseError("segment widths do not cover p_max", ent)
        mcs = g.marginal_costs
        if any(b < a - 1e-12 for a, b in zip(mcs, mcs[1:])):
            raise CaseError("segment marginal costs must be non-decreasing", ent)

    solar_ids = [s.id for s in case.solar]
    if len(set(solar_ids)) != len(solar_ids):
        raise CaseError("duplicate solar id", "solar")
    for s in case.solar:
        ent = f"solar {s.id}"
        if s.bus not in bus_set:
            raise CaseError("references an unknown bus", ent)
        _check_profile(s.nominal, T, "nominal profile", ent)
        _check_profile(s.deviation, T, "deviation profile", ent)
        if any(v < 0 for v in s.nominal):
            raise CaseError("nominal availability must be >= 0", ent)
        if any(d < 0 or d > v + 1e-12 for d, v in zip(s.deviation, s.nominal)):
            raise CaseError("deviation must lie in [0, nominal]", ent)

    dem_buses = [d.bus for d in case.demands]
    if len(set(dem_buses)) != len(dem_buses):
        raise CaseError("more than one demand point on a bus", "demands")
    for d in case.demands:
        ent = f"demand at bus {d.bus}"
        if d.bus not in bus_set:
            raise CaseError("references an unknown bus", ent)
        _check_profile(d.nominal, T, "nominal profile", ent)
        _check_profile(d.deviation, T, "deviation profile", ent)
        if any(v < 0 for v in d.nominal):
            raise CaseError("nominal demand must be >= 0", ent)
        if any(x < 0 or x > v + 1e-12 for x, v in zip(d.deviation, d.nominal)):
            raise CaseError("deviation must lie in [0, nominal]", ent)

    fs = case.fire_scores
    if sorted(fs.line_ids) != sorted(line_ids) or len(fs.line_ids) != len(line_ids):
        raise CaseError("fire scores must cover every line exactly once", "fire_scores")
    for lid, row in zip(fs.line_ids, fs.scores):
        ent = f"fire scores of line {lid}"
        _check_profile(row, T, "score profile", ent)
        if any(not 0.0 <= v < 1.0 for v in row):
            raise CaseError("scores must lie in [0, 1)", ent)

    _validate_params(case)
    _check_connected(case)
    return case


def _validate_params(case: NetworkCase) -> None:
    p = case.params
    ent = "robust_params"
    if not isinstance(p.risk_intake, RiskIntake):
        raise CaseError("risk_intake must be a RiskIntake", ent)
    if not (math.isfinite(p.risk_tolerance) and p.risk_tolerance >= 0):
        raise CaseError("risk tolerance must be >= 0", ent)
    if isinstance(p.budget, bool) or not isinstance(p.budget, (int, np.integer)) or p.budget < 0:
        raise CaseError("budget of uncertainty must be an integer >= 0", ent)
    if not p.shed_penalty > case.max_marginal_cost():
        raise CaseError(f"shed penalty {p.shed_penalty} must exceed the largest marginal cost "
                        f"{case.max_marginal_cost()}", ent)
    if p.big_M is not None:
        need = max((natural_big_m(l, case.base_mva) for l in case.lines), default=0.0)
        if not p.big_M > 0 or p.big_M < need:
            raise CaseError(f"big_M {p.big_M} must be >= {need:.6g} (flow limit plus angle span)", ent)
    if not 0 < p.convergence_gap < 1:
        raise CaseError("convergence gap must lie in (0, 1)", ent)
    if not 0 <= p.mip_gap < 1:
        raise CaseError("mip gap must lie in [0, 1)", ent)
    if int(p.max_iterations) < 1:
        raise CaseError("max_iterations must be >= 1", ent)
    if p.solver not in ("auto", "native", "highs"):
        raise CaseError(f"unknown solver {p.solver!r}", ent)


def _check_connected(case: NetworkCase) -> None:
    adj: dict[int, list[int]] = {b.id: [] for b in case.buses}
    for l in case.lines:
        adj[l.from_bus].append(l.to_bus)
        adj[l.to_bus].append(l.from_bus)
    start = case.buses[0].id
    seen = {start}
    todo = deque([start])
    while todo:
        u = todo.popleft()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                todo.append(v)
    if len(seen) != len(case.buses):
        missing = sorted(set(adj) - seen)
        raise CaseError(f"network is disconnected with all lines energized (unreached buses {missing})",
                        "lines")


# ---------------------------------------------------------------------------
# the 6-bus system

SIX_BUS_GENERATORS = (
    # id, bus, p_min, p_max, a, b, c
    (1, 1, 100.0, 220.0, 177.0, 13.5, 0.00045),
    (2, 2, 10.0, 100.0, 130.0, 40.0, 0.001),
    (3, 3, 10.0, 40.0, 137.0, 17.7, 0.005),
)
SIX_BUS_LINES = (
    # id, from, to, x (p.u.), rating (MW)
    (1, 1, 2, 0.170, 200.0),
    (2, 2, 3, 0.037, 100.0),
    (3, 1, 4, 0.258, 100.0),
    (4, 2, 4, 0.197, 100.0),
    (5, 4, 5, 0.037, 100.0),
    (6, 5, 6, 0.140, 100.0),
    (7, 3, 6, 0.018, 100.0),
)
SIX_BUS_DEMAND_SHARES = {3: 0.2, 4: 0.4, 5: 0.4}


def solar_shape(horizon: int = 24) -> np.ndarray:
    """Clear-sky availability fraction per hour: half-sine between 06:00 and 18:00."""
    h = (np.arange(horizon) % 24) + 0.5
    return np.clip(np.sin(np.pi * (h - 6.0) / 12.0), 0.0, None)


def build_6bus_case(horizon: int = 24, deviation: float = 0.1,
                    fire_scores: FireScoreProfile | None = None,
                    params: RobustParams | None = None) -> NetworkCase:
    """Three-generator, seven-line test system with flat demand at buses 3, 4, 5.

    Demands are 20/40/40 % of the 360 MW installed capacity; ``deviation`` is
    the fraction of nominal demand that the adversary may add.
    """
    buses = tuple(Bus(i, reference=(i == 1)) for i in range(1, 7))
    gens = tuple(Generator(g, bus, pmin, pmax, segmentize_quadratic(a, b, c, pmin, pmax, 3))
                 for g, bus, pmin, pmax, a, b, c in SIX_BUS_GENERATORS)
    lines = tuple(Line(*row) for row in SIX_BUS_LINES)
    capacity = sum(g.p_max for g in gens)
    demands = tuple(
        DemandPoint(bus, (share * capacity,) * horizon, (deviation * share * capacity,) * horizon)
        for bus, share in SIX_BUS_DEMAND_SHARES.items())
    if fire_scores is None:
        fire_scores = FireScoreProfile.zeros([l.id for l in lines], horizon)
    case = NetworkCase(buses, lines, gens, (), demands, fire_scores, horizon,
                       params or RobustParams(), name="6bus")
    return validate_case(case)


def solar_unit(uid: int, bus: int, capacity: float, horizon: int, deviation: float) -> SolarUnit:
    nominal = capacity * solar_shape(horizon)
    return SolarUnit(uid, bus, tuple(float(v) for v in nominal),
                     tuple(float(v) for v in deviation * nominal))


# ---------------------------------------------------------------------------
# file I/O


def read_scores_csv(path, line_ids: Sequence[int] | None = None,
                    horizon: int | None = None) -> FireScoreProfile:
    """Read ``line_id,hour,score`` rows (hours 1-based) into a profile."""
    rows: dict[int, dict[int, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["line_id", "hour", "score"]:
            raise CaseError("score file header must be line_id,hour,score", str(path))
        for k, rec in enumerate(reader, start=2):
            try:
                lid, hour, score = int(rec["line_id"]), int(rec["hour"]), float(rec["score"])
            except (TypeError, ValueError):
                raise CaseError(f"malformed row {k}", str(path)) from None
            if hour in rows.setdefault(lid, {}):
                raise CaseError(f"duplicate entry for line {lid} hour {hour}", str(path))
            rows[lid][hour] = score
    ids = list(line_ids) if line_ids is not None else sorted(rows)
    T = horizon if horizon is not None else max((max(h) for h in rows.values()), default=0)
    out = []
    for lid in ids:
        per = rows.get(lid, {})
        missing = [h for h in range(1, T + 1) if h not in per]
        if missing:
            raise CaseError(f"line {lid} lacks hours {missing[:5]}", str(path))
        if set(per) - set(range(1, T + 1)):
            raise CaseError(f"line {lid} has hours outside 1..{T}", str(path))
        out.append(tuple(per[h] for h in range(1, T + 1)))
    extra = set(rows) - set(ids)
    if extra:
        raise CaseError(f"scores for unknown lines {sorted(extra)}", str(path))
    return FireScoreProfile(tuple(ids), tuple(out))


def write_scores_csv(profile: FireScoreProfile, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["line_id", "hour", "score"])
        for lid, row in zip(profile.line_ids, profile.scores):
            for t, v in enumerate(row, start=1):
                w.writerow([lid, t, repr(float(v))])


def _num_list(v, what: str, ent: str) -> tuple[float, ...]:
    if not isinstance(v, list):
        raise CaseError(f"{what} must be a list of numbers", ent)
    try:
        return tuple(float(x) for x in v)
    except (TypeError, ValueError):
        raise CaseError(f"{what} must be a list of numbers", ent) from None


def _get(d: Mapping, key: str, ent: str):
    if key not in d:
        raise CaseError(f"missing key {key!r}", ent)
    return d[key]


def case_from_dict(doc: Mapping, base_dir: Path | None = None) -> NetworkCase:
    """Build and validate a case from its JSON document."""
    if not isinstance(doc, Mapping):
        raise CaseError("case document must be a JSON object")
    for key in ("buses", "lines", "generators", "solar", "demands", "horizon", "robust_params"):
        if key not in doc:
            raise CaseError(f"missing top-level key {key!r}")
    T = doc["horizon"]
    if isinstance(T, bool) or not isinstance(T, int):
        raise CaseError("horizon must be an integer", "horizon")
    try:
        raw_buses = sorted(doc["buses"], key=lambda b: int(_get(b, "id", "bus")))
        buses = [Bus(int(b["id"]), bool(b.get("reference", False))) for b in raw_buses]
        if not any(b.reference for b in buses) and buses:
            # lowest-indexed bus becomes the angle reference
            buses[0] = Bus(buses[0].id, True)
        lines = tuple(
            Line(int(_get(l, "id", "line")), int(_get(l, "from_bus", f"line {l.get('id')}")),
                 int(_get(l, "to_bus", f"line {l.get('id')}")),
                 float(_get(l, "reactance", f"line {l.get('id')}")),
                 float(_get(l, "flow_limit", f"line {l.get('id')}")))
            for l in doc["lines"])
        gens = []
        for g in doc["generators"]:
            ent = f"generator {g.get('id')}"
            pmin, pmax = float(_get(g, "p_min", ent)), float(_get(g, "p_max", ent))
            if "segments" in g:
                segs = tuple((float(w), float(c)) for w, c in g["segments"])
            elif "cost" in g:
                q = g["cost"]
                segs = segmentize_quadratic(float(q.get("a", 0.0)), float(_get(q, "b", ent)),
                                            float(_get(q, "c", ent)), pmin, pmax,
                                            int(q.get("segments", 3)))
            else:
                raise CaseError("needs 'segments' or quadratic 'cost'", ent)
            gens.append(Generator(int(_get(g, "id", "generator")), int(_get(g, "bus", ent)),
                                  pmin, pmax, segs))
        solar = []
        for s in doc["solar"]:
            ent = f"solar {s.get('id')}"
            nominal = _num_list(_get(s, "nominal", ent), "nominal", ent)
            dev = _num_list(s.get("deviation", [0.0] * len(nominal)), "deviation", ent)
            solar.append(SolarUnit(int(_get(s, "id", "solar")), int(_get(s, "bus", ent)), nominal, dev))
        demands = []
        for d in doc["demands"]:
            ent = f"demand at bus {d.get('bus')}"
            nominal = _num_list(_get(d, "nominal", ent), "nominal", ent)
            dev = _num_list(d.get("deviation", [0.0] * len(nominal)), "deviation", ent)
            demands.append(DemandPoint(int(_get(d, "bus", "demand")), nominal, dev))
    except (TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, CaseError):
            raise
        raise CaseError(f"malformed entry: {exc}") from None

    line_ids = [l.id for l in lines]
    fs_spec = doc.get("fire_scores")
    if fs_spec is None:
        scores = FireScoreProfile.zeros(line_ids, T)
    elif isinstance(fs_spec, str):
        p = Path(fs_spec)
        if not p.is_absolute() and base_dir is not None:
            p = base_dir / p
        scores = read_scores_csv(p, line_ids, T)
    elif isinstance(fs_spec, Mapping):
        rows = []
        for lid in line_ids:
            if str(lid) not in fs_spec:
                raise CaseError(f"no scores for line {lid}", "fire_scores")
            rows.append(_num_list(fs_spec[str(lid)], f"scores of line {lid}", "fire_scores"))
        extra = set(fs_spec) - {str(i) for i in line_ids}
        if extra:
            raise CaseError(f"scores for unknown lines {sorted(extra)}", "fire_scores")
        scores = FireScoreProfile(tuple(line_ids), tuple(rows))
    else:
        raise CaseError("fire_scores must be a CSV path or a mapping", "fire_scores")

    params = RobustParams.from_dict(doc["robust_params"] or {})
    case = NetworkCase(tuple(buses), lines, tuple(gens), tuple(solar), tuple(demands), scores,
                       T, params, float(doc.get("base_mva", 100.0)), str(doc.get("name", "case")))
    return validate_case(case)


def case_to_dict(case: NetworkCase) -> dict:
    return {
        "name": case.name,
        "base_mva": case.base_mva,
        "horizon": case.horizon,
        "buses": [{"id": b.id, "reference": b.reference} for b in case.buses],
        "lines": [{"id": l.id, "from_bus": l.from_bus, "to_bus": l.to_bus,
                   "reactance": l.reactance, "flow_limit": l.flow_limit} for l in case.lines],
        "generators": [{"id": g.id, "bus": g.bus, "p_min": g.p_min, "p_max": g.p_max,
                        "segments": [list(s) for s in g.segments]} for g in case.generators],
        "solar": [{"id": s.id, "bus": s.bus, "nominal": list(s.nominal),
                   "deviation": list(s.deviation)} for s in case.solar],
        "demands": [{"bus": d.bus, "nominal": list(d.nominal), "deviation": list(d.deviation)}
                    for d in case.demands],
        "fire_scores": {str(lid): list(row) for lid, row in
                        zip(case.fire_scores.line_ids, case.fire_scores.scores)},
        "robust_params": case.params.to_dict(),
    }


def load_case(path) -> NetworkCase:
    """Parse and validate a JSON case file (scores inline or via a CSV path)."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CaseError(f"not valid JSON: {exc}", str(path)) from None
    return case_from_dict(doc, base_dir=path.parent)


def dump_case(case: NetworkCase, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(case_to_dict(case), fh, indent=1)
        fh.write("\n")


def shipped_case_path(name: str = "case6.json") -> Path:
    """Path of a case file bundled with the package."""
    from importlib.resources import files

    return Path(str(files("firegrid") / "data" / name))
