"""Vertex realizations of the demand/solar uncertainty set."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dispatch import deviation_profiles, nominal_profiles
from .grid import NetworkCase


class RealizationError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class UncertaintyRealization:
    """Deviation indicators and the profiles they produce.

    ``u_demand`` marks demand raised by its deviation, ``u_solar`` marks
    solar availability lowered by its deviation.  The opposite-direction
    indicators ``v_*`` are carried for bookkeeping and are zero for every
    realization the adversary produces.
    """

    u_demand: np.ndarray   # (demands, T) int8
    v_demand: np.ndarray
    u_solar: np.ndarray    # (solar, T) int8
    v_solar: np.ndarray
    demand: np.ndarray     # realized MW
    solar: np.ndarray      # realized available MW

    @classmethod
    def from_indicators(cls, case: NetworkCase, u_demand=None, u_solar=None,
                        v_demand=None, v_solar=None) -> "UncertaintyRealization":
        d0, s0 = nominal_profiles(case)
        dd, ds = deviation_profiles(case)

        def ind(a, shape):
            if a is None:
                return np.zeros(shape, dtype=np.int8)
            a = np.asarray(a)
            if a.shape != shape:
                raise RealizationError(f"indicator shape {a.shape} != {shape}")
            if not np.all((a == 0) | (a == 1)):
                raise RealizationError("indicators must be 0/1")
            return a.astype(np.int8)

        ud, vd = ind(u_demand, d0.shape), ind(v_demand, d0.shape)
        us, vs = ind(u_solar, s0.shape), ind(v_solar, s0.shape)
        if np.any(ud + vd > 1) or np.any(us + vs > 1):
            raise RealizationError("u and v may not both be set for the same entry")
        demand = d0 + dd * ud - dd * vd
        solar = np.maximum(s0 - ds * us + ds * vs, 0.0)
        return cls(ud, vd, us, vs, demand, solar)

    @classmethod
    def nominal(cls, case: NetworkCase) -> "UncertaintyRealization":
        return cls.from_indicators(case)

    @property
    def budget_used(self) -> int:
        return int(self.u_demand.sum() + self.u_solar.sum())

    def key(self) -> bytes:
        return b"|".join(np.ascontiguousarray(a, dtype=np.int8).tobytes()
                         for a in (self.u_demand, self.v_demand, self.u_solar, self.v_solar))

    def __eq__(self, other) -> bool:
        return isinstance(other, UncertaintyRealization) and self.key() == other.key()

    def __hash__(self) -> int:
        return hash(self.key())

    def to_dict(self, case: NetworkCase) -> dict:
        return {
            "budget_used": self.budget_used,
            "demand_up": {str(d.bus): [int(h + 1) for h in np.flatnonzero(self.u_demand[k])]
                          for k, d in enumerate(case.demands)},
            "solar_down": {str(s.id): [int(h + 1) for h in np.flatnonzero(self.u_solar[k])]
                           for k, s in enumerate(case.solar)},
            "demand_mw": {str(d.bus): [round(float(v), 9) for v in self.demand[k]]
                          for k, d in enumerate(case.demands)},
            "solar_mw": {str(s.id): [round(float(v), 9) for v in self.solar[k]]
                         for k, s in enumerate(case.solar)},
        }
