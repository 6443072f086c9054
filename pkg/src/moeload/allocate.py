"""Integer resource plans from predicted load proportions.

Largest-remainder apportionment: every expert gets the floor of its
fractional target, and the leftover units go to the largest remainders,
ties won by the lower expert index. The headroom mode adds each expert's
recent load range to its target before renormalizing, reserving slack for
bursts during the transient phase.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleMinimum, InvalidConfig, LengthMismatch
from .trace import _freeze

SIMPLEX_TOL = 1e-9

PLAN_MODES = ("proportional", "headroom")


@dataclass(frozen=True)
class AllocationPlan:
    layer_id: int
    units_per_expert: np.ndarray
    total_units: int
    mode: str

    def __post_init__(self):
        units = _freeze(np.asarray(self.units_per_expert, dtype=np.int64))
        if units.ndim != 1 or (units < 0).any():
            raise InvalidConfig("units_per_expert must be 1-D and non-negative")
        if int(units.sum()) != self.total_units:
            raise InvalidConfig(f"units sum to {int(units.sum())}, not total_units {self.total_units}")
        if self.mode not in PLAN_MODES:
            raise InvalidConfig(f"mode must be one of {PLAN_MODES}")
        object.__setattr__(self, "units_per_expert", units)


def _check_simplex(proportions) -> np.ndarray:
    p = np.asarray(proportions, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise InvalidConfig("proportions must be a non-empty 1-D array")
    if (p < 0).any() or abs(p.sum() - 1.0) > SIMPLEX_TOL:
        raise InvalidConfig("proportions must be non-negative and sum to 1")
    return p


def _largest_remainder(targets: np.ndarray, spare: int) -> np.ndarray:
    base = np.floor(targets).astype(np.int64)
    leftover = spare - int(base.sum())
    # stable sort on descending remainder keeps lower indices first on ties
    order = np.argsort(-(targets - base), kind="stable")
    base[order[:leftover]] += 1
    return base


def allocate(pred_proportions, total_units: int, min_units: int = 0,
             layer_id: int = 0) -> AllocationPlan:
    """Apportion total_units to experts proportionally to their predicted
    load, after reserving min_units for each."""
    p = _check_simplex(pred_proportions)
    if min_units < 0 or total_units < 0:
        raise InvalidConfig("total_units and min_units must be non-negative")
    spare = total_units - p.size * min_units
    if spare < 0:
        raise InfeasibleMinimum(
            f"{total_units} units cannot give {p.size} experts {min_units} each")
    units = min_units + _largest_remainder(p * spare, spare)
    return AllocationPlan(layer_id, units, total_units, "proportional")


def headroom_allocate(pred_proportions, recent_range_per_expert, total_units: int,
                      min_units: int = 0, layer_id: int = 0) -> AllocationPlan:
    """Like allocate, but targets are proportional to prediction plus the
    expert's recent windowed range, renormalized."""
    p = _check_simplex(pred_proportions)
    r = np.asarray(recent_range_per_expert, dtype=np.float64)
    if r.shape != p.shape:
        raise LengthMismatch(f"ranges shape {r.shape} != proportions shape {p.shape}")
    if (r < 0).any() or not np.isfinite(r).all():
        raise InvalidConfig("ranges must be finite and non-negative")
    if min_units < 0 or total_units < 0:
        raise InvalidConfig("total_units and min_units must be non-negative")
    spare = total_units - p.size * min_units
    if spare < 0:
        raise InfeasibleMinimum(
            f"{total_units} units cannot give {p.size} experts {min_units} each")
    q = (p + r) / (p + r).sum()
    units = min_units + _largest_remainder(q * spare, spare)
    return AllocationPlan(layer_id, units, total_units, "headroom")
