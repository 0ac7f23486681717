"""Route choice strategies applied at diversion nodes.

FR    every vehicle picks uniformly among staying and each branch entered here.
AVAR  any vehicle takes a branch that has users waiting on it.
EVAR  each vehicle serves only the branch it was assigned to.

Under AVAR and EVAR a fraction ``randomness_p`` of the fleet behaves like FR.
Regardless of strategy, a vehicle carrying a passenger bound for a branch
entered here always takes that branch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import NoFlexRoutes, NotAtDiversionNode, ValidationError

FR = "FR"
AVAR = "AVAR"
EVAR = "EVAR"
KINDS = (FR, AVAR, EVAR)

DETERMINISTIC = "deterministic"
RANDOM_BEHAVING = "random_behaving"

STAY = None  # decision value for "stay on the fixed route"


@dataclass(frozen=True)
class StrategyConfig:
    kind: str = EVAR
    randomness_p: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError("strategy.kind", f"must be one of {KINDS}, got {self.kind!r}")
        if not 0.0 <= self.randomness_p <= 1.0:
            raise ValidationError("strategy.randomness_p", "must lie in [0, 1]")


@dataclass(frozen=True)
class VehicleAssignment:
    vehicle_id: int
    mode: str
    assigned_flex_route: int | None = None


@dataclass(frozen=True)
class RouteView:
    """What a vehicle at a diversion node knows about one branch entered there."""

    waiting_users: bool
    onboard_destinations: bool


def assign_vehicles(
    strategy: StrategyConfig,
    vehicle_ids: Sequence[int],
    flex_route_ids: Sequence[int],
    rng: np.random.Generator,
) -> list[VehicleAssignment]:
    """Pick the random-behaving subset, then hand out EVAR branches round-robin.

    The subset is drawn even for FR so that a given seed consumes the same
    draws whatever the strategy.
    """
    ids = sorted(vehicle_ids)
    if not ids:
        raise ValidationError("n_vehicles", "at least one vehicle is required")
    routes = sorted(flex_route_ids)
    if strategy.kind == EVAR and not routes:
        raise NoFlexRoutes("EVAR needs at least one flexible route")

    n_random = int(round(strategy.randomness_p * len(ids)))
    picked = rng.choice(len(ids), size=n_random, replace=False) if n_random else ()
    random_ids = {ids[int(i)] for i in picked}

    out = []
    k = 0
    for vid in ids:
        if vid in random_ids:
            out.append(VehicleAssignment(vid, RANDOM_BEHAVING))
        elif strategy.kind == EVAR:
            out.append(VehicleAssignment(vid, DETERMINISTIC, routes[k % len(routes)]))
            k += 1
        else:
            out.append(VehicleAssignment(vid, DETERMINISTIC))
    return out


def decide_diversion(
    assignment: VehicleAssignment,
    strategy: StrategyConfig,
    vehicle_node: int,
    diversion_node: int,
    world_view: Mapping[int, RouteView],
    rng: np.random.Generator,
) -> int | None:
    """Return the branch id to take, or ``STAY``.

    ``world_view`` maps every branch entered at ``diversion_node`` to its
    current RouteView. The rng is drawn from only for random behaviour.
    """
    if vehicle_node != diversion_node or not world_view:
        raise NotAtDiversionNode(f"vehicle at {vehicle_node} is not at diversion node {diversion_node}")
    routes = sorted(world_view)

    for rid in routes:
        if world_view[rid].onboard_destinations:
            return rid

    if strategy.kind == FR or assignment.mode == RANDOM_BEHAVING:
        options = [STAY, *routes]
        return options[int(rng.integers(len(options)))]

    if strategy.kind == AVAR:
        for rid in routes:
            if world_view[rid].waiting_users:
                return rid
        return STAY

    target = assignment.assigned_flex_route
    if target in world_view and (world_view[target].waiting_users or world_view[target].onboard_destinations):
        return target
    return STAY
