"""Stochastic trip-request generation.

Requests arrive as a Poisson process; origins are drawn in proportion to
tract population, destinations from a power-law gravity kernel, and group
sizes uniformly up to a configured maximum. All functions take an explicit
``numpy.random.Generator`` and never touch global random state.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from .errors import EmptyPopulation, NoCandidate, NonPositiveRate, ValidationError
from .net import RouteNetwork

WALKING = "walking"
WAITING = "waiting"
ONBOARD = "onboard"
SATISFIED = "satisfied"
UNSATISFIED = "unsatisfied"
REJECTED = "rejected"

TERMINAL_STATES = (SATISFIED, UNSATISFIED, REJECTED)

_TRANSITIONS = {
    WALKING: (WAITING, REJECTED, UNSATISFIED),
    WAITING: (ONBOARD, UNSATISFIED),
    ONBOARD: (SATISFIED,),
}


@dataclass(frozen=True)
class CensusTract:
    id: int
    x: float
    y: float
    area_km2: float
    population: int

    @property
    def centroid(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class DemandConfig:
    rate: float  # requests per hour
    max_group_size: int
    max_wait: float  # min
    max_walk: float  # km
    walk_speed: float = 5.0  # km/h
    gravity_exponent: float = 2.0
    origin_weighting: str = "population"  # or "density" (population / area)

    def __post_init__(self):
        for name in ("rate", "max_wait", "max_walk", "walk_speed", "gravity_exponent"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"demand.{name}", "must be > 0")
        if int(self.max_group_size) != self.max_group_size or self.max_group_size < 1:
            raise ValidationError("demand.max_group_size", "must be an integer >= 1")
        if self.origin_weighting not in ("population", "density"):
            raise ValidationError("demand.origin_weighting", "must be 'population' or 'density'")


@dataclass
class PassengerGroup:
    id: int
    size: int
    origin: tuple[float, float]
    destination: tuple[float, float]
    origin_tract: int
    destination_tract: int
    origin_stop: int
    destination_stop: int
    walk_in_km: float
    walk_out_km: float
    t_request: float
    t_arrive_stop: float
    walk_out_min: float
    t_board: float | None = None
    t_alight: float | None = None
    vehicle: int | None = None
    in_transit: bool = False  # still aboard when the drain cap forced the run to end
    state: str = WALKING

    def transition(self, new_state: str) -> None:
        if new_state not in _TRANSITIONS.get(self.state, ()):
            raise ValueError(f"group {self.id}: illegal transition {self.state} -> {new_state}")
        self.state = new_state


class TractSet:
    """Tracts sorted by id, with the sampling tables precomputed."""

    def __init__(self, tracts: Iterable[CensusTract], gravity_exponent: float = 2.0, origin_weighting: str = "population"):
        self.tracts = tuple(sorted(tracts, key=lambda t: t.id))
        if not self.tracts:
            raise EmptyPopulation("no tracts")
        self.gravity_exponent = float(gravity_exponent)
        self.origin_weighting = origin_weighting
        self.ids = np.array([t.id for t in self.tracts], dtype=np.int64)
        self.xy = np.array([[t.x, t.y] for t in self.tracts], dtype=float)
        self.population = np.array([t.population for t in self.tracts], dtype=float)
        self.area = np.array([t.area_km2 for t in self.tracts], dtype=float)
        self._index = {int(t): i for i, t in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.tracts)

    def index(self, tract_id: int) -> int:
        return self._index[tract_id]

    @cached_property
    def origin_weights(self) -> np.ndarray:
        if self.origin_weighting == "density":
            return self.population / self.area
        return self.population.copy()

    @cached_property
    def _origin_cum(self) -> np.ndarray:
        return np.cumsum(self.origin_weights)

    @cached_property
    def distances(self) -> np.ndarray:
        diff = self.xy[:, None, :] - self.xy[None, :, :]
        return np.hypot(diff[..., 0], diff[..., 1])

    @cached_property
    def destination_weights(self) -> np.ndarray:
        """Row i: unnormalised probability of each destination given origin i."""
        d = self.distances.copy()
        n = len(self)
        np.fill_diagonal(d, 1.0)
        if np.any(d[~np.eye(n, dtype=bool)] <= 0):
            raise NoCandidate("two tracts share a centroid; gravity weight undefined")
        w = self.population[None, :] / d ** self.gravity_exponent
        np.fill_diagonal(w, 0.0)
        return w

    @cached_property
    def _destination_cum(self) -> np.ndarray:
        return np.cumsum(self.destination_weights, axis=1)


def as_tract_set(tracts, gravity_exponent: float = 2.0, origin_weighting: str = "population") -> TractSet:
    if isinstance(tracts, TractSet):
        return tracts
    return TractSet(tracts, gravity_exponent, origin_weighting)


def _draw_index(cum: np.ndarray, rng: np.random.Generator) -> int:
    # side="right" keeps zero-weight entries (zero-width intervals) unreachable
    u = rng.random() * cum[-1]
    return min(int(np.searchsorted(cum, u, side="right")), len(cum) - 1)


def next_interarrival(rate: float, rng: np.random.Generator) -> float:
    """Minutes until the next request for a Poisson stream of ``rate`` per hour."""
    if not rate > 0:
        raise NonPositiveRate(f"rate must be > 0, got {rate}")
    return float(rng.exponential(60.0 / rate))


def sample_origin(tracts, rng: np.random.Generator) -> tuple[int, tuple[float, float]]:
    ts = as_tract_set(tracts)
    cum = ts._origin_cum
    if not cum[-1] > 0:
        raise EmptyPopulation("total population is zero")
    i = _draw_index(cum, rng)
    t = ts.tracts[i]
    return t.id, t.centroid


def sample_destination(origin_tract: int, tracts, rng: np.random.Generator) -> tuple[int, tuple[float, float]]:
    """Gravity draw: tract j != origin with weight population_j / d_ij ** alpha."""
    ts = as_tract_set(tracts)
    if origin_tract not in ts._index:
        raise NoCandidate(f"unknown origin tract {origin_tract}")
    if len(ts) < 2:
        raise NoCandidate("no destination tract other than the origin")
    cum = ts._destination_cum[ts.index(origin_tract)]
    if not cum[-1] > 0:
        raise NoCandidate(f"all candidate destinations of tract {origin_tract} have zero population")
    j = _draw_index(cum, rng)
    t = ts.tracts[j]
    return t.id, t.centroid


def sample_group_size(max_group_size: int, rng: np.random.Generator) -> int:
    return int(rng.integers(1, max_group_size + 1))


def generate_request(
    t_now: float,
    config: DemandConfig,
    tracts,
    network: RouteNetwork,
    rng: np.random.Generator,
    group_id: int = 0,
) -> PassengerGroup:
    """Draw one request at time ``t_now`` (min): origin, destination, then size."""
    ts = as_tract_set(tracts, config.gravity_exponent, config.origin_weighting)
    o_id, o_pt = sample_origin(ts, rng)
    d_id, d_pt = sample_destination(o_id, ts, rng)
    size = sample_group_size(config.max_group_size, rng)
    o_stop, walk_in = network.nearest_stop(o_pt)
    d_stop, walk_out = network.nearest_stop(d_pt)
    return PassengerGroup(
        id=group_id,
        size=size,
        origin=o_pt,
        destination=d_pt,
        origin_tract=o_id,
        destination_tract=d_id,
        origin_stop=o_stop,
        destination_stop=d_stop,
        walk_in_km=walk_in,
        walk_out_km=walk_out,
        t_request=t_now,
        t_arrive_stop=t_now + walk_in / config.walk_speed * 60.0,
        walk_out_min=walk_out / config.walk_speed * 60.0,
    )
