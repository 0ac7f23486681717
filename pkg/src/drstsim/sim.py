"""Discrete-time simulation engine.

Time advances in fixed ticks (minutes). Inside a tick, node crossings are
resolved at their exact continuous times and processed in global time order
(ties by vehicle id), so results converge as the tick shrinks. Two rng
streams are spawned from the scenario seed: one for demand, one for the
fleet (initial placement, random-behaving subset, random diversions). The
demand sequence is therefore identical across strategies for a given seed.

Per tick, in order:
  1. generate requests due in the tick and log them;
  2. reject those whose origin or destination is beyond walking range;
  3. move walking groups, enqueueing those that reach their stop;
  4. advance vehicles, processing each crossed node (alight, board, divert);
  5. expire groups that waited longer than ``max_wait``;
  6. close the tick (odometer, load-distance, busy time).
"""

from __future__ import annotations

import heapq
import json
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import metrics
from .demand import (
    ONBOARD,
    REJECTED,
    SATISFIED,
    UNSATISFIED,
    WAITING,
    DemandConfig,
    PassengerGroup,
    TractSet,
    as_tract_set,
    generate_request,
    next_interarrival,
)
from .errors import ValidationError
from .net import DIVERSION, STOP, Plan, RouteNetwork
from .strategy import STAY, RouteView, StrategyConfig, VehicleAssignment, assign_vehicles, decide_diversion

DRAIN_CAP_H = 2.0

EVENT_KINDS = (
    "request",
    "reject",
    "arrive_stop",
    "board",
    "alight",
    "give_up",
    "divert",
    "rejoin",
    "vehicle_move",
)


@dataclass(frozen=True)
class ScenarioConfig:
    total_time: float  # h of demand generation
    n_vehicles: int
    capacity: int
    speed: float  # km/h
    demand: DemandConfig
    strategy: StrategyConfig
    seed: int = 0
    tick: float = 0.1  # min
    costs: metrics.CostParams = field(default_factory=metrics.CostParams)

    def __post_init__(self):
        if not self.total_time >= 0:
            raise ValidationError("total_time", "must be >= 0")
        if int(self.n_vehicles) != self.n_vehicles or self.n_vehicles < 1:
            raise ValidationError("n_vehicles", "must be an integer >= 1")
        if int(self.capacity) != self.capacity or self.capacity < 1:
            raise ValidationError("capacity", "must be an integer >= 1")
        if not self.speed > 0:
            raise ValidationError("speed", "must be > 0")
        if not 0 < self.tick <= 1.0:
            raise ValidationError("tick", "must lie in (0, 1] min")


@dataclass(slots=True)
class SimEvent:
    t: float
    seq: int
    kind: str
    data: dict

    def to_json(self) -> str:
        return json.dumps({"seq": self.seq, "t": self.t, "kind": self.kind, **self.data}, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "SimEvent":
        d = json.loads(line)
        return cls(t=d.pop("t"), seq=d.pop("seq"), kind=d.pop("kind"), data=d)


@dataclass
class StopQueue:
    """Waiting groups at one stop, ordered by (t_arrive_stop, group id)."""

    stop_id: int
    groups: list[PassengerGroup] = field(default_factory=list)
    _keys: list[tuple[float, int]] = field(default_factory=list)

    def push(self, group: PassengerGroup) -> None:
        key = (group.t_arrive_stop, group.id)
        i = bisect_left(self._keys, key)
        self._keys.insert(i, key)
        self.groups.insert(i, group)

    def remove(self, group: PassengerGroup) -> None:
        i = self.groups.index(group)
        del self.groups[i]
        del self._keys[i]

    def __len__(self) -> int:
        return len(self.groups)

    def __iter__(self):
        return iter(list(self.groups))


@dataclass
class Vehicle:
    id: int
    capacity: int
    speed: float  # km/h
    assignment: VehicleAssignment
    plan: Plan
    idx: int  # index in plan of the last node reached
    offset: float  # km along plan
    t_pos: float = 0.0  # min, time at which offset was last updated
    onboard: list[PassengerGroup] = field(default_factory=list)
    load: int = 0
    odometer: float = 0.0
    load_distance: float = 0.0
    busy_time: float = 0.0  # h
    flex_route: int | None = None
    routes_taken: list[int] = field(default_factory=list)

    @property
    def free_seats(self) -> int:
        return self.capacity - self.load

    @property
    def km_per_min(self) -> float:
        return self.speed / 60.0

    def distance_to_next(self) -> float:
        return self.plan.cum[self.idx + 1] - self.offset

    def advance(self, dist: float) -> None:
        self.offset += dist
        self.odometer += dist
        self.load_distance += self.load * dist


def classify_request(group: PassengerGroup, network: RouteNetwork, max_walk: float) -> str:
    """'rejected' if either walk to the nearest stop exceeds ``max_walk`` km."""
    _, walk_in = network.nearest_stop(group.origin)
    _, walk_out = network.nearest_stop(group.destination)
    return "rejected" if walk_in > max_walk or walk_out > max_walk else "accepted"


def init_fleet(
    config: ScenarioConfig,
    network: RouteNetwork,
    strategy: StrategyConfig,
    rng: np.random.Generator,
) -> list[Vehicle]:
    """Place vehicles at random fixed-route stops, then assign strategy modes.

    Starting stops come from one random permutation of the fixed-route stops,
    cycled when the fleet outnumbers them: each vehicle's stop is uniform,
    and no two vehicles share one unless they have to.
    """
    stops = network.fixed_stops
    if not stops:
        raise ValidationError("network.fixed_route", "fixed route has no stops to place vehicles on")
    ids = list(range(1, config.n_vehicles + 1))
    order = rng.permutation(len(stops))
    starts = [stops[int(order[i % len(stops)])] for i in range(len(ids))]
    assignments = assign_vehicles(strategy, ids, sorted(network.flex_routes), rng)
    plan = network.fixed_plan
    fleet = []
    for vid, start, asg in zip(ids, starts, assignments):
        i = plan.index_of(start)
        fleet.append(
            Vehicle(
                id=vid,
                capacity=int(config.capacity),
                speed=float(config.speed),
                assignment=asg,
                plan=plan,
                idx=i,
                offset=plan.cum[i],
            )
        )
    return fleet


def board_at_stop(
    vehicle: Vehicle,
    stop_queue: StopQueue,
    t: float,
    max_wait: float = math.inf,
) -> list[tuple[float, str, dict]]:
    """Board waiting groups front to back, skipping any that do not fit.

    Only groups already at the stop at ``t`` and not past their waiting limit
    are eligible. Groups are never split.
    """
    events = []
    for g in stop_queue:
        if vehicle.free_seats <= 0:
            break
        if g.t_arrive_stop > t or t - g.t_arrive_stop > max_wait:
            continue
        if g.size > vehicle.free_seats:
            continue
        stop_queue.remove(g)
        g.transition(ONBOARD)
        g.t_board = t
        g.vehicle = vehicle.id
        vehicle.onboard.append(g)
        vehicle.load += g.size
        assert vehicle.load <= vehicle.capacity
        events.append(
            (t, "board", {"group": g.id, "vehicle": vehicle.id, "stop": stop_queue.stop_id, "size": g.size, "load": vehicle.load})
        )
    return events


def alight_at_stop(vehicle: Vehicle, stop: int, t: float) -> list[tuple[float, str, dict]]:
    events = []
    staying = []
    for g in vehicle.onboard:
        if g.destination_stop == stop:
            vehicle.load -= g.size
            g.transition(SATISFIED)
            g.t_alight = t
            events.append(
                (t, "alight", {"group": g.id, "vehicle": vehicle.id, "stop": stop, "size": g.size, "load": vehicle.load, "in_transit": False})
            )
        else:
            staying.append(g)
    vehicle.onboard = staying
    return events


def expire_waiting(
    stop_queues: Iterable[StopQueue], t: float, max_wait: float
) -> list[tuple[float, str, dict]]:
    """Groups that have waited strictly longer than ``max_wait`` give up."""
    events = []
    for q in stop_queues:
        for g in q:
            if t - g.t_arrive_stop > max_wait:
                q.remove(g)
                g.transition(UNSATISFIED)
                events.append((t, "give_up", {"group": g.id, "stop": q.stop_id, "size": g.size}))
    return events


class World:
    """Mutable simulation state for one run; advanced by :meth:`step`."""

    def __init__(self, scenario: ScenarioConfig, network: RouteNetwork, tracts):
        self.scenario = scenario
        self.network = network
        self.tracts: TractSet = as_tract_set(
            tracts, scenario.demand.gravity_exponent, scenario.demand.origin_weighting
        )
        demand_seq, fleet_seq = np.random.SeedSequence(scenario.seed).spawn(2)
        self.demand_rng = np.random.Generator(np.random.PCG64(demand_seq))
        self.fleet_rng = np.random.Generator(np.random.PCG64(fleet_seq))

        self.vehicles = init_fleet(scenario, network, scenario.strategy, self.fleet_rng)
        self.queues = {s: StopQueue(s) for s in network.stops}
        self.groups: list[PassengerGroup] = []
        self._walking: list[tuple[float, int, PassengerGroup]] = []
        self._stop_routes = {rid: network.route_stops(rid) for rid in network.flex_routes}
        self._route_stop_sets = {rid: frozenset(s) for rid, s in self._stop_routes.items()}

        self.demand_end = scenario.total_time * 60.0
        self.hard_cap = self.demand_end + DRAIN_CAP_H * 60.0
        self.k = 0  # ticks completed
        self.t = 0.0
        self.seq = 0
        self.finished = False
        self._next_request = next_interarrival(scenario.demand.rate, self.demand_rng)

    # -- helpers --------------------------------------------------------

    def start_events(self) -> list[SimEvent]:
        raw = []
        for v in self.vehicles:
            a = v.assignment
            raw.append(
                (0.0, "vehicle_move", {
                    "vehicle": v.id, "phase": "start", "node": v.plan.node_at(v.idx),
                    "odometer": 0.0, "load": 0, "capacity": v.capacity,
                    "mode": a.mode, "assigned_route": a.assigned_flex_route,
                })
            )
        return self._seal(raw)

    def _seal(self, raw: list[tuple[float, str, dict]]) -> list[SimEvent]:
        raw.sort(key=lambda e: e[0])  # stable: creation order breaks ties
        out = []
        for t, kind, data in raw:
            out.append(SimEvent(t, self.seq, kind, data))
            self.seq += 1
        return out

    def active_groups(self) -> bool:
        return bool(self._walking) or any(len(q) for q in self.queues.values()) or any(v.onboard for v in self.vehicles)

    def _world_view(self, node: int, vehicle: Vehicle, t: float) -> dict[int, RouteView]:
        max_wait = self.scenario.demand.max_wait
        view = {}
        dests = {g.destination_stop for g in vehicle.onboard}
        for rid in self.network.routes_at[node]:
            waiting = any(
                g.t_arrive_stop <= t and t - g.t_arrive_stop <= max_wait
                for s in self._stop_routes[rid]
                for g in self.queues[s].groups
            )
            view[rid] = RouteView(waiting_users=waiting, onboard_destinations=bool(dests & self._route_stop_sets[rid]))
        return view

    # -- tick phases ----------------------------------------------------

    def _generate(self, t1: float, raw: list) -> None:
        cfg = self.scenario.demand
        while self._next_request <= t1 and self._next_request <= self.demand_end:
            tr = self._next_request
            g = generate_request(tr, cfg, self.tracts, self.network, self.demand_rng, group_id=len(self.groups) + 1)
            self.groups.append(g)
            raw.append((tr, "request", {
                "group": g.id, "size": g.size,
                "origin_tract": g.origin_tract, "destination_tract": g.destination_tract,
                "origin_stop": g.origin_stop, "destination_stop": g.destination_stop,
                "walk_in_km": g.walk_in_km, "walk_out_km": g.walk_out_km,
                "t_arrive_stop": g.t_arrive_stop, "walk_out_min": g.walk_out_min,
            }))
            if g.walk_in_km > cfg.max_walk or g.walk_out_km > cfg.max_walk:
                g.transition(REJECTED)
                raw.append((tr, "reject", {"group": g.id, "size": g.size}))
            else:
                heapq.heappush(self._walking, (g.t_arrive_stop, g.id, g))
            self._next_request = tr + next_interarrival(cfg.rate, self.demand_rng)

    def _arrivals(self, t1: float, raw: list) -> None:
        while self._walking and self._walking[0][0] <= t1:
            _, _, g = heapq.heappop(self._walking)
            g.transition(WAITING)
            self.queues[g.origin_stop].push(g)
            raw.append((g.t_arrive_stop, "arrive_stop", {"group": g.id, "stop": g.origin_stop, "size": g.size}))

    def _process_node(self, v: Vehicle, tau: float, raw: list) -> None:
        plan = v.plan
        node = plan.node_at(v.idx)
        raw.append((tau, "vehicle_move", {"vehicle": v.id, "phase": "node", "node": node, "odometer": v.odometer, "load": v.load}))

        if not plan.closed and v.idx == len(plan.nodes) - 1:
            # reached the exit of a branch: back onto the fixed loop
            raw.append((tau, "rejoin", {"vehicle": v.id, "node": node, "route": v.flex_route}))
            fixed = self.network.fixed_plan
            v.plan = fixed
            v.idx = fixed.index_of(node)
            v.offset = fixed.cum[v.idx]
            v.flex_route = None

        kind = self.network.nodes[node].kind
        if kind == STOP:
            raw.extend(alight_at_stop(v, node, tau))
            raw.extend(board_at_stop(v, self.queues[node], tau, self.scenario.demand.max_wait))
        elif kind == DIVERSION and v.plan.closed:
            view = self._world_view(node, v, tau)
            choice = decide_diversion(v.assignment, self.scenario.strategy, node, node, view, self.fleet_rng)
            if choice is not STAY:
                v.plan = self.network.flex_plans[choice]
                v.idx = 0
                v.offset = 0.0
                v.flex_route = choice
                v.routes_taken.append(choice)
                raw.append((tau, "divert", {
                    "vehicle": v.id, "node": node, "route": choice, "load": v.load,
                    "forced": view[choice].onboard_destinations,
                }))

    def _move_vehicles(self, t1: float, raw: list) -> None:
        heap = []
        for v in self.vehicles:
            tau = v.t_pos + v.distance_to_next() / v.km_per_min
            if tau <= t1:
                heap.append((tau, v.id, v))
        heapq.heapify(heap)
        while heap:
            tau, _, v = heapq.heappop(heap)
            v.advance(v.distance_to_next())
            v.idx += 1
            v.t_pos = tau
            if v.plan.closed and v.idx == len(v.plan.nodes):
                v.idx = 0
                v.offset = 0.0
            else:
                v.offset = v.plan.cum[v.idx]
            self._process_node(v, tau, raw)
            nxt = v.t_pos + v.distance_to_next() / v.km_per_min
            if nxt <= t1:
                heapq.heappush(heap, (nxt, v.id, v))
        for v in self.vehicles:
            v.advance((t1 - v.t_pos) * v.km_per_min)
            v.t_pos = t1

    def step(self) -> list[SimEvent]:
        """Advance one tick; returns the tick's events in log order."""
        tick = self.scenario.tick
        self.k += 1
        t1 = self.k * tick
        raw: list[tuple[float, str, dict]] = []
        self._generate(t1, raw)
        self._arrivals(t1, raw)
        self._move_vehicles(t1, raw)
        queues = [self.queues[s] for s in sorted(self.queues)]
        raw.extend(expire_waiting(queues, t1, self.scenario.demand.max_wait))
        busy = self.k * tick / 60.0
        for v in self.vehicles:
            v.busy_time = busy
        self.t = t1

        if t1 >= self.demand_end and self._next_request > self.demand_end and not self.active_groups():
            self.finished = True
        elif t1 >= self.hard_cap:
            raw.extend(self._force_close(t1))
            self.finished = True
        return self._seal(raw)

    def _force_close(self, t: float) -> list:
        raw = []
        for v in self.vehicles:
            for g in v.onboard:
                v.load -= g.size
                g.transition(SATISFIED)
                g.t_alight = t
                g.in_transit = True
                raw.append((t, "alight", {"group": g.id, "vehicle": v.id, "stop": None, "size": g.size, "load": v.load, "in_transit": True}))
            v.onboard = []
        for s in sorted(self.queues):
            q = self.queues[s]
            for g in q:
                q.remove(g)
                g.transition(UNSATISFIED)
                raw.append((t, "give_up", {"group": g.id, "stop": s, "size": g.size}))
        while self._walking:
            _, _, g = heapq.heappop(self._walking)
            g.transition(UNSATISFIED)
            raw.append((t, "give_up", {"group": g.id, "stop": None, "size": g.size}))
        return raw

    def end_events(self) -> list[SimEvent]:
        raw = [
            (self.t, "vehicle_move", {
                "vehicle": v.id, "phase": "end", "node": None,
                "odometer": v.odometer, "load": v.load, "busy_h": v.busy_time,
            })
            for v in self.vehicles
        ]
        return self._seal(raw)

    def totals(self) -> metrics.RawTotals:
        """Totals straight from engine state (independent of the event log)."""
        t = metrics.RawTotals(duration_h=self.t / 60.0)
        for g in self.groups:
            t.add_group(g.size, g.state, g.t_request, g.t_arrive_stop, g.t_board, g.t_alight, g.walk_out_min, g.in_transit)
        for v in self.vehicles:
            t.add_vehicle(v.id, v.capacity, v.odometer, v.load_distance, v.busy_time)
        return t


@dataclass
class SimResult:
    events: list[SimEvent]
    indicators: metrics.Indicators
    totals: metrics.RawTotals
    groups: list[PassengerGroup]
    vehicles: list[Vehicle]

    def log_lines(self) -> list[str]:
        return [e.to_json() for e in self.events]


def run(scenario: ScenarioConfig, network: RouteNetwork, tracts) -> SimResult:
    """Simulate until demand stops and every group has finished (or the drain cap)."""
    world = World(scenario, network, tracts)
    events: list[SimEvent] = []
    if scenario.total_time > 0:
        events.extend(world.start_events())
        while not world.finished:
            events.extend(world.step())
        events.extend(world.end_events())
    totals = world.totals()
    indicators = metrics.compute_indicators(totals, scenario.costs)
    return SimResult(events, indicators, totals, world.groups, world.vehicles)
