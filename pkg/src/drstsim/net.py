"""Route network: a one-directional fixed loop plus flexible branch routes.

Coordinates are planar, in km. Vehicles only ever travel along the declared
routes, so the network is a set of node sequences rather than a general
street graph.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import BrokenRoute, DanglingReference, NetworkError, NoStops, OffsetOutOfRange

PLAIN = "plain"
STOP = "stop"
DIVERSION = "diversion"
NODE_KINDS = (PLAIN, STOP, DIVERSION)

LENGTH_TOL = 1e-9


@dataclass(frozen=True)
class Node:
    id: int
    x: float
    y: float
    kind: str = PLAIN

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True)
class Link:
    a: int
    b: int
    length: float


@dataclass(frozen=True)
class FlexRoute:
    """A branch traversed entry -> intermediate nodes -> exit.

    ``nodes`` holds the full traversal including the entry (a diversion node
    on the fixed route) and the exit (where the vehicle rejoins the loop).
    """

    id: int
    nodes: tuple[int, ...]

    @property
    def entry(self) -> int:
        return self.nodes[0]

    @property
    def exit(self) -> int:
        return self.nodes[-1]

    @property
    def inner(self) -> tuple[int, ...]:
        return self.nodes[1:-1]


@dataclass(frozen=True)
class Plan:
    """A node sequence with cumulative offsets, the unit vehicles move along.

    For a closed plan the traversal returns to ``nodes[0]`` at offset
    ``length``; ``cum`` then has ``len(nodes) + 1`` entries.
    """

    nodes: tuple[int, ...]
    cum: tuple[float, ...]
    closed: bool

    @property
    def length(self) -> float:
        return self.cum[-1]

    def node_at(self, index: int) -> int:
        return self.nodes[index % len(self.nodes)]

    def index_of(self, node_id: int) -> int:
        return self.nodes.index(node_id)

    def segment_index(self, offset: float) -> int:
        """Index of the node that starts the segment containing ``offset``."""
        i = bisect_right(self.cum, offset) - 1
        return min(max(i, 0), len(self.cum) - 2)


def plan_distance(plan: Plan, from_offset: float, to_offset: float) -> float:
    """Distance travelled along ``plan`` going from one offset to another.

    On a closed plan the traversal wraps around the loop; on an open plan
    ``to_offset`` must not lie behind ``from_offset``.
    """
    length = plan.length
    for off in (from_offset, to_offset):
        if not (-LENGTH_TOL <= off <= length + LENGTH_TOL):
            raise OffsetOutOfRange(f"offset {off} outside [0, {length}]")
    d = to_offset - from_offset
    if d >= 0:
        return d
    if plan.closed:
        return d + length
    raise OffsetOutOfRange(f"offset {to_offset} lies behind {from_offset} on an open plan")


@dataclass(frozen=True, eq=False)
class RouteNetwork:
    nodes: Mapping[int, Node]
    links: Mapping[tuple[int, int], Link]
    fixed_route: tuple[int, ...]
    flex_routes: Mapping[int, FlexRoute]

    # derived lookups, filled by build_network
    fixed_plan: Plan = field(repr=False, default=None)
    flex_plans: Mapping[int, Plan] = field(repr=False, default=None)
    routes_at: Mapping[int, tuple[int, ...]] = field(repr=False, default=None)
    stop_route: Mapping[int, int | None] = field(repr=False, default=None)
    _stop_ids: np.ndarray = field(repr=False, default=None)
    _stop_xy: np.ndarray = field(repr=False, default=None)

    @property
    def stops(self) -> tuple[int, ...]:
        return tuple(int(s) for s in self._stop_ids)

    @property
    def fixed_stops(self) -> tuple[int, ...]:
        return tuple(n for n in self.fixed_route if self.nodes[n].kind == STOP)

    @property
    def diversion_nodes(self) -> tuple[int, ...]:
        return tuple(sorted(self.routes_at))

    def link_length(self, a: int, b: int) -> float:
        link = self.links.get((a, b)) or self.links.get((b, a))
        if link is None:
            raise BrokenRoute(f"no link between {a} and {b}")
        return link.length

    def route_stops(self, route_id: int) -> tuple[int, ...]:
        route = self.flex_routes[route_id]
        return tuple(n for n in route.inner if self.nodes[n].kind == STOP)

    def nearest_stop(self, point: Sequence[float]) -> tuple[int, float]:
        return nearest_stop(self, point)

    def nearest_stops(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised nearest_stop over an (n, 2) array of points."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        d = np.hypot(pts[:, None, 0] - self._stop_xy[None, :, 0], pts[:, None, 1] - self._stop_xy[None, :, 1])
        idx = np.argmin(d, axis=1)
        return self._stop_ids[idx], d[np.arange(len(pts)), idx]

    def bounding_box(self) -> tuple[float, float, float, float]:
        xs = [n.x for n in self.nodes.values()]
        ys = [n.y for n in self.nodes.values()]
        return min(xs), min(ys), max(xs), max(ys)


def nearest_stop(network: RouteNetwork, point: Sequence[float]) -> tuple[int, float]:
    """Closest stop to ``point`` by straight-line distance, lowest id on ties."""
    if network._stop_ids is None or len(network._stop_ids) == 0:
        raise NoStops("network has no stops")
    x, y = float(point[0]), float(point[1])
    d = np.hypot(network._stop_xy[:, 0] - x, network._stop_xy[:, 1] - y)
    # stops are stored in ascending id order and argmin returns the first minimum
    i = int(np.argmin(d))
    return int(network._stop_ids[i]), float(d[i])


def _make_plan(network_links: Mapping[tuple[int, int], Link], nodes: Sequence[int], closed: bool, what: str) -> Plan:
    seq = list(nodes) + ([nodes[0]] if closed else [])
    cum = [0.0]
    for a, b in zip(seq, seq[1:]):
        link = network_links.get((a, b)) or network_links.get((b, a))
        if link is None:
            raise BrokenRoute(f"{what}: no link between consecutive nodes {a} and {b}")
        cum.append(cum[-1] + link.length)
    return Plan(nodes=tuple(nodes), cum=tuple(cum), closed=closed)


def build_network(
    nodes: Iterable[Node],
    links: Iterable[tuple[int, int] | tuple[int, int, float | None] | Link],
    fixed_route_ids: Sequence[int],
    flex_route_defs: Mapping[int, Sequence[int]] | Iterable[tuple[int, Sequence[int]]] = (),
) -> RouteNetwork:
    """Assemble and validate a RouteNetwork.

    Links may be given as ``(a, b)``, ``(a, b, length)`` or ``Link``; a missing
    length defaults to the Euclidean distance between the endpoints. The fixed
    route may repeat its first node at the end to make the closure explicit.
    """
    node_map: dict[int, Node] = {}
    for n in nodes:
        if n.id in node_map:
            raise NetworkError(f"duplicate node id {n.id}")
        if n.kind not in NODE_KINDS:
            raise NetworkError(f"node {n.id}: unknown kind {n.kind!r}")
        node_map[n.id] = n

    link_map: dict[tuple[int, int], Link] = {}
    for spec in links:
        if isinstance(spec, Link):
            a, b, length = spec.a, spec.b, spec.length
        else:
            a, b = spec[0], spec[1]
            length = spec[2] if len(spec) > 2 else None
        for end in (a, b):
            if end not in node_map:
                raise DanglingReference(f"link ({a}, {b}) references unknown node {end}")
        if length is None:
            na, nb = node_map[a], node_map[b]
            length = math.hypot(nb.x - na.x, nb.y - na.y)
        if not length > 0:
            raise NetworkError(f"link ({a}, {b}) has non-positive length {length}")
        link_map[(a, b)] = Link(a, b, float(length))

    fixed = list(fixed_route_ids)
    if len(fixed) > 1 and fixed[0] == fixed[-1]:
        fixed = fixed[:-1]

    if isinstance(flex_route_defs, Mapping):
        flex_items = list(flex_route_defs.items())
    else:
        flex_items = list(flex_route_defs)
    flex = {}
    for rid, seq in flex_items:
        if rid in flex:
            raise NetworkError(f"duplicate flexible route id {rid}")
        flex[int(rid)] = FlexRoute(int(rid), tuple(seq))

    network = RouteNetwork(nodes=node_map, links=link_map, fixed_route=tuple(fixed), flex_routes=flex)
    validate_network(network)
    return network


def validate_network(network: RouteNetwork) -> RouteNetwork:
    """Check every structural invariant and (re)compute derived lookups.

    Safe to call repeatedly on an already built network.
    """
    nodes = network.nodes
    fixed = network.fixed_route
    if len(fixed) < 2:
        raise BrokenRoute("fixed route needs at least two nodes")
    for n in fixed:
        if n not in nodes:
            raise DanglingReference(f"fixed route references unknown node {n}")
    if len(set(fixed)) != len(fixed):
        raise BrokenRoute("fixed route must visit each node once per loop")
    fixed_set = set(fixed)
    fixed_plan = _make_plan(network.links, fixed, closed=True, what="fixed route")

    flex_plans: dict[int, Plan] = {}
    routes_at: dict[int, list[int]] = {}
    stop_route: dict[int, int | None] = {n: None for n in fixed if nodes[n].kind == STOP}
    for rid in sorted(network.flex_routes):
        route = network.flex_routes[rid]
        if len(route.nodes) < 3:
            raise BrokenRoute(f"flexible route {rid} needs entry, at least one inner node and exit")
        for n in route.nodes:
            if n not in nodes:
                raise DanglingReference(f"flexible route {rid} references unknown node {n}")
        if route.entry not in fixed_set or route.exit not in fixed_set:
            raise BrokenRoute(f"flexible route {rid} must start and end on the fixed route")
        if nodes[route.entry].kind != DIVERSION:
            raise NetworkError(f"flexible route {rid} entry {route.entry} is not a diversion node")
        for n in route.inner:
            if n in fixed_set:
                raise BrokenRoute(f"flexible route {rid} inner node {n} lies on the fixed route")
        flex_plans[rid] = _make_plan(network.links, route.nodes, closed=False, what=f"flexible route {rid}")
        inner_stops = [n for n in route.inner if nodes[n].kind == STOP]
        if not inner_stops:
            raise NoStops(f"flexible route {rid} has no stops")
        for s in inner_stops:
            if s in stop_route:
                raise NetworkError(f"stop {s} is served by more than one route")
            stop_route[s] = rid
        routes_at.setdefault(route.entry, []).append(rid)

    for nid, node in nodes.items():
        if node.kind == DIVERSION and nid not in routes_at:
            raise NetworkError(f"diversion node {nid} is not the entry of any flexible route")
        if node.kind == STOP and nid not in stop_route:
            raise NetworkError(f"stop {nid} is not on any route")
    if not stop_route:
        raise NoStops("network has no stops")

    stop_ids = np.array(sorted(stop_route), dtype=np.int64)
    stop_xy = np.array([[nodes[s].x, nodes[s].y] for s in stop_ids], dtype=float)

    object.__setattr__(network, "fixed_plan", fixed_plan)
    object.__setattr__(network, "flex_plans", flex_plans)
    object.__setattr__(network, "routes_at", {k: tuple(v) for k, v in routes_at.items()})
    object.__setattr__(network, "stop_route", stop_route)
    object.__setattr__(network, "_stop_ids", stop_ids)
    object.__setattr__(network, "_stop_xy", stop_xy)
    return network
