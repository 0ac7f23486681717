"""Performance indicators and the cost model.

Indicators are computed from :class:`RawTotals`, which can be filled either
from live engine state or by replaying a persisted event log with
:func:`accumulate`. The two routes are kept independent on purpose so one can
check the other.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Iterable, Sequence

from .errors import CapacityOutOfRange, MalformedLog, NoPassengers


@dataclass(frozen=True)
class CostParams:
    value_of_time: float = 10.0  # EUR/h
    driver_cost: float = 20.0  # EUR/h
    veh_km_cost_min: float = 0.5  # EUR/km at capacity_min
    veh_km_cost_max: float = 1.0  # EUR/km at capacity_max
    penalty_unsatisfied: float = 60.0  # min per unsatisfied user
    capacity_min: int = 1
    capacity_max: int = 10


INDICATOR_NAMES = ("NP", "TDD", "APTD", "ALF", "AWT", "AoBT", "APTT", "AVS", "CI", "TPTT", "OC", "TUC")


@dataclass(frozen=True)
class Indicators:
    NP: int  # passengers transported
    TDD: float  # km
    APTD: float  # km
    ALF: float
    AWT: float  # min
    AoBT: float  # min
    APTT: float  # min
    AVS: float  # km/h
    CI: float | None  # km/pax, None when NP == 0
    TPTT: float  # h
    OC: float  # EUR
    TUC: float | None  # EUR/pax, None when NP == 0

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class VehicleTotals:
    id: int
    capacity: int
    odometer: float
    load_distance: float
    busy_h: float


@dataclass
class RawTotals:
    duration_h: float = 0.0
    requests: int = 0
    requested_passengers: int = 0
    rejected_groups: int = 0
    rejected_passengers: int = 0
    satisfied_groups: int = 0
    satisfied_passengers: int = 0
    in_transit_groups: int = 0
    unsatisfied_groups: int = 0
    unsatisfied_passengers: int = 0
    open_groups: int = 0
    wait_min: float = 0.0  # passenger-weighted sums over satisfied users
    onboard_min: float = 0.0
    walk_min: float = 0.0
    vehicles: list[VehicleTotals] = field(default_factory=list)

    def add_group(self, size, state, t_request, t_arrive, t_board, t_alight, walk_out_min, in_transit=False) -> None:
        self.requests += 1
        self.requested_passengers += size
        if state == "satisfied":
            self.satisfied_groups += 1
            self.satisfied_passengers += size
            self.in_transit_groups += bool(in_transit)
            self.wait_min += size * (t_board - t_arrive)
            self.onboard_min += size * (t_alight - t_board)
            self.walk_min += size * ((t_arrive - t_request) + walk_out_min)
        elif state == "unsatisfied":
            self.unsatisfied_groups += 1
            self.unsatisfied_passengers += size
        elif state == "rejected":
            self.rejected_groups += 1
            self.rejected_passengers += size
        else:
            self.open_groups += 1

    def add_vehicle(self, vehicle_id, capacity, odometer, load_distance, busy_h) -> None:
        self.vehicles.append(VehicleTotals(vehicle_id, capacity, odometer, load_distance, busy_h))


def unit_km_cost(capacity: float, params: CostParams) -> float:
    """Per-km vehicle cost, linear in seat capacity between the two endpoints."""
    lo, hi = params.capacity_min, params.capacity_max
    if not lo <= capacity <= hi:
        raise CapacityOutOfRange(f"capacity {capacity} outside [{lo}, {hi}]")
    if hi == lo:
        return params.veh_km_cost_min
    frac = (capacity - lo) / (hi - lo)
    return params.veh_km_cost_min + frac * (params.veh_km_cost_max - params.veh_km_cost_min)


def operation_cost(
    fleet: Iterable[tuple[float, float]],
    busy_hours: Sequence[float] | float,
    cost_params: CostParams,
) -> float:
    """Vehicle-km cost plus driver cost.

    ``fleet`` yields ``(capacity, odometer_km)`` per vehicle; ``busy_hours`` is
    either one value per vehicle or a single value applied to all.
    """
    fleet = list(fleet)
    if isinstance(busy_hours, (int, float)):
        busy_hours = [float(busy_hours)] * len(fleet)
    if len(busy_hours) != len(fleet):
        raise ValueError("busy_hours must match the fleet")
    km_cost = sum(km * unit_km_cost(cap, cost_params) for cap, km in fleet)
    return km_cost + sum(busy_hours) * cost_params.driver_cost


def total_unit_cost(tptt_h: float, vot: float, oc: float, np_: float) -> float:
    """Societal cost per transported passenger, (TPTT * VOT + OC) / NP."""
    if not np_ > 0:
        raise NoPassengers("no passengers transported; unit cost undefined")
    return (tptt_h * vot + oc) / np_


def compute_indicators(
    totals: RawTotals,
    cost_params: CostParams = CostParams(),
    sim_duration_h: float | None = None,
) -> Indicators:
    """Reduce totals to the twelve indicators.

    Driver hours default to each vehicle's own busy time; pass
    ``sim_duration_h`` to charge every vehicle for that span instead.
    """
    np_ = totals.satisfied_passengers
    tdd = sum(v.odometer for v in totals.vehicles)
    pkm = sum(v.load_distance for v in totals.vehicles)
    seat_km = sum(v.capacity * v.odometer for v in totals.vehicles)
    busy = [v.busy_h if sim_duration_h is None else sim_duration_h for v in totals.vehicles]
    busy_total = sum(busy)
    travel_min = totals.walk_min + totals.wait_min + totals.onboard_min

    tptt = travel_min / 60.0 + totals.unsatisfied_passengers * cost_params.penalty_unsatisfied / 60.0
    oc = operation_cost(((v.capacity, v.odometer) for v in totals.vehicles), busy, cost_params)

    def per_pax(x):
        return x / np_ if np_ else 0.0

    return Indicators(
        NP=np_,
        TDD=tdd,
        APTD=per_pax(pkm),
        ALF=pkm / seat_km if seat_km > 0 else 0.0,
        AWT=per_pax(totals.wait_min),
        AoBT=per_pax(totals.onboard_min),
        APTT=per_pax(travel_min),
        AVS=tdd / busy_total if busy_total > 0 else 0.0,
        CI=tdd / np_ if np_ else None,
        TPTT=tptt,
        OC=oc,
        TUC=total_unit_cost(tptt, cost_params.value_of_time, oc, np_) if np_ else None,
    )


_NEXT_STATE = {
    "reject": ("walking", "rejected"),
    "arrive_stop": ("walking", "waiting"),
    "board": ("waiting", "onboard"),
    "alight": ("onboard", "satisfied"),
}


def accumulate(events: Iterable, vehicle_traces=None) -> RawTotals:
    """Rebuild RawTotals by replaying an event log.

    ``events`` may be SimEvent objects or dicts parsed from the NDJSON log.
    ``vehicle_traces`` optionally overrides per-vehicle (odometer,
    load_distance, busy_h) and is otherwise derived from vehicle_move records.
    """
    groups: dict[int, dict] = {}
    vehicles: dict[int, dict] = {}
    last_t, last_seq = -math.inf, -1
    end_t = 0.0

    for ev in events:
        if isinstance(ev, dict):
            t, seq, kind, data = ev["t"], ev["seq"], ev["kind"], ev
        else:
            t, seq, kind, data = ev.t, ev.seq, ev.kind, ev.data
        if seq <= last_seq or t < last_t:
            raise MalformedLog(f"event seq={seq} t={t} is out of order")
        last_t, last_seq = t, seq

        if kind == "request":
            gid = data["group"]
            if gid in groups:
                raise MalformedLog(f"group {gid} requested twice")
            groups[gid] = {
                "size": data["size"], "state": "walking", "t_request": t,
                "t_arrive": None, "t_board": None, "t_alight": None,
                "walk_out_min": data["walk_out_min"], "in_transit": False,
            }
        elif kind in _NEXT_STATE or kind == "give_up":
            g = groups.get(data["group"])
            if g is None:
                raise MalformedLog(f"{kind} for unknown group {data['group']}")
            if kind == "give_up":
                if g["state"] not in ("waiting", "walking"):
                    raise MalformedLog(f"group {data['group']} gave up while {g['state']}")
                g["state"] = "unsatisfied"
                continue
            before, after = _NEXT_STATE[kind]
            if g["state"] != before:
                raise MalformedLog(f"{kind} for group {data['group']} in state {g['state']}")
            g["state"] = after
            if kind == "arrive_stop":
                g["t_arrive"] = t
            elif kind in ("board", "alight"):
                v = vehicles.get(data["vehicle"])
                if v is None:
                    raise MalformedLog(f"{kind} on unknown vehicle {data['vehicle']}")
                if kind == "board":
                    g["t_board"] = t
                    v["load"] += g["size"]
                else:
                    g["t_alight"] = t
                    g["in_transit"] = bool(data.get("in_transit"))
                    v["load"] -= g["size"]
        elif kind == "vehicle_move":
            vid = data["vehicle"]
            if data["phase"] == "start":
                if vid in vehicles:
                    raise MalformedLog(f"vehicle {vid} started twice")
                vehicles[vid] = {"capacity": data["capacity"], "odo": 0.0, "ld": 0.0, "load": 0, "busy_h": 0.0}
                continue
            v = vehicles.get(vid)
            if v is None:
                raise MalformedLog(f"movement of unknown vehicle {vid}")
            v["ld"] += v["load"] * (data["odometer"] - v["odo"])
            v["odo"] = data["odometer"]
            if data["phase"] == "end":
                v["busy_h"] = data["busy_h"]
                end_t = max(end_t, t)
        elif kind in ("divert", "rejoin"):
            if data["vehicle"] not in vehicles:
                raise MalformedLog(f"{kind} of unknown vehicle {data['vehicle']}")
        else:
            raise MalformedLog(f"unknown event kind {kind!r}")

    totals = RawTotals(duration_h=end_t / 60.0)
    for gid in sorted(groups):
        g = groups[gid]
        if g["state"] not in ("satisfied", "unsatisfied", "rejected"):
            raise MalformedLog(f"group {gid} never reached a terminal state")
        totals.add_group(
            g["size"], g["state"], g["t_request"], g["t_arrive"], g["t_board"], g["t_alight"],
            g["walk_out_min"], g["in_transit"],
        )
    for vid in sorted(vehicles):
        v = vehicles[vid]
        if vehicle_traces is not None and vid in vehicle_traces:
            odo, ld, busy = vehicle_traces[vid]
        else:
            odo, ld, busy = v["odo"], v["ld"], v["busy_h"]
        totals.add_vehicle(vid, v["capacity"], odo, ld, busy)
    return totals


def indicator_fields() -> tuple[str, ...]:
    return tuple(f.name for f in fields(Indicators))
