"""Loaders for the JSON input documents (network, tracts, scenario, sweep).

File schemas are declared as pydantic models with unknown keys forbidden;
validation failures surface as :class:`drstsim.errors.ValidationError` with
a dotted field path.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path
from typing import Any, Literal, Optional, Union

import pydantic
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt

from .demand import CensusTract, DemandConfig, TractSet
from .errors import IoError, ParseError, ValidationError
from .metrics import CostParams
from .net import Node, RouteNetwork, build_network
from .sim import ScenarioConfig
from .strategy import StrategyConfig

DATA_DIR = resources.files("drstsim") / "data"
DEFAULT_SCENARIO = "default_scenario.json"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


# -- network -------------------------------------------------------------


class NodeModel(_Strict):
    id: int
    x_km: float
    y_km: float
    kind: Literal["plain", "stop", "diversion"] = "plain"
    name: Optional[str] = None


class LinkModel(_Strict):
    from_: int = Field(alias="from")
    to: int
    length_km: Optional[PositiveFloat] = None


class FlexRouteModel(_Strict):
    id: int
    nodes: list[int] = Field(min_length=3)


class NetworkFile(_Strict):
    name: Optional[str] = None
    description: Optional[str] = None
    nodes: list[NodeModel]
    links: list[LinkModel]
    fixed_route: list[int]
    flex_routes: list[FlexRouteModel] = []


# -- tracts ----------------------------------------------------------------


class TractModel(_Strict):
    id: int
    x_km: float
    y_km: float
    area_km2: PositiveFloat
    population: int = Field(ge=0)
    # reserved: explicit sample points inside the tract (currently unused)
    points: Optional[list[tuple[float, float]]] = None


class TractsFile(_Strict):
    name: Optional[str] = None
    description: Optional[str] = None
    tracts: list[TractModel] = Field(min_length=1)


# -- scenario --------------------------------------------------------------


class DemandModel(_Strict):
    rate: PositiveFloat = 30.0
    max_group_size: PositiveInt = 3
    max_wait: PositiveFloat = 20.0
    max_walk: PositiveFloat = 0.5
    walk_speed: PositiveFloat = 5.0
    gravity_exponent: PositiveFloat = 2.0
    origin_weighting: Literal["population", "density"] = "population"


class CostsModel(_Strict):
    value_of_time: float = Field(10.0, ge=0)
    driver_cost: float = Field(20.0, ge=0)
    veh_km_cost_min: float = Field(0.5, ge=0)
    veh_km_cost_max: float = Field(1.0, ge=0)
    penalty_unsatisfied: float = Field(60.0, ge=0)
    capacity_min: PositiveInt = 1
    capacity_max: PositiveInt = 10


class ScenarioFile(_Strict):
    name: Optional[str] = None
    description: Optional[str] = None
    network: Optional[str] = None
    tracts: Optional[str] = None
    total_time: float = Field(8.0, ge=0)
    n_vehicles: PositiveInt = 5
    capacity: PositiveInt = 6
    speed: PositiveFloat = 20.0
    tick: float = Field(0.1, gt=0, le=1.0)
    seed: int = 0
    strategy: Literal["FR", "AVAR", "EVAR"] = "EVAR"
    randomness_p: float = Field(0.0, ge=0, le=1)
    demand: DemandModel = DemandModel()
    costs: CostsModel = CostsModel()


class SweepFile(_Strict):
    name: Optional[str] = None
    description: Optional[str] = None
    scenario: Union[str, dict[str, Any]]
    axis: Literal["fleet_size_at_fixed_total_seats", "randomness_p"]
    values: list[float] = Field(min_length=1)
    replications: PositiveInt = 1
    seed_base: int = 0
    total_seats: Optional[PositiveInt] = None
    strategies: Optional[list[Literal["FR", "AVAR", "EVAR"]]] = None


# -- helpers ---------------------------------------------------------------


def _read_json(path) -> Any:
    try:
        text = Path(path).read_text() if not hasattr(path, "read_text") else path.read_text()
    except FileNotFoundError as exc:
        raise IoError(f"{path}: file not found") from exc
    except OSError as exc:
        raise IoError(f"{path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _validate(model: type[BaseModel], doc: Any, where: str):
    try:
        return model.model_validate(doc)
    except pydantic.ValidationError as exc:
        err = exc.errors()[0]
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        raise ValidationError(loc, f"{err['msg']} (in {where})") from exc


def data_path(name: str):
    """Path to one of the documents shipped with the package."""
    return DATA_DIR / name


def _resolve(ref: str, base) -> Any:
    p = Path(ref)
    if p.is_absolute():
        return p
    if base is not None:
        cand = Path(str(base)).parent / p
        if cand.exists():
            return cand
    shipped = DATA_DIR / ref
    if shipped.is_file():
        return shipped
    return p


# -- public loaders ---------------------------------------------------------


def network_from_doc(doc: Any, where: str = "network") -> RouteNetwork:
    nf = _validate(NetworkFile, doc, where)
    nodes = [Node(n.id, n.x_km, n.y_km, n.kind) for n in nf.nodes]
    links = [(l.from_, l.to, l.length_km) for l in nf.links]
    flex = [(r.id, r.nodes) for r in nf.flex_routes]
    return build_network(nodes, links, nf.fixed_route, flex)


def load_network(path) -> RouteNetwork:
    return network_from_doc(_read_json(path), str(path))


def tracts_from_doc(doc: Any, where: str = "tracts") -> list[CensusTract]:
    tf = _validate(TractsFile, doc, where)
    ids = [t.id for t in tf.tracts]
    if len(set(ids)) != len(ids):
        raise ValidationError("tracts", "duplicate tract id")
    tracts = [CensusTract(t.id, t.x_km, t.y_km, t.area_km2, t.population) for t in tf.tracts]
    if sum(t.population for t in tracts) <= 0:
        raise ValidationError("tracts", "populations must sum to a positive total")
    return tracts


def load_tracts(path) -> list[CensusTract]:
    return tracts_from_doc(_read_json(path), str(path))


def scenario_from_doc(doc: Any, where: str = "scenario", seed: int | None = None) -> tuple[ScenarioConfig, ScenarioFile]:
    sf = _validate(ScenarioFile, doc, where)
    d = sf.demand
    costs = sf.costs
    if costs.capacity_max < costs.capacity_min:
        raise ValidationError("costs.capacity_max", "must be >= capacity_min")
    cfg = ScenarioConfig(
        total_time=sf.total_time,
        n_vehicles=sf.n_vehicles,
        capacity=sf.capacity,
        speed=sf.speed,
        demand=DemandConfig(
            rate=d.rate,
            max_group_size=d.max_group_size,
            max_wait=d.max_wait,
            max_walk=d.max_walk,
            walk_speed=d.walk_speed,
            gravity_exponent=d.gravity_exponent,
            origin_weighting=d.origin_weighting,
        ),
        strategy=StrategyConfig(sf.strategy, sf.randomness_p),
        seed=sf.seed if seed is None else seed,
        tick=sf.tick,
        costs=CostParams(**costs.model_dump()),
    )
    return cfg, sf


def parse_scenario(path, seed: int | None = None) -> ScenarioConfig:
    """Load and validate a scenario file, applying every default."""
    return scenario_from_doc(_read_json(path), str(path), seed)[0]


def load_bundle(
    scenario_path=None,
    network_path=None,
    tracts_path=None,
    seed: int | None = None,
) -> tuple[ScenarioConfig, RouteNetwork, TractSet, dict]:
    """Scenario plus the network and tracts it refers to.

    Explicit paths win over references inside the scenario; anything still
    missing falls back to the shipped Ragusa-like files. Returns the resolved
    paths as the last element for provenance.
    """
    scenario_path = scenario_path or data_path(DEFAULT_SCENARIO)
    cfg, sf = scenario_from_doc(_read_json(scenario_path), str(scenario_path), seed)
    net_ref = network_path or (sf.network and _resolve(sf.network, scenario_path)) or data_path("ragusa_like_network.json")
    tr_ref = tracts_path or (sf.tracts and _resolve(sf.tracts, scenario_path)) or data_path("ragusa_like_tracts.json")
    network = load_network(net_ref)
    tracts = TractSet(load_tracts(tr_ref), cfg.demand.gravity_exponent, cfg.demand.origin_weighting)
    paths = {"scenario": str(scenario_path), "network": str(net_ref), "tracts": str(tr_ref)}
    return cfg, network, tracts, paths


def load_sweep(path) -> SweepFile:
    return _validate(SweepFile, _read_json(path), str(path))
