"""Agent-based simulator for demand responsive shared transport on a semi-flexible route network."""

from .demand import CensusTract, DemandConfig, PassengerGroup
from .metrics import CostParams, Indicators
from .net import RouteNetwork, build_network, nearest_stop, plan_distance
from .sim import ScenarioConfig, SimResult, run
from .strategy import StrategyConfig

__all__ = [
    "CensusTract",
    "CostParams",
    "DemandConfig",
    "Indicators",
    "PassengerGroup",
    "RouteNetwork",
    "ScenarioConfig",
    "SimResult",
    "StrategyConfig",
    "build_network",
    "nearest_stop",
    "plan_distance",
    "run",
]

__version__ = "0.1.0"
