import dataclasses
import sys

import numpy as np
import pytest

from drstsim import io
from drstsim.demand import CensusTract, DemandConfig, TractSet
from drstsim.metrics import CostParams
from drstsim.net import Node, build_network
from drstsim.sim import ScenarioConfig
from drstsim.strategy import StrategyConfig


@pytest.fixture(scope="session")
def network():
    return io.load_network(io.data_path("ragusa_like_network.json"))


@pytest.fixture(scope="session")
def tract_list():
    return io.load_tracts(io.data_path("ragusa_like_tracts.json"))


@pytest.fixture(scope="session")
def tracts(tract_list):
    return TractSet(tract_list)


@pytest.fixture(scope="session")
def default_scenario():
    return io.parse_scenario(io.data_path("default_scenario.json"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def unit_square(stop_ids=(1, 2, 3, 4), drop_link=None):
    coords = {1: (0, 0), 2: (1, 0), 3: (1, 1), 4: (0, 1)}
    nodes = [Node(i, *coords[i], "stop" if i in stop_ids else "plain") for i in coords]
    links = [(1, 2), (2, 3), (3, 4), (4, 1)]
    if drop_link is not None:
        links.remove(drop_link)
    return build_network(nodes, links, [1, 2, 3, 4])


@pytest.fixture
def square():
    return unit_square()


def small_scenario(**kw):
    """A short scenario on the default network; keyword overrides apply."""
    demand_kw = kw.pop("demand", {})
    base = ScenarioConfig(
        total_time=1.0,
        n_vehicles=3,
        capacity=4,
        speed=20.0,
        demand=DemandConfig(rate=30.0, max_group_size=2, max_wait=20.0, max_walk=0.5),
        strategy=StrategyConfig("EVAR", 0.0),
        seed=7,
        costs=CostParams(),
    )
    if demand_kw:
        base = dataclasses.replace(base, demand=dataclasses.replace(base.demand, **demand_kw))
    return dataclasses.replace(base, **kw)


def two_tracts(pop_a=100, pop_b=100):
    return [CensusTract(1, 0.0, 0.0, 1.0, pop_a), CensusTract(2, 1.0, 0.0, 1.0, pop_b)]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.REPORT):
        terminalreporter.write_line(mod.REPORT[n])
