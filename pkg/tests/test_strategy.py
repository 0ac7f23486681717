import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drstsim.errors import NoFlexRoutes, NotAtDiversionNode, ValidationError
from drstsim.strategy import (
    DETERMINISTIC,
    RANDOM_BEHAVING,
    STAY,
    RouteView,
    StrategyConfig,
    VehicleAssignment,
    assign_vehicles,
    decide_diversion,
)


def test_evar_round_robin(rng):
    out = assign_vehicles(StrategyConfig("EVAR", 0.0), [1, 2, 3, 4, 5, 6], [1, 2, 3], rng)
    assert [(a.vehicle_id, a.assigned_flex_route) for a in out] == [(1, 1), (2, 2), (3, 3), (4, 1), (5, 2), (6, 3)]
    assert all(a.mode == DETERMINISTIC for a in out)


@pytest.mark.parametrize("kind", ["FR", "AVAR", "EVAR"])
def test_all_random_at_p1(kind, rng):
    out = assign_vehicles(StrategyConfig(kind, 1.0), range(1, 8), [1, 2], rng)
    assert all(a.mode == RANDOM_BEHAVING and a.assigned_flex_route is None for a in out)


def test_random_count_fixed_membership_varies():
    members = set()
    for seed in range(30):
        out = assign_vehicles(StrategyConfig("AVAR", 0.3), range(1, 11), [1, 2, 3], np.random.default_rng(seed))
        rand = frozenset(a.vehicle_id for a in out if a.mode == RANDOM_BEHAVING)
        assert len(rand) == 3
        members.add(rand)
    assert len(members) > 1


def test_evar_needs_routes(rng):
    with pytest.raises(NoFlexRoutes):
        assign_vehicles(StrategyConfig("EVAR", 0.0), [1, 2], [], rng)


def test_assigned_route_only_for_deterministic_evar(rng):
    for kind in ("FR", "AVAR", "EVAR"):
        for a in assign_vehicles(StrategyConfig(kind, 0.5), range(1, 9), [4, 7], rng):
            assert (a.assigned_flex_route is not None) == (kind == "EVAR" and a.mode == DETERMINISTIC)


@pytest.mark.parametrize("p", [0.0, 1.0])
def test_count_deterministic_at_extremes(p, rng):
    out = assign_vehicles(StrategyConfig("AVAR", p), range(1, 6), [1], rng)
    assert sum(a.mode == RANDOM_BEHAVING for a in out) == 5 * p


def test_strategy_config_validation():
    with pytest.raises(ValidationError):
        StrategyConfig("XYZ", 0.0)
    with pytest.raises(ValidationError):
        StrategyConfig("EVAR", 1.5)


V = RouteView


@pytest.mark.parametrize("kind", ["FR", "AVAR", "EVAR"])
@pytest.mark.parametrize("mode", [DETERMINISTIC, RANDOM_BEHAVING])
def test_onboard_destination_forces_route(kind, mode, rng):
    asg = VehicleAssignment(1, mode, 1 if kind == "EVAR" and mode == DETERMINISTIC else None)
    view = {1: V(False, False), 2: V(True, True)}
    assert decide_diversion(asg, StrategyConfig(kind, 0.0), 5, 5, view, rng) == 2


def test_evar_ignores_other_routes(rng):
    asg = VehicleAssignment(1, DETERMINISTIC, 1)
    view = {1: V(False, False), 2: V(True, False)}
    assert decide_diversion(asg, StrategyConfig("EVAR", 0.0), 5, 5, view, rng) is STAY


def test_evar_takes_assigned_route_with_demand(rng):
    asg = VehicleAssignment(1, DETERMINISTIC, 2)
    view = {1: V(True, False), 2: V(True, False)}
    assert decide_diversion(asg, StrategyConfig("EVAR", 0.0), 5, 5, view, rng) == 2


def test_avar_stays_without_demand(rng):
    asg = VehicleAssignment(1, DETERMINISTIC)
    view = {1: V(False, False), 3: V(False, False)}
    assert decide_diversion(asg, StrategyConfig("AVAR", 0.0), 5, 5, view, rng) is STAY


def test_avar_lowest_route_with_waiting(rng):
    asg = VehicleAssignment(1, DETERMINISTIC)
    view = {4: V(True, False), 3: V(True, False)}
    assert decide_diversion(asg, StrategyConfig("AVAR", 0.0), 5, 5, view, rng) == 3


def test_not_at_diversion_node(rng):
    asg = VehicleAssignment(1, DETERMINISTIC)
    with pytest.raises(NotAtDiversionNode):
        decide_diversion(asg, StrategyConfig("AVAR", 0.0), 4, 5, {1: V(False, False)}, rng)
    with pytest.raises(NotAtDiversionNode):
        decide_diversion(asg, StrategyConfig("AVAR", 0.0), 5, 5, {}, rng)


def test_random_choice_uniform_over_options():
    rng = np.random.default_rng(0)
    asg = VehicleAssignment(1, RANDOM_BEHAVING)
    view = {1: V(True, False), 2: V(False, False)}
    n = 30000
    picks = [decide_diversion(asg, StrategyConfig("AVAR", 1.0), 5, 5, view, rng) for _ in range(n)]
    for option in (STAY, 1, 2):
        k = sum(1 for p in picks if p == option)
        assert abs(k - n / 3) <= 3 * (n * (1 / 3) * (2 / 3)) ** 0.5


views = st.dictionaries(
    st.integers(1, 6), st.builds(RouteView, st.booleans(), st.booleans()), min_size=1, max_size=4
)


@settings(max_examples=300, deadline=None)
@given(
    views,
    st.sampled_from(["FR", "AVAR", "EVAR"]),
    st.sampled_from([DETERMINISTIC, RANDOM_BEHAVING]),
    st.integers(1, 6),
    st.integers(0, 1000),
)
def test_choice_always_entered_here(view, kind, mode, assigned, seed):
    asg = VehicleAssignment(1, mode, assigned if kind == "EVAR" and mode == DETERMINISTIC else None)
    choice = decide_diversion(asg, StrategyConfig(kind, 0.0), 9, 9, view, np.random.default_rng(seed))
    assert choice is STAY or choice in view


@settings(max_examples=300, deadline=None)
@given(views, st.sampled_from(["AVAR", "EVAR"]), st.integers(1, 6))
def test_deterministic_without_randomness(view, kind, assigned):
    asg = VehicleAssignment(1, DETERMINISTIC, assigned if kind == "EVAR" else None)
    cfg = StrategyConfig(kind, 0.0)
    a = decide_diversion(asg, cfg, 9, 9, view, np.random.default_rng(1))
    b = decide_diversion(asg, cfg, 9, 9, view, np.random.default_rng(2))
    assert a == b
