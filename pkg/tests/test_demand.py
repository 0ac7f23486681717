import math

import numpy as np
import pytest
from scipy import stats

from drstsim.demand import (
    CensusTract,
    DemandConfig,
    TractSet,
    generate_request,
    next_interarrival,
    sample_destination,
    sample_group_size,
    sample_origin,
)
from drstsim.errors import EmptyPopulation, NoCandidate, NonPositiveRate, ValidationError
from drstsim.net import Node, build_network

from conftest import two_tracts


def within_3_sigma(count, n, p):
    return abs(count - n * p) <= 3 * math.sqrt(n * p * (1 - p))


def test_interarrival_mean_rate_12(rng):
    x = np.array([next_interarrival(12, rng) for _ in range(10**6)])
    assert abs(x.mean() - 5.0) / 5.0 < 0.02


def test_interarrival_tail_rate_60(rng):
    x = np.array([next_interarrival(60, rng) for _ in range(10**6)])
    frac = np.mean(x > 1.0)
    assert abs(frac - math.exp(-1)) / math.exp(-1) < 0.02


def test_interarrival_deterministic():
    r1, r2 = np.random.default_rng(3), np.random.default_rng(3)
    assert [next_interarrival(12, r1) for _ in range(50)] == [next_interarrival(12, r2) for _ in range(50)]


def test_interarrival_ks(rng):
    x = [next_interarrival(20, rng) for _ in range(10**4)]
    assert stats.kstest(x, "expon", args=(0, 3.0)).pvalue > 0.01


@pytest.mark.parametrize("rate", [0, -1.0])
def test_interarrival_rejects_bad_rate(rng, rate):
    with pytest.raises(NonPositiveRate):
        next_interarrival(rate, rng)


def test_origin_frequencies_binomial(rng):
    ts = TractSet(two_tracts(300, 100))
    n = 10**5
    hits = sum(sample_origin(ts, rng)[0] == 1 for _ in range(n))
    assert within_3_sigma(hits, n, 0.75)


def test_origin_single_tract(rng):
    ts = TractSet([CensusTract(9, 1.0, 2.0, 0.5, 10)])
    assert {sample_origin(ts, rng) for _ in range(100)} == {(9, (1.0, 2.0))}


def test_origin_zero_population_never_drawn(rng):
    ts = TractSet([CensusTract(1, 0, 0, 1, 50), CensusTract(2, 1, 0, 1, 0), CensusTract(3, 2, 0, 1, 50)])
    assert 2 not in {sample_origin(ts, rng)[0] for _ in range(20000)}


def test_origin_empty_population(rng):
    with pytest.raises(EmptyPopulation):
        sample_origin(TractSet(two_tracts(0, 0)), rng)


def test_origin_density_weighting(rng):
    tracts = [CensusTract(1, 0, 0, 1.0, 100), CensusTract(2, 1, 0, 4.0, 100)]
    ts = TractSet(tracts, origin_weighting="density")
    assert ts.origin_weights.tolist() == [100.0, 25.0]
    n = 20000
    hits = sum(sample_origin(ts, rng)[0] == 1 for _ in range(n))
    assert within_3_sigma(hits, n, 0.8)


def test_destination_symmetric_candidates(rng):
    tracts = [CensusTract(1, 0, 0, 1, 10), CensusTract(2, 1, 0, 1, 50), CensusTract(3, -1, 0, 1, 50)]
    ts = TractSet(tracts)
    n = 10**5
    hits = sum(sample_destination(1, ts, rng)[0] == 2 for _ in range(n))
    assert within_3_sigma(hits, n, 0.5)


def test_destination_power_law_ratio():
    tracts = [CensusTract(1, 0, 0, 1, 10), CensusTract(2, 1, 0, 1, 50), CensusTract(3, -2, 0, 1, 50)]
    w = TractSet(tracts, gravity_exponent=2.0).destination_weights[0]
    assert w[0] == 0.0
    assert w[1] / w[2] == pytest.approx(4.0)


def test_destination_three_tract_chi_square(rng):
    tracts = [
        CensusTract(1, 0.0, 0.0, 1, 100),
        CensusTract(2, 1.0, 0.0, 1, 300),
        CensusTract(3, 0.0, 2.0, 1, 800),
        CensusTract(4, 3.0, 1.0, 1, 500),
    ]
    ts = TractSet(tracts, gravity_exponent=2.0)
    # expected weights computed directly from the kernel definition
    w = np.array([300 / 1.0**2, 800 / 2.0**2, 500 / math.hypot(3, 1) ** 2])
    p = w / w.sum()
    n = 30000
    draws = [sample_destination(1, ts, rng)[0] for _ in range(n)]
    counts = np.array([draws.count(k) for k in (2, 3, 4)])
    assert 1 not in draws
    assert stats.chisquare(counts, p * n).pvalue > 0.01


def test_destination_needs_other_tract(rng):
    with pytest.raises(NoCandidate):
        sample_destination(1, TractSet([CensusTract(1, 0, 0, 1, 5)]), rng)
    with pytest.raises(NoCandidate):
        sample_destination(1, TractSet(two_tracts(5, 0)), rng)


def test_group_size_forced_one(rng):
    assert {sample_group_size(1, rng) for _ in range(500)} == {1}


def test_group_size_uniform(rng):
    n = 10**5
    x = np.array([sample_group_size(3, rng) for _ in range(n)])
    for k in (1, 2, 3):
        assert within_3_sigma(int(np.sum(x == k)), n, 1 / 3)


def test_group_size_deterministic():
    r1, r2 = np.random.default_rng(11), np.random.default_rng(11)
    assert [sample_group_size(3, r1) for _ in range(100)] == [sample_group_size(3, r2) for _ in range(100)]


def _line_network():
    nodes = [Node(1, 0.0, 0.0, "stop"), Node(2, 2.0, 0.0, "stop"), Node(3, 1.0, 1.0)]
    return build_network(nodes, [(1, 2), (2, 3), (3, 1)], [1, 2, 3])


def test_generate_request_walk_time(rng):
    net = _line_network()
    tracts = [CensusTract(1, 0.0, 0.5, 1, 100), CensusTract(2, 2.0, 0.0, 1, 100)]
    cfg = DemandConfig(rate=10, max_group_size=2, max_wait=10, max_walk=1.0, walk_speed=5.0)
    g = generate_request(30.0, cfg, tracts, net, rng, group_id=4)
    assert g.state == "walking"
    if g.origin_tract == 1:
        assert g.origin_stop == 1
        assert g.t_arrive_stop == pytest.approx(36.0)
        # destination centroid sits on stop 2
        assert g.destination_stop == 2 and g.walk_out_km == 0.0
    else:
        assert g.walk_in_km == 0.0 and g.t_arrive_stop == 30.0
        assert g.walk_out_min == pytest.approx(6.0)


def test_generated_requests_satisfy_invariants(network, tract_list, rng):
    cfg = DemandConfig(rate=30, max_group_size=3, max_wait=20, max_walk=0.5)
    ts = TractSet(tract_list)
    t = 0.0
    for gid in range(1, 10**4 + 1):
        t += next_interarrival(cfg.rate, rng)
        g = generate_request(t, cfg, ts, network, rng, group_id=gid)
        assert 1 <= g.size <= cfg.max_group_size
        assert g.origin_tract != g.destination_tract
        assert g.t_request <= g.t_arrive_stop
        assert g.state == "walking"
        assert g.origin_stop in network.stops and g.destination_stop in network.stops
        s, d = network.nearest_stop(g.origin)
        assert (s, d) == (g.origin_stop, g.walk_in_km)


def test_demand_config_validation():
    with pytest.raises(ValidationError) as e:
        DemandConfig(rate=10, max_group_size=0, max_wait=1, max_walk=1)
    assert e.value.field == "demand.max_group_size"
    with pytest.raises(ValidationError):
        DemandConfig(rate=10, max_group_size=1, max_wait=-1, max_walk=1)
