import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csmabethe import oracle, topology
from csmabethe.bethe import FugacityVector
from csmabethe.errors import EnumerationTooLarge, TargetOutsideCapacity
from csmabethe.utility import linear_utility, log_utility

from conftest import all_schedules, random_conflict_network


def _schedules(net):
    return oracle.enumerate_feasible_schedules(net)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(1, 8), sinr=st.booleans())
def test_enumeration_matches_brute_force(seed, n, sinr):
    rng = np.random.default_rng(seed)
    if sinr:
        net = topology.generate_random_network(n, plane_side=2.5, seed=seed)
    else:
        net = random_conflict_network(rng, n)
    g = topology.build_interference_graph(net)
    expected = sorted(oracle.schedule_code(x) for x in all_schedules(n)
                      if topology.is_feasible(net, g, x))
    assert _schedules(net).codes.tolist() == expected


def test_path3_schedules(path3):
    sched = _schedules(path3)
    assert sched.to_hex() == ["0", "1", "2", "4", "5"]
    assert 5 in sched and 3 not in sched
    assert sched.count == 5


def test_partition_and_marginals_by_hand(path3):
    a, b, c = 0.5, 2.0, 1.5
    sched = _schedules(path3)
    z = 1 + a + b + c + a * c
    assert oracle.exact_log_partition([a, b, c], sched) == pytest.approx(np.log(z))
    expected = np.array([a + a * c, b, c + a * c]) / z
    np.testing.assert_allclose(oracle.exact_marginals([a, b, c], sched), expected, rtol=1e-13)
    fv = FugacityVector.from_lambdas([a, b, c])
    np.testing.assert_allclose(oracle.exact_marginals(fv, sched), expected, rtol=1e-13)
    p = oracle.exact_state_probabilities([a, b, c], sched)
    assert p.sum() == pytest.approx(1.0)


def test_zero_fugacity_switches_link_off(path3):
    s = oracle.exact_marginals([0.0, 1.0, 1.0], _schedules(path3))
    assert s[0] == 0.0
    assert s[1] == pytest.approx(1 / 3)


def test_two_clique_exact_fugacity(two_clique):
    fug = oracle.exact_fugacities([0.25, 0.25], _schedules(two_clique))
    np.testing.assert_allclose(fug.lambdas, [0.5, 0.5], rtol=1e-12)


def test_round_trip(rng):
    net = random_conflict_network(rng, 8)
    sched = _schedules(net)
    lam = rng.uniform(0.1, 3.0, 8)
    s = oracle.exact_marginals(lam, sched)
    np.testing.assert_allclose(oracle.exact_fugacities(s, sched).lambdas, lam, rtol=1e-8)


def test_outside_capacity_raises(two_clique):
    with pytest.raises(TargetOutsideCapacity):
        oracle.exact_fugacities([0.6, 0.6], _schedules(two_clique))


def test_capacity_membership(two_clique):
    sched = _schedules(two_clique)
    inner = oracle.capacity_membership([0.25, 0.25], sched)
    assert inner.status == "interior" and inner.margin == pytest.approx(0.25)
    assert oracle.capacity_membership([0.5, 0.5], sched).status == "boundary"
    outer = oracle.capacity_membership([0.6, 0.6], sched)
    assert outer.status == "outside" and outer.margin == pytest.approx(-0.1)


def test_enumeration_cap():
    net = topology.build_conflict_graph_network(topology.path_adjacency(6))
    with pytest.raises(EnumerationTooLarge):
        oracle.enumerate_feasible_schedules(net, cap=5)


def test_utility_optimum_two_clique(two_clique):
    sched = _schedules(two_clique)
    y, val = oracle.utility_optimum_bruteforce(sched, log_utility())
    np.testing.assert_allclose(y, [0.5, 0.5], atol=1e-6)
    assert val == pytest.approx(2 * np.log(0.5), abs=1e-9)
    y, _ = oracle.utility_optimum_bruteforce(sched, [linear_utility(2.0), linear_utility(1.0)])
    np.testing.assert_allclose(y, [1.0, 0.0], atol=1e-8)


def test_utility_optimum_path(path3):
    # mix {1} with {0, 2}: y = (1-a, a, 1-a); optimum a = 1/3
    y, val = oracle.utility_optimum_bruteforce(_schedules(path3), log_utility())
    np.testing.assert_allclose(y, [2 / 3, 1 / 3, 2 / 3], atol=1e-5)
    assert val == pytest.approx(np.log(1 / 3) + 2 * np.log(2 / 3), abs=1e-9)
