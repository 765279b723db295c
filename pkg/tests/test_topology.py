import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csmabethe import topology
from csmabethe.errors import CsmaBetheError, EnumerationTooLarge
from csmabethe.topology import Link, Network, RadioParams

from conftest import all_schedules, independent_sets, random_conflict_network


def line_network(positions, radio=None):
    """Links along the x axis, receivers 1 unit to the right of each transmitter."""
    radio = radio or RadioParams.from_db(15.0)
    links = tuple(Link(k, (x, 0.0), (x + 1.0, 0.0)) for k, x in enumerate(positions))
    return Network(topology.SINR_SPATIAL, links, radio=radio)


def test_db_conversion():
    assert topology.db_to_linear(15.0) == pytest.approx(10**1.5)
    assert topology.db_to_linear(0.0) == 1.0


def test_radio_validation():
    with pytest.raises(ValueError):
        RadioParams(path_loss_exponent=0)
    with pytest.raises(ValueError):
        RadioParams(noise_power=-1)


def test_random_network_is_seeded_and_has_fixed_link_length():
    a = topology.generate_random_network(12, seed=7)
    b = topology.generate_random_network(12, seed=7)
    c = topology.generate_random_network(12, seed=8)
    assert a == b
    assert a != c
    lengths = np.linalg.norm(a.tx_positions - a.rx_positions, axis=1)
    np.testing.assert_allclose(lengths, 0.5)
    assert np.all((a.tx_positions >= 0) & (a.tx_positions <= 8.0))


def test_sinr_by_hand():
    # tx0 at 0, rx0 at 1; tx1 at 2 is 1 away from rx0 -> SINR 1
    net = line_network([0.0, 2.0])
    assert topology.compute_sinr(net, 0, [0, 1]) == pytest.approx(1.0)
    assert topology.compute_sinr(net, 0, [0]) == math.inf
    # with noise only
    noisy = line_network([0.0, 2.0], RadioParams(noise_power=0.25))
    assert topology.compute_sinr(noisy, 0, [0]) == pytest.approx(4.0)
    assert topology.compute_sinr(noisy, 0, [0, 1]) == pytest.approx(1.0 / 1.25)


def test_sinr_ignores_far_interferers():
    # tx1 is 9 away from rx0, beyond the close-in radius
    net = line_network([0.0, 10.0], RadioParams(noise_power=0.01))
    assert topology.compute_sinr(net, 0, [0, 1]) == pytest.approx(100.0)


def test_interference_graph_rule():
    net = line_network([0.0, 3.0, 10.0])
    g = topology.build_interference_graph(net)
    # d(tx1, rx0) = 2 <= 2.4; link 2 is far from both
    assert g.neighborhoods == ((0, 1), (0, 1), (2,))
    assert list(g.degrees) == [2, 2, 1]
    assert g.edges() == [(0, 1)]
    assert g.position(1, 0) == 0


def test_grid_and_helpers():
    adj = topology.grid_adjacency(4, 4)
    assert adj.sum() == 2 * 24
    assert adj.sum(axis=1).tolist().count(2) == 4  # corners
    assert topology.star_adjacency(5)[0].sum() == 4
    assert topology.cycle_adjacency(5).sum(axis=1).tolist() == [2] * 5
    assert topology.path_adjacency(3).sum() == 4
    assert topology.complete_adjacency(3).sum() == 6


def test_asymmetric_adjacency_rejected():
    adj = np.zeros((2, 2), dtype=bool)
    adj[0, 1] = True
    with pytest.raises(ValueError):
        topology.build_conflict_graph_network(adj)


def test_local_feasible_two_clique(two_clique):
    g = topology.build_interference_graph(two_clique)
    fs = topology.enumerate_local_feasible(two_clique, g, 0)
    assert fs.members.tolist() == [0, 1, 2]
    assert 3 not in fs
    np.testing.assert_array_equal(fs.patterns(), [[0, 0], [1, 0], [0, 1]])


def test_local_feasible_sinr_line():
    # together the pair has SINR 1 < T, so {both on} is missing
    net = line_network([0.0, 2.0])
    fs = topology.enumerate_all_local_feasible(net)
    assert fs[0].members.tolist() == [0, 1, 2]
    net = line_network([0.0, 3.0], RadioParams.from_db(0.0))  # T = 1, SINR = 8 > 1
    fs = topology.enumerate_all_local_feasible(net)
    assert fs[0].members.tolist() == [0, 1, 2, 3]


def test_enumeration_cap():
    net = topology.build_conflict_graph_network(topology.complete_adjacency(6))
    g = topology.build_interference_graph(net)
    with pytest.raises(EnumerationTooLarge):
        topology.enumerate_local_feasible(net, g, 0, cap=5)


def test_link_that_cannot_transmit():
    net = line_network([0.0, 2.0], RadioParams(noise_power=10.0))
    with pytest.raises(CsmaBetheError):
        topology.enumerate_all_local_feasible(net)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 7))
def test_local_tables_match_global_feasibility_sinr(seed, n):
    net = topology.generate_random_network(n, plane_side=2.5, seed=seed)
    g = topology.build_interference_graph(net)
    fs = topology.enumerate_all_local_feasible(net, g)
    for x in all_schedules(n):
        assert topology.is_locally_feasible(fs, g, x) == topology.is_feasible(net, g, x)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), n=st.integers(2, 7))
def test_local_tables_match_independent_sets(seed, n):
    net = random_conflict_network(np.random.default_rng(seed), n)
    g = topology.build_interference_graph(net)
    fs = topology.enumerate_all_local_feasible(net, g)
    indep = {tuple(x) for x in independent_sets(net.adjacency)}
    for x in all_schedules(n):
        assert topology.is_locally_feasible(fs, g, x) == (tuple(x) in indep)


def test_network_roundtrip(tmp_path):
    sinr = topology.generate_random_network(9, seed=2, radio=RadioParams(noise_power=1e-3))
    conflict = topology.build_conflict_graph_network(topology.grid_adjacency(2, 3))
    for net in (sinr, conflict):
        assert topology.loads_network(topology.dumps_network(net)) == net
        path = tmp_path / "net.txt"
        topology.save_network(net, path)
        assert topology.load_network(path) == net
