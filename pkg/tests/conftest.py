import itertools

import numpy as np
import pytest

from csmabethe import topology


def random_conflict_network(rng, n, p=0.5):
    upper = np.triu(rng.random((n, n)) < p, 1)
    return topology.build_conflict_graph_network(upper | upper.T)


def random_sinr_network(rng, n, plane_side=3.0):
    seed = int(rng.integers(2**31))
    return topology.generate_random_network(n, plane_side=plane_side, seed=seed)


def random_small_network(rng, n, kind):
    if kind == topology.CONFLICT_GRAPH:
        return random_conflict_network(rng, n)
    return random_sinr_network(rng, n)


def all_schedules(n):
    return [np.array(x) for x in itertools.product((0, 1), repeat=n)]


def independent_sets(adj):
    n = adj.shape[0]
    out = []
    for x in all_schedules(n):
        a = np.flatnonzero(x)
        if not adj[np.ix_(a, a)].any():
            out.append(x)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def two_clique():
    return topology.build_conflict_graph_network(topology.complete_adjacency(2))


@pytest.fixture
def path3():
    return topology.build_conflict_graph_network(topology.path_adjacency(3))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
