import numpy as np
import pytest

from csmabethe import csma, oracle, topology
from csmabethe.bethe import FugacityVector

from conftest import random_conflict_network, random_sinr_network


def reference_glauber(net, lam, slots, seed):
    """Slow first-principles chain driven by the documented random stream."""
    n = net.n_links
    g = topology.build_interference_graph(net)
    rng = np.random.Generator(np.random.Philox(seed))
    choice = rng.integers(0, n, size=csma.RNG_BLOCK, dtype=np.int64)
    unif = rng.random(csma.RNG_BLOCK)
    x = np.zeros(n, dtype=int)
    total = np.zeros(n, dtype=int)
    p_on = np.asarray(lam) / (1 + np.asarray(lam))
    for t in range(slots):
        i = choice[t]
        trial = x.copy()
        trial[i] = 1
        ok = topology.is_feasible(net, g, trial)
        x[i] = 1 if ok and unif[t] < p_on[i] else 0
        total += x
    return x, total


@pytest.mark.parametrize("kind", ["conflict", "sinr"])
def test_kernel_matches_reference(kind, rng):
    net = random_conflict_network(rng, 6) if kind == "conflict" else random_sinr_network(rng, 6)
    lam = rng.uniform(0.3, 3.0, 6)
    x_ref, total_ref = reference_glauber(net, lam, 4000, seed=11)
    chain = csma.CsmaChain(net, seed=11).run(FugacityVector.from_lambdas(lam), 4000)
    np.testing.assert_array_equal(chain.schedule, x_ref)
    np.testing.assert_array_equal(chain.total_active, total_ref)


def test_segmentation_does_not_change_the_run(path3):
    lam = np.log([0.7, 1.3, 0.4])
    one = csma.CsmaChain(path3, seed=5).run(lam, 150_000)
    two = csma.CsmaChain(path3, seed=5)
    for k in (1, 999, 70_000, 79_000):
        two.run(lam, k)
    np.testing.assert_array_equal(one.total_active, two.total_active)
    np.testing.assert_array_equal(one.schedule, two.schedule)


def test_glauber_step_advances_one_slot(path3):
    chain = csma.CsmaChain(path3)
    csma.glauber_step(chain, np.zeros(3))
    assert chain.slot == 1


def test_single_link_rate():
    net = topology.build_conflict_graph_network(np.zeros((1, 1), dtype=bool))
    stats = csma.simulate(net, FugacityVector.from_lambdas([2 / 3]), 1_000_000, seed=3)
    assert stats.achieved[0] == pytest.approx(0.4, abs=0.005)


def test_single_link_rate_increases_with_fugacity():
    net = topology.build_conflict_graph_network(np.zeros((1, 1), dtype=bool))
    rates = [csma.simulate(net, FugacityVector.from_lambdas([lam]), 200_000, seed=0).achieved[0]
             for lam in (0.5, 1.0, 2.0)]
    assert rates[0] < rates[1] < rates[2]


def test_never_visits_infeasible_states(rng):
    net = random_sinr_network(rng, 6)
    sched = oracle.enumerate_feasible_schedules(net)
    stats = csma.simulate(net, np.full(6, 2.0), 200_000, seed=1, state_histogram=True)
    visited = np.flatnonzero(stats.state_counts)
    assert all(int(c) in sched for c in visited)
    assert stats.state_counts.sum() == stats.measured


def test_rates_track_exact_marginals(path3):
    lam = np.array([0.5, 2.0, 1.5])
    exact = oracle.exact_marginals(lam, oracle.enumerate_feasible_schedules(path3))
    stats = csma.simulate(path3, FugacityVector.from_lambdas(lam), 1_000_000, seed=2)
    np.testing.assert_allclose(stats.achieved, exact, atol=0.01)


def test_seed_determinism(path3):
    a = csma.simulate(path3, np.zeros(3), 50_000, seed=9)
    b = csma.simulate(path3, np.zeros(3), 50_000, seed=9)
    c = csma.simulate(path3, np.zeros(3), 50_000, seed=10)
    np.testing.assert_array_equal(a.active_slots, b.active_slots)
    assert not np.array_equal(a.active_slots, c.active_slots)


def test_burn_in_and_window(path3):
    stats = csma.simulate(path3, np.zeros(3), 10_000)
    assert stats.burn_in == 1000 and stats.measured == 9000
    with pytest.raises(ValueError):
        csma.simulate(path3, np.zeros(3), 100, burn_in=100)


def test_trajectory_and_running_error(path3):
    stats = csma.simulate(path3, np.zeros(3), 10_000, burn_in=0, target=[0.2, 0.2, 0.2],
                          record_every=3000)
    assert stats.trajectory_slots.tolist() == [3000, 6000, 9000, 10_000]
    last = stats.trajectory_active[-1] / 10_000
    assert stats.running_errors()[-1] == pytest.approx(np.mean(np.abs(last - 0.2)))
    header = stats.to_csv().splitlines()[0]
    assert header == "link_id,target,achieved,active_slots,window"


def test_bethe_error():
    assert csma.bethe_error([0.2, 0.4], [0.25, 0.3]) == pytest.approx(0.075)
    with pytest.raises(ValueError):
        csma.bethe_error([0.2], [0.2, 0.3])


def test_histogram_size_limit():
    net = topology.build_conflict_graph_network(topology.path_adjacency(21))
    with pytest.raises(ValueError):
        csma.CsmaChain(net, state_histogram=True)
