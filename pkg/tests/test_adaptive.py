import math

import numpy as np
import pytest
from scipy.optimize import brentq

from csmabethe import adaptive, topology
from csmabethe.adaptive import SGD1, SGD2
from csmabethe.csma import CsmaChain
from csmabethe.utility import log_utility


def test_sgd_schedules():
    assert SGD1.step_size(1) == pytest.approx(1 / (3 * math.log(3)))
    assert [SGD1.update_interval(j) for j in (1, 2, 3)] == [3, 4, 5]
    assert SGD2.step_size(4) == 0.25
    assert [SGD2.update_interval(j) for j in (1, 4, 9)] == [3, 8, 21]
    assert adaptive.sgd_variant("SGD2") is SGD2


def test_sgd_matches_manual_updates(path3):
    target = np.array([0.2, 0.3, 0.2])
    res = adaptive.sgd_run(path3, target, SGD1, 30, seed=4)
    # windows 3, 4, 5, 6, 7 and a truncated 5
    assert res.iterations == 6
    assert res.slots.tolist() == [3, 7, 12, 18, 25, 30]
    chain = CsmaChain(path3, seed=4)
    log_lam = np.zeros(3)
    for j, w in enumerate([3, 4, 5, 6, 7, 5], start=1):
        before = chain.total_active.copy()
        chain.run(log_lam, w)
        log_lam = log_lam + SGD1.step_size(j) * (target - (chain.total_active - before) / w)
    np.testing.assert_allclose(res.final.log_lambdas, log_lam, rtol=0, atol=0)


def test_sgd_record_every_and_determinism(path3):
    a = adaptive.sgd_run(path3, [0.2] * 3, SGD2, 10_000, seed=1, record_every=2500)
    b = adaptive.sgd_run(path3, [0.2] * 3, SGD2, 10_000, seed=1, record_every=2500)
    assert a.slots.tolist() == [2500, 5000, 7500, 10_000]
    np.testing.assert_array_equal(a.running_error, b.running_error)
    # recording must not perturb the trajectory
    c = adaptive.sgd_run(path3, [0.2] * 3, SGD2, 10_000, seed=1)
    np.testing.assert_array_equal(a.final.log_lambdas, c.final.log_lambdas)


def test_sgd_inits(path3):
    res = adaptive.sgd_run(path3, [0.2] * 3, SGD1, 3, init="near_zero")
    assert np.all(res.final.log_lambdas < -19)
    with pytest.raises(ValueError):
        adaptive.sgd_run(path3, [0.2] * 3, SGD1, 3, init="ones")
    with pytest.raises(ValueError):
        adaptive.sgd_run(path3, [0.2] * 3, SGD1, 2)


def test_sgd_single_link_moves_toward_target():
    net = topology.build_conflict_graph_network(np.zeros((1, 1), dtype=bool))
    res = adaptive.sgd_run(net, [0.2], SGD2, 200_000, seed=0)
    # lambda starts at 1 (rate 1/2) and must come down
    assert res.final.log_lambdas[0] < -0.5


# -- local utility maximisation ---------------------------------------------


def _graph_and_sets(net):
    g = topology.build_interference_graph(net)
    return g, topology.enumerate_all_local_feasible(net, g)


def test_steps():
    assert adaptive.harmonic_step(4) == 0.25
    assert adaptive.scaled_harmonic_step(10)(4) == 2.5
    assert adaptive.constant_step(0.3)(99) == 0.3
    with pytest.raises(ValueError):
        adaptive.constant_step(0)


def test_umax_init_validation(path3):
    g, _ = _graph_and_sets(path3)
    with pytest.raises(ValueError):
        adaptive.umax_init(g, 0.0)


def test_first_step_by_hand(two_clique):
    g, fs = _graph_and_sets(two_clique)
    state = adaptive.umax_init(g, 1.0)
    new, rep = adaptive.umax_step(state, fs, log_utility())
    # beta = 0: rates 1, local law uniform over {00, 10, 01} -> m = 1/3
    np.testing.assert_allclose(new.rates, [1.0, 1.0])
    np.testing.assert_allclose(new.marginals[0], [1 / 3, 1 / 3])
    np.testing.assert_allclose(new.betas[0], [2 / 3, 2 / 3])
    assert rep.norm == pytest.approx(math.sqrt(4 * (2 / 3) ** 2))
    assert new.iteration == 1 and rep.iteration == 0


def test_subgradient_inequality(path3, rng):
    g, fs = _graph_and_sets(path3)
    u = log_utility()
    for _ in range(20):
        state = adaptive.umax_init(g, 2.0)
        state.betas = [rng.normal(size=len(h)) for h in g.neighborhoods]
        new, rep = adaptive.umax_step(state, fs, u)
        other = adaptive.umax_init(g, 2.0)
        other.betas = [b + rng.normal(scale=0.5, size=b.size) for b in state.betas]
        d0 = adaptive.umax_dual_value(state, fs, u)
        d1 = adaptive.umax_dual_value(other, fs, u)
        lin = sum(float(gj @ (b1 - b0)) for gj, b0, b1 in zip(rep.g, state.betas, other.betas))
        assert d1 >= d0 + lin - 1e-10
        assert all(np.all((m > 0) & (m < 1)) for m in new.marginals)


def test_single_link_fixed_point():
    net = topology.build_conflict_graph_network(np.zeros((1, 1), dtype=bool))
    # fixed point: e^b / (1 + e^b) = 1 / b
    b_star = brentq(lambda b: math.exp(b) / (1 + math.exp(b)) - 1 / b, 1.0, 2.0)
    res = adaptive.umax_run(net, log_utility(), 1.0, step=adaptive.constant_step(1.0),
                            max_iters=50, stop_norm=1e-8)
    assert res.subgradient_norm[-1] <= 1e-8
    assert res.state.betas[0][0] == pytest.approx(b_star, abs=1e-7)
    assert res.rates[-1][0] == pytest.approx(1 / b_star, abs=1e-7)


def test_two_clique_large_theta(two_clique):
    res = adaptive.umax_run(two_clique, log_utility(), 100.0,
                            step=adaptive.scaled_harmonic_step(100.0), max_iters=2000)
    np.testing.assert_allclose(res.rates[-1], [0.5, 0.5], atol=0.02)
    assert np.all(np.isfinite(res.fugacities.log_lambdas))


def test_max_iters_one(path3):
    res = adaptive.umax_run(path3, log_utility(), 1.0, max_iters=1)
    assert res.iterations.tolist() == [0]
    with pytest.raises(ValueError):
        adaptive.umax_run(path3, log_utility(), 1.0, max_iters=0)


def test_final_fugacities_clip_saturated_rates(two_clique):
    g, _ = _graph_and_sets(two_clique)
    state = adaptive.umax_init(g, 1.0)  # beta = 0 gives rate 1 on both links
    fug = adaptive.umax_final_fugacities(state, log_utility())
    assert np.all(np.isfinite(fug.log_lambdas))
