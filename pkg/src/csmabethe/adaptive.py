"""Online fugacity adaptation.

* ``sgd_run``: stochastic-gradient baselines that update log-fugacities from
  observed CSMA service rates (SGD-1 / SGD-2 schedules).
* ``umax_*``: local utility maximisation, a dual subgradient method on the
  entropy-regularised problem over the Bethe capacity region.  Each link keeps
  one dual variable ``beta_jk`` per neighbour; no Markov chain is involved.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.special import logsumexp, softmax

from .bethe import FugacityVector, combine_global_log_fugacity
from .csma import CsmaChain, bethe_error
from .topology import build_interference_graph, enumerate_all_local_feasible
from .utility import as_utilities, one_dim_utility_opt

# beta such that lambda = e^-20, the "all zero fugacities" start
NEAR_ZERO_LOG_FUGACITY = -20.0


@dataclass(frozen=True)
class SgdVariant:
    name: str
    step_size: Callable[[int], float]
    update_interval: Callable[[int], int]


def _sgd1_step(j):
    return 1.0 / ((j + 2) * math.log(j + 2))


def _sgd1_interval(j):
    return j + 2


def _sgd2_step(j):
    return 1.0 / j


def _sgd2_interval(j):
    return math.ceil(math.exp(math.sqrt(j)))


SGD1 = SgdVariant("SGD1", _sgd1_step, _sgd1_interval)
SGD2 = SgdVariant("SGD2", _sgd2_step, _sgd2_interval)


def sgd_variant(name):
    return {"sgd1": SGD1, "sgd2": SGD2}[name.lower()]


def _initial_log_fugacities(init, n):
    if isinstance(init, str):
        if init == "zero":
            return np.zeros(n)
        if init == "near_zero":
            return np.full(n, NEAR_ZERO_LOG_FUGACITY)
        raise ValueError(f"unknown init {init!r}")
    if isinstance(init, FugacityVector):
        return init.log_lambdas.astype(float).copy()
    return np.array(init, dtype=float)


@dataclass
class SgdResult:
    slots: np.ndarray  # cumulative slot count at each recorded point
    log_lambdas: np.ndarray  # (records, N) fugacities in force after each update
    running_error: np.ndarray  # error of the cumulative time-average rates
    final: FugacityVector
    achieved: np.ndarray  # cumulative time-average over the whole run
    iterations: int


def sgd_run(network, target, variant, total_slots, seed=0, init="zero", graph=None,
            feasible_sets=None, record_every=None):
    """Adapt fugacities with observed rates: ``ln lambda += alpha(j) (s* - s_hat(j))``.

    Iteration ``j`` runs the chain for ``T(j)`` slots (continuing the same
    chain), where ``s_hat(j)`` is the average activity over that window.  The
    final window is truncated so that exactly ``total_slots`` slots are run.
    ``record_every`` samples the running error every K slots; by default one
    record per update.
    """
    target = np.asarray(target, dtype=float)
    chain = CsmaChain(network, graph, feasible_sets, seed)
    log_lam = _initial_log_fugacities(init, network.n_links)
    if total_slots < variant.update_interval(1):
        raise ValueError("total_slots must cover at least one update interval")
    rec_t, rec_l, rec_e = [], [], []
    next_record = record_every or 0

    def record():
        rec_t.append(chain.slot)
        rec_l.append(log_lam.copy())
        rec_e.append(bethe_error(target, chain.total_active / chain.slot))

    j = 0
    while chain.slot < total_slots:
        j += 1
        window = min(int(variant.update_interval(j)), total_slots - chain.slot)
        before = chain.total_active.copy()
        if record_every:
            left = window
            while left > 0:
                step = min(left, next_record - chain.slot)
                chain.run(log_lam, step)
                left -= step
                if chain.slot == next_record:
                    record()
                    next_record += record_every
        else:
            chain.run(log_lam, window)
        observed = (chain.total_active - before) / window
        log_lam = log_lam + variant.step_size(j) * (target - observed)
        if not record_every:
            record()
    if record_every and (not rec_t or rec_t[-1] != chain.slot):
        record()
    return SgdResult(
        slots=np.array(rec_t),
        log_lambdas=np.array(rec_l),
        running_error=np.array(rec_e),
        final=FugacityVector(log_lam),
        achieved=chain.total_active / chain.slot,
        iterations=j,
    )


# ---------------------------------------------------------------------------
# Local utility maximisation


def harmonic_step(t):
    return 1.0 / t


def scaled_harmonic_step(a):
    """``alpha(t) = a / t``; ``a`` of order theta keeps large-theta runs moving."""
    if a <= 0:
        raise ValueError("step scale must be positive")
    return lambda t: a / t


def constant_step(a):
    if a <= 0:
        raise ValueError("step must be positive")
    return lambda t: a


@dataclass
class UmaxState:
    """Dual iterate of the local utility-maximisation algorithm.

    ``betas[j][p]`` is ``beta_jk`` for ``k = graph.neighborhoods[j][p]``;
    ``rates`` and ``marginals`` hold the primal quantities computed at the
    last step.  ``step(t)`` is evaluated at ``t = iteration + 1``.
    """

    graph: object
    betas: list
    theta: float
    step: Callable[[int], float] = harmonic_step
    iteration: int = 0
    rates: np.ndarray | None = None
    marginals: list | None = None

    def beta(self, j, k):
        return float(self.betas[j][self.graph.position(j, k)])

    def incoming_sum(self, j):
        """``sum_{k in N_j} beta_kj``."""
        return float(sum(self.beta(k, j) for k in self.graph.neighborhoods[j]))


@dataclass
class SubgradientReport:
    g: list  # g[j][p] = m_jk - s_k
    norm: float
    iteration: int


def umax_init(graph, theta, step=harmonic_step):
    if theta <= 0:
        raise ValueError("theta must be positive")
    betas = [np.zeros(len(h)) for h in graph.neighborhoods]
    return UmaxState(graph, betas, float(theta), step)


def _local_marginals(betas_j, fs):
    Y = fs.patterns()
    return softmax(Y @ betas_j) @ Y


def umax_rates(state, utilities):
    n = state.graph.n_links
    utilities = as_utilities(utilities, n)
    return np.array([
        one_dim_utility_opt(utilities[j], state.theta, state.incoming_sum(j))
        for j in range(n)
    ])


def umax_step(state, feasible_sets, utilities):
    """One synchronous iteration; returns ``(new_state, report)``."""
    graph = state.graph
    rates = umax_rates(state, utilities)
    marginals = [_local_marginals(b, fs) for b, fs in zip(state.betas, feasible_sets)]
    alpha = state.step(state.iteration + 1)
    g = []
    new_betas = []
    for j, hood in enumerate(graph.neighborhoods):
        gj = marginals[j] - rates[list(hood)]
        g.append(gj)
        new_betas.append(state.betas[j] - alpha * gj)
    norm = float(np.sqrt(sum(float(gj @ gj) for gj in g)))
    new_state = replace(state, betas=new_betas, iteration=state.iteration + 1,
                        rates=rates, marginals=marginals)
    return new_state, SubgradientReport(g, norm, state.iteration)


def umax_dual_value(state, feasible_sets, utilities):
    """Dual function ``D(beta)``: sup of the Lagrangian over rates and local laws."""
    n = state.graph.n_links
    utilities = as_utilities(utilities, n)
    value = 0.0
    for j, fs in enumerate(feasible_sets):
        value += float(logsumexp(fs.patterns() @ state.betas[j]))
        c = state.incoming_sum(j)
        q = one_dim_utility_opt(utilities[j], state.theta, c)
        value += state.theta * float(utilities[j].value(q)) - q * c
    return value


@dataclass
class UmaxResult:
    iterations: np.ndarray
    rates: np.ndarray  # (iters, N) rates s(t)
    subgradient_norm: np.ndarray
    state: UmaxState
    fugacities: FugacityVector


def umax_final_fugacities(state, utilities, rate_clip=1e-9):
    """Global fugacities from the current local fugacities.

    Rates pinned at 0 or 1 by the one-dimensional problem are clipped to
    ``[rate_clip, 1 - rate_clip]`` before combining.
    """
    graph = state.graph
    rates = umax_rates(state, utilities)
    rates = np.clip(rates, rate_clip, 1.0 - rate_clip)
    logs = np.empty(graph.n_links)
    for j, hood in enumerate(graph.neighborhoods):
        incoming = {k: state.beta(k, j) for k in hood}
        logs[j] = combine_global_log_fugacity(rates[j], len(hood), incoming)
    return FugacityVector(logs)


def umax_run(network, utilities, theta, step=harmonic_step, max_iters=200, stop_norm=1e-2,
             graph=None, feasible_sets=None):
    """Iterate :func:`umax_step` until the subgradient norm drops to ``stop_norm``."""
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    graph = build_interference_graph(network) if graph is None else graph
    if feasible_sets is None:
        feasible_sets = enumerate_all_local_feasible(network, graph)
    utilities = as_utilities(utilities, network.n_links)
    state = umax_init(graph, theta, step)
    its, rates, norms = [], [], []
    for _ in range(max_iters):
        state, report = umax_step(state, feasible_sets, utilities)
        its.append(report.iteration)
        rates.append(state.rates)
        norms.append(report.norm)
        if report.norm <= stop_norm:
            break
    return UmaxResult(np.array(its), np.array(rates), np.array(norms), state,
                      umax_final_fugacities(state, utilities))
