"""Local Gibbsian fugacities and their Bethe-approximated global combination.

Every link ``i`` solves a small concave problem over its own local feasible
set ``I_i``: find log-weights ``beta_i = [beta_ik]_{k in N_i}`` whose
exponential-family distribution on ``I_i`` has single-bit marginals equal to
the target service rates of the neighbourhood.  The global log-fugacity of
link ``i`` is then

    ln lambda_i = (d_i - 1) ln((1 - s_i) / s_i) + sum_{j in N_i} beta_ji

which is the unique stationary point of the vertex-factorised Bethe free
energy whose variable marginals equal ``s``.  All fugacity arithmetic is done
in the log domain.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.special import logsumexp, xlogy

from .errors import (
    DegenerateRate,
    InconsistentMarginals,
    InfeasibleLocalRates,
    RatePairOverload,
)
from .maxent import SolverSettings, maximize_dual
from .topology import build_interference_graph, enumerate_all_local_feasible


def as_service_rates(s, n=None):
    """Validate a service-rate vector: every entry strictly inside (0, 1)."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    if n is not None and s.shape != (n,):
        raise ValueError(f"expected {n} service rates, got shape {s.shape}")
    if not np.all(np.isfinite(s)) or np.any(s <= 0.0) or np.any(s >= 1.0):
        raise DegenerateRate("service rates must lie strictly inside (0, 1)")
    return s


@dataclass(frozen=True)
class LocalFugacities:
    owner: int
    neighbors: tuple
    beta: np.ndarray  # beta[p] pairs with neighbors[p]

    def __getitem__(self, k):
        return float(self.beta[self.neighbors.index(k)])

    def as_dict(self):
        return {k: float(b) for k, b in zip(self.neighbors, self.beta)}


@dataclass(frozen=True)
class FugacityVector:
    log_lambdas: np.ndarray

    @property
    def lambdas(self):
        return np.exp(self.log_lambdas)

    def __len__(self):
        return self.log_lambdas.size

    @classmethod
    def from_lambdas(cls, lam):
        with np.errstate(divide="ignore"):
            return cls(np.log(np.asarray(lam, dtype=float)))

    def to_csv(self):
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["link_id", "log_lambda", "lambda"])
        for k, ll in enumerate(self.log_lambdas):
            w.writerow([k, repr(float(ll)), repr(float(np.exp(ll)))])
        return out.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.DictReader(io.StringIO(text)))
        rows.sort(key=lambda r: int(r["link_id"]))
        return cls(np.array([float(r["log_lambda"]) for r in rows]))


def local_fugacities_to_csv(locals_):
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["owner", "neighbor", "beta"])
    for lf in locals_:
        for k, b in zip(lf.neighbors, lf.beta):
            w.writerow([lf.owner, k, repr(float(b))])
    return out.getvalue()


@dataclass(frozen=True)
class FactorMarginal:
    owner: int
    neighbors: tuple
    members: np.ndarray  # bitmasks
    probs: np.ndarray

    def bit_marginals(self):
        d = len(self.neighbors)
        bits = (self.members[:, None] >> np.arange(d)) & 1
        return self.probs @ bits

    def entropy(self):
        return float(-np.sum(xlogy(self.probs, self.probs)))


def _local_rates(fs, s_local):
    if isinstance(s_local, Mapping):
        missing = [k for k in fs.neighbors if k not in s_local]
        if missing:
            raise KeyError(f"no service rate for neighbour(s) {missing} of link {fs.owner}")
        s_local = [s_local[k] for k in fs.neighbors]
    return as_service_rates(s_local, len(fs.neighbors))


def solve_local_gibbsian(fs, s_local, settings=None, r0=None, return_result=False):
    """Local fugacities of link ``fs.owner`` for the neighbourhood rates ``s_local``.

    ``s_local`` is either a mapping ``k -> s_k`` or a sequence ordered like
    ``fs.neighbors``.  Raises :class:`InfeasibleLocalRates` when the solver
    diverges or runs out of iterations, which happens when the rates are not
    in the interior of the convex hull of ``I_i``.
    """
    settings = SolverSettings() if settings is None else settings
    s = _local_rates(fs, s_local)
    res = maximize_dual(fs.patterns(), s, settings, r0)
    if not res.converged:
        why = "diverged" if res.diverged else f"no convergence in {res.n_iter} iterations"
        raise InfeasibleLocalRates(
            f"link {fs.owner}: local rates not supportable ({why}, "
            f"|grad| = {res.grad_norm:.3g})",
            link=fs.owner,
        )
    lf = LocalFugacities(fs.owner, fs.neighbors, res.r)
    return (lf, res) if return_result else lf


def combine_global_log_fugacity(s_i, d_i, incoming: Mapping, neighbors=None):
    """``ln lambda_i`` from the owner's rate, its degree and the incoming ``beta_ji``."""
    if neighbors is not None:
        missing = [j for j in neighbors if j not in incoming]
        if missing:
            raise KeyError(f"missing incoming local fugacity from neighbour {missing[0]}")
        if len(neighbors) != d_i:
            raise ValueError("degree does not match neighbourhood size")
    elif len(incoming) != d_i:
        raise ValueError(f"expected {d_i} incoming local fugacities, got {len(incoming)}")
    s_i = float(as_service_rates(s_i)[0])
    return (d_i - 1) * (np.log1p(-s_i) - np.log(s_i)) + float(sum(incoming.values()))


def combine_global_fugacity(s_i, d_i, incoming: Mapping, neighbors=None):
    return float(np.exp(combine_global_log_fugacity(s_i, d_i, incoming, neighbors)))


def _prepare(network, graph, feasible_sets):
    graph = build_interference_graph(network) if graph is None else graph
    if feasible_sets is None:
        feasible_sets = enumerate_all_local_feasible(network, graph)
    return graph, feasible_sets


def solve_all_local(graph, feasible_sets, s, settings=None, init=None):
    """Local fugacities for every link; ``init`` is an optional per-link list of starts."""
    out = []
    for i, fs in enumerate(feasible_sets):
        r0 = None if init is None else init[i]
        out.append(solve_local_gibbsian(fs, s[list(fs.neighbors)], settings, r0))
    return out


def global_from_local(graph, s, locals_):
    logs = np.empty(graph.n_links)
    for i, hood in enumerate(graph.neighborhoods):
        incoming = {j: locals_[j][i] for j in hood}
        logs[i] = combine_global_log_fugacity(s[i], len(hood), incoming)
    return FugacityVector(logs)


def bethe_fugacities(network, s, graph=None, feasible_sets=None, settings=None,
                     init=None, return_local=False):
    """Bethe-approximated fugacities for the target rates ``s``.

    Solves the local Gibbsian problem at every link, then combines the local
    fugacities into global ones.  ``init`` may give per-link solver starts.
    """
    graph, feasible_sets = _prepare(network, graph, feasible_sets)
    s = as_service_rates(s, network.n_links)
    locals_ = solve_all_local(graph, feasible_sets, s, settings, init)
    fug = global_from_local(graph, s, locals_)
    return (fug, locals_) if return_local else fug


# ---------------------------------------------------------------------------
# Conflict-graph closed forms


def _conflict_terms(s_i, neighbor_rates):
    s_i = float(as_service_rates(s_i)[0])
    ks = list(neighbor_rates)
    sk = as_service_rates([neighbor_rates[k] for k in ks]) if ks else np.empty(0)
    free = 1.0 - s_i - sk
    if np.any(free <= 0.0):
        bad = [k for k, f in zip(ks, free) if f <= 0.0]
        raise RatePairOverload(f"s_i + s_k >= 1 for neighbour(s) {bad}")
    return s_i, ks, sk, np.log(free)


def conflict_local_fugacities(s_i, neighbor_rates: Mapping, owner=0):
    """Closed-form local fugacities of a conflict-graph link.

    ``neighbor_rates`` maps every ``k in N_i \\ {i}`` to ``s_k``.
    """
    s_i, ks, sk, log_free = _conflict_terms(s_i, neighbor_rates)
    size = len(ks) + 1
    own = np.log(s_i) + (size - 2) * np.log1p(-s_i) - log_free.sum()
    values = {owner: own}
    values.update({k: np.log(v) - lf for k, v, lf in zip(ks, sk, log_free)})
    hood = tuple(sorted(values))
    return LocalFugacities(owner, hood, np.array([values[k] for k in hood]))


def conflict_log_fugacity_vertex(s_i, neighbor_rates):
    s_i, ks, _, log_free = _conflict_terms(s_i, neighbor_rates)
    size = len(ks) + 1
    return np.log(s_i) + (2 * size - 3) * np.log1p(-s_i) - 2.0 * log_free.sum()


def conflict_log_fugacity_edge(s_i, neighbor_rates):
    s_i, ks, _, log_free = _conflict_terms(s_i, neighbor_rates)
    size = len(ks) + 1
    return np.log(s_i) + (size - 2) * np.log1p(-s_i) - log_free.sum()


def conflict_global_fugacity_vertex(s_i, neighbor_rates):
    """Vertex-centric (local Gibbsian) global fugacity on a conflict graph."""
    return float(np.exp(conflict_log_fugacity_vertex(s_i, neighbor_rates)))


def conflict_global_fugacity_edge(s_i, neighbor_rates):
    """Edge-centric Bethe fugacity; exact when the conflict graph is a tree."""
    return float(np.exp(conflict_log_fugacity_edge(s_i, neighbor_rates)))


def conflict_fugacities(graph, s, form="vertex"):
    """Closed-form fugacity vector over a whole conflict-graph network."""
    fn = {"vertex": conflict_log_fugacity_vertex, "edge": conflict_log_fugacity_edge}[form]
    s = as_service_rates(s, graph.n_links)
    logs = np.array([
        fn(s[i], {k: s[k] for k in hood if k != i})
        for i, hood in enumerate(graph.neighborhoods)
    ])
    return FugacityVector(logs)


# ---------------------------------------------------------------------------
# Marginals and the Bethe free energy


def factor_marginal_from_fugacities(local, fs):
    Y = fs.patterns()
    a = Y @ np.asarray(local.beta, dtype=float)
    probs = np.exp(a - logsumexp(a))
    return FactorMarginal(fs.owner, fs.neighbors, fs.members.copy(), probs)


def _binary_entropy(p):
    return float(-(xlogy(p, p) + xlogy(1.0 - p, 1.0 - p)))


def bethe_free_energy(factor_marginals, variable_marginals, fugacities, graph,
                      feasible_sets, consistency_tol=1e-8):
    """Bethe free energy of the vertex factorisation.

    ``variable_marginals`` holds ``b_i(1)`` per link.  Factor marginals may
    carry patterns outside ``I_i``; any positive mass there makes the energy
    ``+inf``.  Raises :class:`InconsistentMarginals` when a factor's bit
    marginal disagrees with the variable marginal beyond ``consistency_tol``.
    """
    b1 = np.asarray(variable_marginals, dtype=float)
    log_lam = np.asarray(fugacities.log_lambdas, dtype=float)
    for fm in factor_marginals:
        if abs(float(np.sum(fm.probs)) - 1.0) > consistency_tol or np.any(fm.probs < 0):
            raise InconsistentMarginals(f"factor marginal of link {fm.owner} is not a distribution")
        gap = np.abs(fm.bit_marginals() - b1[list(fm.neighbors)])
        if np.max(gap) > consistency_tol:
            raise InconsistentMarginals(
                f"factor marginal of link {fm.owner} disagrees with variable marginals "
                f"(max gap {np.max(gap):.3g})"
            )
    for fm in factor_marginals:
        table = feasible_sets[fm.owner].table
        if np.any((fm.probs > 0) & ~table[fm.members]):
            return np.inf
    degrees = graph.degrees
    energy = 0.0
    for i, fm in enumerate(factor_marginals):
        if b1[i] > 0:
            energy -= b1[i] * log_lam[i]
        energy -= fm.entropy()
        energy += (degrees[i] - 1) * _binary_entropy(b1[i])
    return float(energy)


@dataclass(frozen=True)
class StationarityReport:
    max_entropy_residual: np.ndarray  # per link, max |bit marginal - s|
    fugacity_residual: np.ndarray  # per link, |ln lambda_i - combined|
    tol: float

    @property
    def passed(self):
        return bool(np.all(self.max_entropy_residual <= self.tol)
                    and np.all(self.fugacity_residual <= self.tol))


def check_stationarity(network, s, fugacities, graph=None, feasible_sets=None,
                       tol=1e-6, settings=None):
    """Check the two sufficient conditions for a BFE stationary point at ``b(1) = s``.

    (a) the max-entropy factor marginal at every link reproduces the
    neighbourhood rates; (b) every ``ln lambda_i`` equals the local
    combination of incoming local fugacities.
    """
    graph, feasible_sets = _prepare(network, graph, feasible_sets)
    s = as_service_rates(s, network.n_links)
    n = network.n_links
    ent = np.full(n, np.inf)
    fug = np.full(n, np.inf)
    locals_ = [None] * n
    for i, fs in enumerate(feasible_sets):
        try:
            locals_[i] = solve_local_gibbsian(fs, s[list(fs.neighbors)], settings)
        except InfeasibleLocalRates:
            continue
        fm = factor_marginal_from_fugacities(locals_[i], fs)
        ent[i] = np.max(np.abs(fm.bit_marginals() - s[list(fs.neighbors)]))
    log_lam = np.asarray(fugacities.log_lambdas, dtype=float)
    for i, hood in enumerate(graph.neighborhoods):
        if all(locals_[j] is not None for j in hood):
            incoming = {j: locals_[j][i] for j in hood}
            fug[i] = abs(log_lam[i] - combine_global_log_fugacity(s[i], len(hood), incoming))
    return StationarityReport(ent, fug, tol)
