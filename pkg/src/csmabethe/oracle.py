"""Exact small-network ground truth by enumerating every feasible schedule.

Global schedules are encoded as integers with bit ``i`` the activity of link
``i``.  The stationary law is ``p(x) ∝ prod_i lambda_i^{x_i}`` over feasible
``x``; everything here evaluates it by brute force.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog, minimize
from scipy.special import logsumexp, softmax

from .bethe import FugacityVector
from .errors import EnumerationTooLarge, TargetOutsideCapacity
from .maxent import SolverSettings, maximize_dual
from .topology import build_interference_graph, enumerate_all_local_feasible
from .utility import as_utilities

GLOBAL_ENUMERATION_CAP = 24


@dataclass(frozen=True, eq=False)
class FeasibleScheduleSet:
    n_links: int
    codes: np.ndarray  # sorted ascending

    @property
    def count(self):
        return int(self.codes.size)

    def bits(self, dtype=float):
        return ((self.codes[:, None] >> np.arange(self.n_links)) & 1).astype(dtype)

    def to_hex(self):
        width = max(1, (self.n_links + 3) // 4)
        return [format(int(c), f"0{width}x") for c in self.codes]

    def __contains__(self, code):
        k = np.searchsorted(self.codes, code)
        return bool(k < self.codes.size and self.codes[k] == code)


def schedule_code(x):
    return int(sum(1 << i for i, v in enumerate(x) if v))


def enumerate_feasible_schedules(network, graph=None, feasible_sets=None,
                                 cap=GLOBAL_ENUMERATION_CAP):
    """Every globally feasible schedule, by depth-first search with pruning.

    Feasibility is closed under deactivating links, so a branch is cut as
    soon as adding a link breaks feasibility at that link or at an already
    active neighbour.
    """
    n = network.n_links
    if n > cap:
        raise EnumerationTooLarge(f"global enumeration too large: N = {n} > cap {cap}")
    graph = build_interference_graph(network) if graph is None else graph
    if feasible_sets is None:
        feasible_sets = enumerate_all_local_feasible(network, graph)
    tables = [fs.table for fs in feasible_sets]
    # touches[k] = [(j, bit of k inside N_j)] for j in N_k
    touches = [[(j, graph.position(j, k)) for j in graph.neighborhoods[k]] for k in range(n)]
    masks = [0] * n
    found = []

    def dfs(k, code):
        if k == n:
            found.append(code)
            return
        dfs(k + 1, code)
        for j, bit in touches[k]:
            if (j == k or code >> j & 1) and not tables[j][masks[j] | (1 << bit)]:
                return
        for j, bit in touches[k]:
            masks[j] |= 1 << bit
        dfs(k + 1, code | (1 << k))
        for j, bit in touches[k]:
            masks[j] &= ~(1 << bit)

    dfs(0, 0)
    return FeasibleScheduleSet(n, np.array(sorted(found), dtype=np.int64))


def _energies(log_lambdas, schedules):
    bits = schedules.bits(bool)
    log_lambdas = np.asarray(log_lambdas, dtype=float)
    return np.where(bits, log_lambdas[None, :], 0.0).sum(axis=1)


def _log_lambdas(fugacities):
    if isinstance(fugacities, FugacityVector):
        return fugacities.log_lambdas
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(fugacities, dtype=float))


def exact_log_partition(fugacities, schedules):
    """``ln Z`` with ``Z = sum_x prod_i lambda_i^{x_i}`` over feasible schedules.

    ``fugacities`` is a :class:`FugacityVector` or plain (linear) lambdas.
    """
    return float(logsumexp(_energies(_log_lambdas(fugacities), schedules)))


def exact_state_probabilities(fugacities, schedules):
    return softmax(_energies(_log_lambdas(fugacities), schedules))


def exact_marginals(fugacities, schedules):
    """Service rates ``s_i = P(x_i = 1)`` under the product-form law."""
    return exact_state_probabilities(fugacities, schedules) @ schedules.bits()


def exact_fugacities(s, schedules, settings=None, r0=None):
    """Invert the service-rate map exactly: the fugacities whose marginals are ``s``."""
    settings = SolverSettings() if settings is None else settings
    s = np.asarray(s, dtype=float)
    res = maximize_dual(schedules.bits(), s, settings, r0)
    if not res.converged:
        raise TargetOutsideCapacity(
            f"target rates not supportable: solver stopped with |grad| = {res.grad_norm:.3g}"
        )
    return FugacityVector(res.r)


@dataclass(frozen=True)
class CapacityMembership:
    status: str  # interior | boundary | outside
    margin: float


def capacity_membership(s, schedules, tol=1e-9):
    """Locate ``s`` relative to the capacity region ``conv(schedules)``.

    The margin is ``min(t*, min_i s_i)`` where ``t*`` is the largest uniform
    increment with ``s + t*`` still dominated by a schedule mixture; feasible
    sets are closed under deactivation, so dominance equals membership.
    """
    s = np.asarray(s, dtype=float)
    bits = schedules.bits()
    m, n = bits.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    a_ub = np.hstack([-bits.T, np.ones((n, 1))])
    a_eq = np.hstack([np.ones((1, m)), np.zeros((1, 1))])
    bounds = [(0, None)] * m + [(-2.0, 2.0)]
    res = linprog(c, A_ub=a_ub, b_ub=-s, A_eq=a_eq, b_eq=[1.0], bounds=bounds, method="highs")
    margin = min(float(res.x[-1]), float(np.min(s)))
    if margin > tol:
        return CapacityMembership("interior", margin)
    if margin >= -tol:
        return CapacityMembership("boundary", margin)
    return CapacityMembership("outside", margin)


def utility_optimum_bruteforce(schedules, utilities, tol=1e-12, max_iter=1000):
    """``max_{y in conv(schedules)} sum_j U_j(y_j)`` over mixture weights.

    Returns ``(y_star, value)``.  Intended for N <= 8.
    """
    bits = schedules.bits()
    m, n = bits.shape
    utilities = as_utilities(utilities, n)

    def neg(w):
        y = w @ bits
        return -sum(float(u.value(v)) for u, v in zip(utilities, y))

    def neg_grad(w):
        y = w @ bits
        dy = np.array([float(u.derivative(v)) for u, v in zip(utilities, y)])
        return -(bits @ dy)

    w0 = np.full(m, 1.0 / m)
    res = minimize(
        neg, w0, jac=neg_grad, method="SLSQP",
        bounds=[(0.0, 1.0)] * m,
        constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1.0,
                      "jac": lambda w: np.ones_like(w)}],
        options={"ftol": tol, "maxiter": max_iter},
    )
    w = np.clip(res.x, 0.0, None)
    w /= w.sum()
    y = w @ bits
    return y, -neg(w)
