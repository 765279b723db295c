"""Concave per-link utilities and the one-dimensional rate subproblem."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

LOG = "log"
WEIGHTED_LOG = "weighted_log"
LINEAR = "linear"
GENERIC = "generic"


@dataclass(frozen=True)
class Utility:
    """A concave utility ``U: [0, 1] -> R``.

    ``generic`` utilities supply ``func`` and its derivative ``deriv``.
    """

    kind: str = LOG
    weight: float = 1.0
    func: Callable | None = None
    deriv: Callable | None = None

    def __post_init__(self):
        if self.kind not in (LOG, WEIGHTED_LOG, LINEAR, GENERIC):
            raise ValueError(f"unknown utility kind {self.kind!r}")
        if self.kind == GENERIC and (self.func is None or self.deriv is None):
            raise ValueError("generic utility needs func and deriv")
        if self.kind in (WEIGHTED_LOG, LINEAR) and self.weight < 0:
            raise ValueError("utility weight must be non-negative")

    def value(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind in (LOG, WEIGHTED_LOG):
            w = 1.0 if self.kind == LOG else self.weight
            with np.errstate(divide="ignore"):
                return w * np.log(q)
        if self.kind == LINEAR:
            return self.weight * q
        return np.vectorize(self.func, otypes=[float])(q)

    def derivative(self, q):
        q = np.asarray(q, dtype=float)
        if self.kind in (LOG, WEIGHTED_LOG):
            w = 1.0 if self.kind == LOG else self.weight
            with np.errstate(divide="ignore"):
                return w / q
        if self.kind == LINEAR:
            return np.full_like(q, self.weight)
        return np.vectorize(self.deriv, otypes=[float])(q)


def log_utility():
    return Utility(LOG)


def weighted_log_utility(w):
    return Utility(WEIGHTED_LOG, weight=w)


def linear_utility(w=1.0):
    return Utility(LINEAR, weight=w)


def generic_utility(func, deriv):
    return Utility(GENERIC, func=func, deriv=deriv)


def one_dim_utility_opt(utility, theta, c, tol=1e-12):
    """``argmax_{q in [0, 1]} theta * U(q) - q * c``."""
    if utility.kind in (LOG, WEIGHTED_LOG):
        w = 1.0 if utility.kind == LOG else utility.weight
        if c <= theta * w:
            return 1.0
        return theta * w / c
    if utility.kind == LINEAR:
        # indifference resolves to q = 1
        return 1.0 if theta * utility.weight >= c else 0.0

    def slope(q):
        return theta * float(utility.deriv(q)) - c

    if slope(1.0) >= 0.0:
        return 1.0
    if slope(0.0) <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def total_utility(utilities, y):
    return float(sum(u.value(v) for u, v in zip(utilities, y)))


def as_utilities(utilities, n):
    if isinstance(utilities, Utility):
        return [utilities] * n
    utilities = list(utilities)
    if len(utilities) != n:
        raise ValueError(f"expected {n} utilities, got {len(utilities)}")
    return utilities

