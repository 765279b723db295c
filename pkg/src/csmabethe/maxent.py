"""Concave maximum-entropy dual: maximise ``s.r - logsumexp(Y r)``.

Both the local Gibbsian problems and the exact (global) fugacity inversion
are instances: ``Y`` holds one 0/1 pattern per row and ``s`` the target
marginals.  The gradient is ``s - Y^T p(r)`` with ``p`` the Gibbs weights, the
Hessian is minus the covariance of the rows under ``p``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp, softmax

DAMPED_NEWTON = "damped_newton"
GRADIENT_ASCENT = "gradient_ascent_backtracking"


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = 1e-10
    max_iters: int = 200
    method: str = DAMPED_NEWTON
    divergence_norm: float = 50.0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.method not in (DAMPED_NEWTON, GRADIENT_ASCENT):
            raise ValueError(f"unknown solver method {self.method!r}")


@dataclass
class DualResult:
    r: np.ndarray
    grad: np.ndarray
    converged: bool
    diverged: bool
    n_iter: int
    objective_trace: list = field(default_factory=list)

    @property
    def grad_norm(self):
        return float(np.max(np.abs(self.grad))) if self.grad.size else 0.0


def dual_objective(r, Y, s):
    return float(s @ r - logsumexp(Y @ r))


def dual_gradient(r, Y, s):
    return s - softmax(Y @ r) @ Y


def _eval(r, Y, s):
    a = Y @ r
    lse = logsumexp(a)
    p = np.exp(a - lse)
    mean = p @ Y
    return float(s @ r - lse), s - mean, p, mean


def _newton_direction(g, p, mean, Y):
    cov = (Y * p[:, None]).T @ Y - np.outer(mean, mean)
    try:
        chol = np.linalg.cholesky(cov + 1e-14 * np.eye(cov.shape[0]))
    except np.linalg.LinAlgError:
        return None
    return np.linalg.solve(chol.T, np.linalg.solve(chol, g))


def _polish(r, g, f, p, mean, Y, s):
    # one extra full Newton step once converged; ill-conditioned neighbourhoods
    # otherwise keep ~cond * tolerance error in r
    d = _newton_direction(g, p, mean, Y)
    if d is None:
        return r, g, f
    f_new, g_new, _, _ = _eval(r + d, Y, s)
    if np.max(np.abs(g_new)) < np.max(np.abs(g)):
        return r + d, g_new, f_new
    return r, g, f


def maximize_dual(Y, s, settings=None, r0=None):
    """Maximise the dual; never raises, the caller decides what failure means."""
    settings = SolverSettings() if settings is None else settings
    Y = np.asarray(Y, dtype=float)
    s = np.asarray(s, dtype=float)
    r = np.zeros(Y.shape[1]) if r0 is None else np.array(r0, dtype=float)
    f, g, p, mean = _eval(r, Y, s)
    trace = [f]
    for it in range(settings.max_iters + 1):
        if np.max(np.abs(g), initial=0.0) <= settings.tolerance:
            if settings.method == DAMPED_NEWTON:
                r, g, f = _polish(r, g, f, p, mean, Y, s)
            return DualResult(r, g, True, False, it, trace)
        if np.max(np.abs(r), initial=0.0) > settings.divergence_norm or it == settings.max_iters:
            break
        direction = None
        if settings.method == DAMPED_NEWTON:
            direction = _newton_direction(g, p, mean, Y)
        if direction is None:
            direction = g
        slope = float(g @ direction)
        slack = 1e-13 * max(1.0, abs(f))
        t = 1.0
        while True:
            r_new = r + t * direction
            f_new, g_new, p_new, mean_new = _eval(r_new, Y, s)
            if f_new >= f + 1e-4 * t * slope - slack or t < 1e-12:
                break
            t *= 0.5
        r, f, g, p, mean = r_new, f_new, g_new, p_new, mean_new
        trace.append(f)
    return DualResult(r, g, False, bool(np.max(np.abs(r)) > settings.divergence_norm),
                      len(trace) - 1, trace)
