"""Discrete-time CSMA as single-site Glauber dynamics.

Each slot one link ``i`` is drawn uniformly.  If switching it on keeps the
schedule feasible, it is set on with probability ``lambda_i / (1 + lambda_i)``
and off otherwise; if switching it on would be infeasible it is set off.  The
chain is reversible with stationary law ``p(x) ∝ prod_i lambda_i^{x_i}`` on
feasible schedules.

Randomness: ``numpy.random.Generator(Philox(seed))``, the counter-based
Philox-4x64-10 generator, consumed in blocks of ``RNG_BLOCK`` slots; every
block draws ``RNG_BLOCK`` link indices (``Generator.integers(0, N)``)
followed by ``RNG_BLOCK`` uniforms (``Generator.random``).  Slot ``t`` uses the ``t``-th index and uniform, so a
run is reproducible from the seed independently of how it is segmented.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import expit

from .bethe import FugacityVector
from .topology import build_interference_graph, enumerate_all_local_feasible

RNG_BLOCK = 1 << 16
MAX_HISTOGRAM_LINKS = 20


@njit(cache=True)
def _glauber_kernel(x, masks, p_on, choice, unif, nbr, nbr_len, rev_pos, own_pos,
                    tab_off, tables, total, window, slot, burn_in, hist, code):
    n = x.size
    for t in range(choice.size):
        i = choice[t]
        ok = True
        if x[i] == 0:
            if tables[tab_off[i] + (masks[i] | (1 << own_pos[i]))] == 0:
                ok = False
            else:
                for p in range(nbr_len[i]):
                    j = nbr[i, p]
                    if j != i and x[j] == 1:
                        if tables[tab_off[j] + (masks[j] | (1 << rev_pos[i, p]))] == 0:
                            ok = False
                            break
        new = 1 if (ok and unif[t] < p_on[i]) else 0
        if new != x[i]:
            x[i] = new
            for p in range(nbr_len[i]):
                j = nbr[i, p]
                masks[j] ^= 1 << rev_pos[i, p]
            code ^= 1 << i
        slot += 1
        for k in range(n):
            total[k] += x[k]
        if slot > burn_in:
            for k in range(n):
                window[k] += x[k]
            if hist.size > 0:
                hist[code] += 1
    return slot, code


class _RandomStream:
    def __init__(self, n_links, seed):
        self.n = n_links
        self.rng = np.random.Generator(np.random.Philox(seed))
        self._choice = np.empty(0, dtype=np.int64)
        self._unif = np.empty(0)
        self._pos = 0

    def take(self, k):
        parts_c, parts_u = [], []
        while k > 0:
            if self._pos == self._choice.size:
                self._choice = self.rng.integers(0, self.n, size=RNG_BLOCK, dtype=np.int64)
                self._unif = self.rng.random(RNG_BLOCK)
                self._pos = 0
            m = min(k, self._choice.size - self._pos)
            parts_c.append(self._choice[self._pos:self._pos + m])
            parts_u.append(self._unif[self._pos:self._pos + m])
            self._pos += m
            k -= m
        if len(parts_c) == 1:
            return parts_c[0], parts_u[0]
        return np.concatenate(parts_c), np.concatenate(parts_u)


class CsmaChain:
    """Simulator state: current schedule, slot counter and RNG stream.

    Also caches the flattened neighbourhood / local-feasibility tables the
    kernel needs.  Counters ``total_active`` (every slot) and
    ``window_active`` (slots after ``burn_in``) accumulate across calls.
    """

    def __init__(self, network, graph=None, feasible_sets=None, seed=0, burn_in=0,
                 state_histogram=False):
        graph = build_interference_graph(network) if graph is None else graph
        if feasible_sets is None:
            feasible_sets = enumerate_all_local_feasible(network, graph)
        n = network.n_links
        self.network = network
        self.graph = graph
        self.feasible_sets = feasible_sets
        self.n_links = n
        dmax = max(len(h) for h in graph.neighborhoods)
        self._nbr = np.full((n, dmax), -1, dtype=np.int64)
        self._rev = np.zeros((n, dmax), dtype=np.int64)
        self._nbr_len = np.array([len(h) for h in graph.neighborhoods], dtype=np.int64)
        self._own = np.array([graph.position(i, i) for i in range(n)], dtype=np.int64)
        for i, hood in enumerate(graph.neighborhoods):
            for p, j in enumerate(hood):
                self._nbr[i, p] = j
                self._rev[i, p] = graph.position(j, i)
        sizes = np.array([fs.table.size for fs in feasible_sets], dtype=np.int64)
        self._tab_off = np.concatenate([[0], np.cumsum(sizes)[:-1]]).astype(np.int64)
        self._tables = np.concatenate([fs.table for fs in feasible_sets]).astype(np.uint8)

        self.schedule = np.zeros(n, dtype=np.int64)
        self._masks = np.zeros(n, dtype=np.int64)
        self._code = 0
        self.slot = 0
        self.burn_in = int(burn_in)
        self.total_active = np.zeros(n, dtype=np.int64)
        self.window_active = np.zeros(n, dtype=np.int64)
        if state_histogram:
            if n > MAX_HISTOGRAM_LINKS:
                raise ValueError(f"state histogram limited to {MAX_HISTOGRAM_LINKS} links")
            self.state_counts = np.zeros(1 << n, dtype=np.int64)
        else:
            self.state_counts = np.zeros(0, dtype=np.int64)
        self._stream = _RandomStream(n, seed)

    def run(self, fugacities, slots):
        """Advance ``slots`` steps under fixed fugacities."""
        log_lam = np.asarray(
            fugacities.log_lambdas if isinstance(fugacities, FugacityVector) else fugacities,
            dtype=float,
        )
        p_on = expit(log_lam)
        done = 0
        while done < slots:
            k = min(RNG_BLOCK, slots - done)
            choice, unif = self._stream.take(k)
            self.slot, self._code = _glauber_kernel(
                self.schedule, self._masks, p_on, choice, unif, self._nbr, self._nbr_len,
                self._rev, self._own, self._tab_off, self._tables, self.total_active,
                self.window_active, self.slot, self.burn_in, self.state_counts, self._code,
            )
            done += k
        return self

    @property
    def measured_slots(self):
        return max(0, self.slot - self.burn_in)


def glauber_step(chain, fugacities):
    """One slot of the chain (mutates and returns ``chain``)."""
    return chain.run(fugacities, 1)


@dataclass
class ServiceRateStats:
    achieved: np.ndarray
    active_slots: np.ndarray
    burn_in: int
    measured: int
    target: np.ndarray | None = None
    trajectory_slots: np.ndarray | None = None
    trajectory_active: np.ndarray | None = None  # cumulative from slot 1
    state_counts: np.ndarray | None = None

    def running_errors(self, target=None):
        """Bethe error of the cumulative time-averaged rates at each recorded slot."""
        target = self.target if target is None else np.asarray(target, dtype=float)
        rates = self.trajectory_active / self.trajectory_slots[:, None]
        return np.mean(np.abs(rates - target[None, :]), axis=1)

    def to_csv(self, target=None):
        target = self.target if target is None else np.asarray(target, dtype=float)
        out = io.StringIO()
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["link_id", "target", "achieved", "active_slots", "window"])
        for k, (a, c) in enumerate(zip(self.achieved, self.active_slots)):
            t = "" if target is None else repr(float(target[k]))
            w.writerow([k, t, repr(float(a)), int(c), self.measured])
        return out.getvalue()


def simulate(network, fugacities, slots, burn_in=None, seed=0, graph=None,
             feasible_sets=None, target=None, record_every=0, state_histogram=False):
    """Run the chain from the all-off schedule and measure time-averaged rates.

    ``burn_in`` defaults to 10% of ``slots``.  With ``record_every = K`` the
    cumulative activity counts are snapshotted every K slots (and at the end).
    """
    if burn_in is None:
        burn_in = slots // 10
    if slots <= burn_in:
        raise ValueError("slots must exceed burn_in")
    chain = CsmaChain(network, graph, feasible_sets, seed, burn_in, state_histogram)
    traj_t, traj_a = None, None
    if record_every:
        traj_t, traj_a = [], []
        while chain.slot < slots:
            chain.run(fugacities, min(record_every, slots - chain.slot))
            traj_t.append(chain.slot)
            traj_a.append(chain.total_active.copy())
        traj_t, traj_a = np.array(traj_t), np.array(traj_a)
    else:
        chain.run(fugacities, slots)
    measured = chain.measured_slots
    return ServiceRateStats(
        achieved=chain.window_active / measured,
        active_slots=chain.window_active.copy(),
        burn_in=int(burn_in),
        measured=int(measured),
        target=None if target is None else np.asarray(target, dtype=float),
        trajectory_slots=traj_t,
        trajectory_active=traj_a,
        state_counts=chain.state_counts.copy() if state_histogram else None,
    )


def bethe_error(target, achieved):
    """Mean absolute deviation between target and achieved service rates."""
    target = np.asarray(target, dtype=float)
    achieved = np.asarray(achieved, dtype=float)
    if target.shape != achieved.shape:
        raise ValueError(f"length mismatch: {target.shape} vs {achieved.shape}")
    return float(np.mean(np.abs(target - achieved)))
