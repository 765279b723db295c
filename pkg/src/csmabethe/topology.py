"""Networks, SINR, interference graphs and local feasible schedule sets.

Two kinds of network are supported:

* ``sinr_spatial``: links with transmitter/receiver positions and radio
  parameters; a link is active-feasible iff its SINR meets the threshold.
* ``conflict_graph``: an explicit symmetric conflict relation; a schedule is
  feasible iff the active links form an independent set.

Local schedules ``x^(i)`` over a neighbourhood ``N_i`` are encoded as integer
bitmasks.  Bit ``p`` holds the activity of ``N_i[p]``, where ``N_i`` is sorted
ascending by link index (the owner ``i`` sits at its sorted position).
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import CsmaBetheError, EnumerationTooLarge

SINR_SPATIAL = "sinr_spatial"
CONFLICT_GRAPH = "conflict_graph"

DEFAULT_ENUMERATION_CAP = 22


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class RadioParams:
    path_loss_exponent: float = 3.0
    close_in_radius: float = 2.4
    sinr_threshold: float = db_to_linear(15.0)
    noise_power: float = 0.0

    def __post_init__(self):
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be positive")
        if self.close_in_radius <= 0:
            raise ValueError("close_in_radius must be positive")
        if self.sinr_threshold <= 0:
            raise ValueError("sinr_threshold must be positive")
        if self.noise_power < 0:
            raise ValueError("noise_power must be non-negative")

    @classmethod
    def from_db(cls, threshold_db=15.0, **kwargs):
        return cls(sinr_threshold=db_to_linear(threshold_db), **kwargs)


@dataclass(frozen=True)
class Link:
    id: int
    tx: tuple | None = None
    rx: tuple | None = None
    power: float = 1.0

    def __post_init__(self):
        if self.power <= 0:
            raise ValueError(f"link {self.id}: power must be positive")


@dataclass(frozen=True, eq=False)
class Network:
    """Immutable network description.

    ``adjacency`` is an ``(N, N)`` boolean array for conflict-graph networks
    and ``None`` otherwise; ``radio`` is the converse.
    """

    kind: str
    links: tuple
    radio: RadioParams | None = None
    adjacency: np.ndarray | None = None

    def __post_init__(self):
        for k, link in enumerate(self.links):
            if link.id != k:
                raise ValueError("link ids must be 0..N-1 in order")
        if self.kind == SINR_SPATIAL:
            if self.radio is None or self.adjacency is not None:
                raise ValueError("sinr_spatial network needs radio params and no adjacency")
            tx = self.tx_positions
            rx = self.rx_positions
            if np.any(np.all(tx == rx, axis=1)):
                raise ValueError("transmitter and receiver of a link coincide")
            if len({tuple(p) for p in tx}) != len(tx):
                raise ValueError("transmitter positions must be distinct")
        elif self.kind == CONFLICT_GRAPH:
            adj = self.adjacency
            if adj is None or self.radio is not None:
                raise ValueError("conflict_graph network needs adjacency and no radio params")
            if adj.shape != (self.n_links, self.n_links):
                raise ValueError("adjacency shape does not match link count")
            _check_adjacency(adj)
            adj.setflags(write=False)
        else:
            raise ValueError(f"unknown network kind {self.kind!r}")

    @property
    def n_links(self) -> int:
        return len(self.links)

    @property
    def tx_positions(self) -> np.ndarray:
        return np.array([l.tx for l in self.links], dtype=float).reshape(-1, 2)

    @property
    def rx_positions(self) -> np.ndarray:
        return np.array([l.rx for l in self.links], dtype=float).reshape(-1, 2)

    @property
    def powers(self) -> np.ndarray:
        return np.array([l.power for l in self.links], dtype=float)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        if (self.kind, self.links, self.radio) != (other.kind, other.links, other.radio):
            return False
        if self.adjacency is None or other.adjacency is None:
            return self.adjacency is other.adjacency
        return bool(np.array_equal(self.adjacency, other.adjacency))

    __hash__ = None


def _check_adjacency(adj):
    if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
        raise ValueError("adjacency must be a square matrix")
    if not np.array_equal(adj, adj.T):
        raise ValueError("adjacency must be symmetric")
    if np.any(np.diag(adj)):
        raise ValueError("adjacency must be irreflexive")


def generate_random_network(n_links, plane_side=8.0, link_length=0.5, radio=None, seed=0):
    """Spatial random network: uniform transmitters, receivers at fixed distance.

    Transmitters are i.i.d. uniform on ``[0, plane_side]^2``; each receiver
    sits ``link_length`` away in a uniformly random direction.  Draws come
    from ``numpy.random.default_rng(seed)`` (PCG64), transmitters first.
    """
    if n_links < 1:
        raise ValueError("n_links must be at least 1")
    if plane_side <= 0 or link_length <= 0:
        raise ValueError("plane_side and link_length must be positive")
    radio = RadioParams() if radio is None else radio
    rng = np.random.default_rng(seed)
    tx = rng.uniform(0.0, plane_side, size=(n_links, 2))
    angle = rng.uniform(0.0, 2.0 * math.pi, size=n_links)
    rx = tx + link_length * np.column_stack([np.cos(angle), np.sin(angle)])
    links = tuple(
        Link(k, tuple(float(v) for v in tx[k]), tuple(float(v) for v in rx[k]), 1.0)
        for k in range(n_links)
    )
    return Network(SINR_SPATIAL, links, radio=radio)


def build_conflict_graph_network(adjacency):
    adj = np.array(adjacency, dtype=bool)
    if adj.ndim != 2:
        raise ValueError("adjacency must be a square matrix")
    _check_adjacency(adj)
    links = tuple(Link(k) for k in range(adj.shape[0]))
    return Network(CONFLICT_GRAPH, links, adjacency=adj)


def adjacency_from_edges(n, edges: Iterable[Sequence[int]]):
    adj = np.zeros((n, n), dtype=bool)
    for i, j in edges:
        if i == j:
            raise ValueError("self-loop in edge list")
        adj[i, j] = adj[j, i] = True
    return adj


def grid_adjacency(rows, cols):
    """4-neighbour lattice; link ``r * cols + c`` sits at row r, column c."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            k = r * cols + c
            if c + 1 < cols:
                edges.append((k, k + 1))
            if r + 1 < rows:
                edges.append((k, k + cols))
    return adjacency_from_edges(rows * cols, edges)


def complete_adjacency(n):
    return ~np.eye(n, dtype=bool)


def path_adjacency(n):
    return adjacency_from_edges(n, [(k, k + 1) for k in range(n - 1)])


def cycle_adjacency(n):
    return adjacency_from_edges(n, [(k, (k + 1) % n) for k in range(n)])


def star_adjacency(n):
    """Star with hub 0 and ``n - 1`` leaves."""
    return adjacency_from_edges(n, [(0, k) for k in range(1, n)])


# ---------------------------------------------------------------------------
# SINR


def compute_sinr(network, receiver, active, graph=None):
    """SINR at ``receiver`` when the links in ``active`` transmit.

    Only interferers inside the receiver's neighbourhood count; links outside
    the close-in radius are ignored by construction.  Returns ``inf`` when
    there is neither noise nor interference.
    """
    if network.kind != SINR_SPATIAL:
        raise ValueError("compute_sinr needs an sinr_spatial network")
    graph = build_interference_graph(network) if graph is None else graph
    hood = set(graph.neighborhoods[receiver])
    interferers = [k for k in set(active) if k != receiver and k in hood]
    gain = _gain_row(network, receiver)
    signal = gain[receiver]
    noise = network.radio.noise_power + float(sum(gain[k] for k in interferers))
    if noise == 0.0:
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        return float(signal / noise)


def _gain_row(network, j):
    """Received power at rx_j from every transmitter."""
    d = np.linalg.norm(network.tx_positions - network.rx_positions[j], axis=1)
    with np.errstate(divide="ignore"):
        return network.powers * d ** (-network.radio.path_loss_exponent)


# ---------------------------------------------------------------------------
# Interference graph


@dataclass(frozen=True)
class InterferenceGraph:
    neighborhoods: tuple  # tuple of sorted tuples, i in N_i

    @property
    def n_links(self):
        return len(self.neighborhoods)

    @property
    def degrees(self):
        return np.array([len(h) for h in self.neighborhoods], dtype=int)

    def position(self, i, k):
        """Bit position of link ``k`` inside ``N_i``."""
        return self.neighborhoods[i].index(k)

    def edges(self):
        return [(i, k) for i, h in enumerate(self.neighborhoods) for k in h if k > i]


def build_interference_graph(network):
    n = network.n_links
    if network.kind == CONFLICT_GRAPH:
        adj = network.adjacency
    else:
        tx = network.tx_positions
        rx = network.rx_positions
        # dist[i, j] = d(tx_j, rx_i)
        dist = np.linalg.norm(rx[:, None, :] - tx[None, :, :], axis=2)
        close = dist <= network.radio.close_in_radius
        adj = close | close.T
        np.fill_diagonal(adj, False)
    hoods = tuple(tuple(sorted({i, *np.flatnonzero(adj[i]).tolist()})) for i in range(n))
    return InterferenceGraph(hoods)


# ---------------------------------------------------------------------------
# Local feasible sets


@dataclass(frozen=True, eq=False)
class LocalFeasibleSet:
    """Locally feasible on/off patterns over ``N_i``.

    ``members`` holds the sorted bitmasks; ``table`` is a boolean lookup of
    length ``2 ** len(neighbors)`` (``table[mask]`` is membership).
    """

    owner: int
    neighbors: tuple
    members: np.ndarray
    table: np.ndarray

    @property
    def size(self):
        return int(self.members.size)

    @property
    def owner_bit(self):
        return self.neighbors.index(self.owner)

    def patterns(self, dtype=float):
        """``(|I_i|, |N_i|)`` 0/1 matrix, column p is neighbour ``neighbors[p]``."""
        d = len(self.neighbors)
        return ((self.members[:, None] >> np.arange(d)) & 1).astype(dtype)

    def __contains__(self, mask):
        return bool(self.table[int(mask)])


def _local_mask_bits(d):
    masks = np.arange(1 << d, dtype=np.int64)
    return masks, ((masks[:, None] >> np.arange(d)) & 1).astype(np.uint8)


def enumerate_local_feasible(network, graph, i, cap=DEFAULT_ENUMERATION_CAP):
    hood = graph.neighborhoods[i]
    d = len(hood)
    if d > cap:
        raise EnumerationTooLarge(
            f"local enumeration too large: link {i} has |N_i| = {d} > cap {cap}"
        )
    own = hood.index(i)
    masks, bits = _local_mask_bits(d)
    owner_on = bits[:, own].astype(bool)
    if network.kind == CONFLICT_GRAPH:
        others_on = bits.sum(axis=1) - bits[:, own]
        ok_on = others_on == 0
    else:
        gain = _gain_row(network, i)[list(hood)]
        signal = gain[own]
        interf_gain = gain.copy()
        interf_gain[own] = 0.0
        with np.errstate(invalid="ignore"):
            # 0 * inf (inactive coincident interferer) must not poison the sum
            contrib = np.where(bits.astype(bool), interf_gain[None, :], 0.0)
        noise = network.radio.noise_power + contrib.sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            sinr = np.where(noise == 0.0, np.inf, signal / noise)
        ok_on = sinr >= network.radio.sinr_threshold
        if not ok_on[1 << own]:
            raise CsmaBetheError(
                f"link {i} cannot meet the SINR threshold even without interference"
            )
    table = np.where(owner_on, ok_on, True)
    table.setflags(write=False)
    members = masks[table]
    members.setflags(write=False)
    return LocalFeasibleSet(i, hood, members, table)


def enumerate_all_local_feasible(network, graph=None, cap=DEFAULT_ENUMERATION_CAP):
    graph = build_interference_graph(network) if graph is None else graph
    return [enumerate_local_feasible(network, graph, i, cap) for i in range(network.n_links)]


def local_mask(graph, i, x):
    """Restriction of the global 0/1 schedule ``x`` to ``N_i`` as a bitmask."""
    m = 0
    for p, k in enumerate(graph.neighborhoods[i]):
        if x[k]:
            m |= 1 << p
    return m


def is_feasible(network, graph, x):
    """Global feasibility of schedule ``x`` evaluated from first principles.

    Conflict graphs: the active set is independent.  SINR networks: every
    active link meets the threshold against its active neighbours.
    """
    x = np.asarray(x, dtype=bool)
    if network.kind == CONFLICT_GRAPH:
        a = np.flatnonzero(x)
        return not bool(network.adjacency[np.ix_(a, a)].any())
    thr = network.radio.sinr_threshold
    active = np.flatnonzero(x).tolist()
    for j in active:
        if compute_sinr(network, j, active, graph) < thr:
            return False
    return True


def is_locally_feasible(feasible_sets, graph, x):
    """Feasibility via membership of each active link's local pattern in ``I_j``."""
    return all(
        local_mask(graph, j, x) in feasible_sets[j] for j in np.flatnonzero(np.asarray(x))
    )


# ---------------------------------------------------------------------------
# Text serialisation
#
#   # csmabethe-network v1
#   kind <sinr_spatial|conflict_graph>
#   n_links <N>
#   [path_loss_exponent <float>]      sinr_spatial only
#   [close_in_radius <float>]
#   [sinr_threshold <float>]          linear ratio
#   [noise_power <float>]
#   links                             sinr_spatial only, then N lines:
#   <id> <tx_x> <tx_y> <rx_x> <rx_y> <power>
#   edges <M>                         conflict_graph only, then M lines:
#   <i> <j>

_RADIO_KEYS = ("path_loss_exponent", "close_in_radius", "sinr_threshold", "noise_power")


def dumps_network(network):
    out = io.StringIO()
    out.write("# csmabethe-network v1\n")
    out.write(f"kind {network.kind}\n")
    out.write(f"n_links {network.n_links}\n")
    if network.kind == SINR_SPATIAL:
        for key in _RADIO_KEYS:
            out.write(f"{key} {getattr(network.radio, key)!r}\n")
        out.write("links\n")
        for l in network.links:
            out.write(f"{l.id} {l.tx[0]!r} {l.tx[1]!r} {l.rx[0]!r} {l.rx[1]!r} {l.power!r}\n")
    else:
        edges = [(i, j) for i, j in zip(*np.nonzero(np.triu(network.adjacency)))]
        out.write(f"edges {len(edges)}\n")
        for i, j in edges:
            out.write(f"{i} {j}\n")
    return out.getvalue()


def loads_network(text):
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    header = {}
    pos = 0
    while pos < len(lines) and lines[pos] != "links" and not lines[pos].startswith("edges"):
        key, value = lines[pos].split(None, 1)
        header[key] = value
        pos += 1
    kind = header["kind"]
    n = int(header["n_links"])
    if kind == SINR_SPATIAL:
        radio = RadioParams(**{k: float(header[k]) for k in _RADIO_KEYS})
        links = []
        for ln in lines[pos + 1: pos + 1 + n]:
            f = ln.split()
            links.append(Link(int(f[0]), (float(f[1]), float(f[2])),
                              (float(f[3]), float(f[4])), float(f[5])))
        return Network(SINR_SPATIAL, tuple(links), radio=radio)
    if kind == CONFLICT_GRAPH:
        m = int(lines[pos].split()[1])
        edges = [tuple(int(v) for v in ln.split()) for ln in lines[pos + 1: pos + 1 + m]]
        return build_conflict_graph_network(adjacency_from_edges(n, edges))
    raise ValueError(f"unknown network kind {kind!r}")


def save_network(network, path):
    Path(path).write_text(dumps_network(network))


def load_network(path):
    return loads_network(Path(path).read_text())
