"""Experiment configuration, orchestration and CSV output.

Configs are flat INI files with a single ``[experiment]`` section; list
values are comma separated.  Every CSV starts with a ``# schema:`` comment
line and is written with ``repr`` floats in a fixed row order, so identical
configs give byte-identical files.
"""
from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import adaptive, bethe, csma, oracle, topology
from .errors import CsmaBetheError
from .utility import log_utility

EXPERIMENTS = ("error_vs_load", "error_vs_time", "umax_convergence", "sgd_compare",
               "stationarity_audit")
METHODS = ("bethe_vertex", "bethe_edge", "bethe_sinr", "sgd1", "sgd2", "exact_oracle")
TOPOLOGIES = ("random_sinr", "random_conflict", "grid", "complete", "path", "file")
STEP_RULES = ("harmonic", "constant")
SCHEMA_VERSION = 1


@dataclass
class ExperimentConfig:
    experiment: str = "error_vs_load"
    topology: str = "grid"
    n_links: int = 15
    rows: int = 4
    cols: int = 4
    plane_side: float = 8.0
    link_length: float = 0.5
    path_loss_exponent: float = 3.0
    close_in_radius: float = 2.4
    sinr_threshold_db: float = 15.0
    noise_power: float = 0.0
    topology_seed: int = 0
    network_file: str = ""
    rate_start: float = 0.02
    rate_stop: float = 0.20
    rate_step: float = 0.02
    rates: tuple = ()
    methods: tuple = ("bethe_vertex",)
    slots: int = 1_000_000
    burn_in: int = -1  # -1: 10% of slots
    seeds: tuple = (0,)
    record_every: int = 10_000
    sgd_init: str = "zero"
    theta: float = 1.0
    step_rule: str = "harmonic"  # umax step: harmonic -> step_scale / t, constant -> step_scale
    step_scale: float = 1.0
    max_iters: int = 200
    stop_norm: float = 1e-2
    output: str = ""

    def __post_init__(self):
        self.rates = tuple(float(r) for r in self.rates)
        self.methods = tuple(self.methods)
        self.seeds = tuple(int(s) for s in self.seeds)
        self.validate()

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValueError(f"methods must be a non-empty subset of {METHODS}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        for r in (*self.rates, self.rate_start, self.rate_stop):
            if not 0.0 < r < 1.0:
                raise ValueError("rates must lie in (0, 1)")
        if self.rate_step <= 0:
            raise ValueError("rate_step must be positive")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}")

    def target_rates(self):
        if self.rates:
            return list(self.rates)
        count = int(math.floor((self.rate_stop - self.rate_start) / self.rate_step + 1e-9)) + 1
        return [round(self.rate_start + k * self.rate_step, 12) for k in range(count)]

    @property
    def burn_in_slots(self):
        return self.slots // 10 if self.burn_in < 0 else self.burn_in

    def radio(self):
        return topology.RadioParams.from_db(
            self.sinr_threshold_db, path_loss_exponent=self.path_loss_exponent,
            close_in_radius=self.close_in_radius, noise_power=self.noise_power)

    # -- text round trip -------------------------------------------------

    def dumps(self):
        cp = configparser.ConfigParser()
        section = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                section[f.name] = ", ".join(repr(x) if isinstance(x, float) else str(x) for x in v)
            elif isinstance(v, float):
                section[f.name] = repr(v)
            else:
                section[f.name] = str(v)
        cp["experiment"] = section
        out = io.StringIO()
        cp.write(out)
        return out.getvalue()

    @classmethod
    def loads(cls, text, **overrides):
        cp = configparser.ConfigParser()
        cp.read_string(text)
        raw = dict(cp["experiment"]) if cp.has_section("experiment") else {}
        kwargs = {}
        defaults = cls.__dataclass_fields__
        for name, value in raw.items():
            if name not in defaults:
                raise ValueError(f"unknown config key {name!r}")
            kwargs[name] = _parse_field(name, value)
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    @classmethod
    def load(cls, path, **overrides):
        return cls.loads(Path(path).read_text(), **overrides)


_TUPLE_TYPES = {"rates": float, "methods": str, "seeds": int}


def _parse_field(name, value):
    if name in _TUPLE_TYPES:
        items = [v.strip() for v in value.split(",") if v.strip()]
        return tuple(_TUPLE_TYPES[name](v) for v in items)
    default = ExperimentConfig.__dataclass_fields__[name].default
    if isinstance(default, bool):
        return value.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    return value


# ---------------------------------------------------------------------------
# Building blocks


def build_network(cfg):
    if cfg.topology == "random_sinr":
        return topology.generate_random_network(cfg.n_links, cfg.plane_side, cfg.link_length,
                                                cfg.radio(), cfg.topology_seed)
    if cfg.topology == "random_conflict":
        return random_conflict_network(cfg.n_links, cfg.plane_side, cfg.link_length,
                                       cfg.radio(), cfg.topology_seed)
    if cfg.topology == "grid":
        return topology.build_conflict_graph_network(topology.grid_adjacency(cfg.rows, cfg.cols))
    if cfg.topology == "complete":
        return topology.build_conflict_graph_network(topology.complete_adjacency(cfg.n_links))
    if cfg.topology == "path":
        return topology.build_conflict_graph_network(topology.path_adjacency(cfg.n_links))
    return topology.load_network(cfg.network_file)


def random_conflict_network(n_links, plane_side=8.0, link_length=0.5, radio=None, seed=0):
    """Interference graph of a spatial random network, used as a conflict graph."""
    spatial = topology.generate_random_network(n_links, plane_side, link_length, radio, seed)
    graph = topology.build_interference_graph(spatial)
    adj = topology.adjacency_from_edges(n_links, graph.edges())
    return topology.build_conflict_graph_network(adj)


@dataclass
class Instance:
    network: topology.Network
    graph: topology.InterferenceGraph
    feasible_sets: list
    _schedules: object = field(default=None, repr=False)

    @classmethod
    def from_network(cls, network):
        graph = topology.build_interference_graph(network)
        return cls(network, graph, topology.enumerate_all_local_feasible(network, graph))

    @property
    def schedules(self):
        if self._schedules is None:
            self._schedules = oracle.enumerate_feasible_schedules(
                self.network, self.graph, self.feasible_sets)
        return self._schedules


def static_fugacities(method, inst, s):
    """Fugacities from a non-adaptive method; raises CsmaBetheError subclasses."""
    if method == "bethe_sinr":
        return bethe.bethe_fugacities(inst.network, s, inst.graph, inst.feasible_sets)
    if method in ("bethe_vertex", "bethe_edge"):
        if inst.network.kind != topology.CONFLICT_GRAPH:
            raise UnsupportedMethod(f"{method} needs a conflict-graph network")
        return bethe.conflict_fugacities(inst.graph, s, method.split("_")[1])
    if method == "exact_oracle":
        return oracle.exact_fugacities(s, inst.schedules)
    raise ValueError(f"{method} is not a static method")


class UnsupportedMethod(CsmaBetheError):
    status = "unsupported_method"


def _sgd_fugacities(method, inst, s, cfg, seed):
    res = adaptive.sgd_run(inst.network, s, adaptive.sgd_variant(method), cfg.slots, seed,
                           cfg.sgd_init, inst.graph, inst.feasible_sets)
    return res.final


def _fmt(v):
    if isinstance(v, float) or isinstance(v, np.floating):
        return repr(float(v))
    return str(v)


def write_csv(rows, columns, schema, path=None):
    out = io.StringIO()
    out.write(f"# schema: csmabethe.{schema} v{SCHEMA_VERSION}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row[c]) for c in columns])
    text = out.getvalue()
    if path:
        Path(path).write_text(text)
    return text


def read_csv(text):
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


# ---------------------------------------------------------------------------
# Experiments

ERROR_VS_LOAD_COLUMNS = ("rate", "method", "seed", "bethe_error", "status")
ERROR_VS_TIME_COLUMNS = ("slot", "method", "seed", "running_error")
AUDIT_COLUMNS = ("link", "method", "max_entropy_residual", "fugacity_residual", "passed")


def run_error_vs_load(cfg, instance=None):
    """Bethe error per (rate, method, seed); failures become status rows.

    SGD methods adapt for ``cfg.slots`` slots and their final fugacities are
    then evaluated exactly like the static ones.
    """
    inst = Instance.from_network(build_network(cfg)) if instance is None else instance
    n = inst.network.n_links
    rows = []
    for seed in cfg.seeds:
        for rate in cfg.target_rates():
            s = np.full(n, rate)
            for method in cfg.methods:
                row = {"rate": rate, "method": method, "seed": seed, "bethe_error": "",
                       "status": "ok"}
                try:
                    if method in ("sgd1", "sgd2"):
                        fug = _sgd_fugacities(method, inst, s, cfg, seed)
                    else:
                        fug = static_fugacities(method, inst, s)
                except CsmaBetheError as exc:
                    row["status"] = exc.status
                    rows.append(row)
                    continue
                stats = csma.simulate(inst.network, fug, cfg.slots, cfg.burn_in_slots, seed,
                                      inst.graph, inst.feasible_sets)
                row["bethe_error"] = csma.bethe_error(s, stats.achieved)
                rows.append(row)
    return rows


def run_error_vs_time(cfg, instance=None):
    """Running error of the cumulative time-averaged rates, sampled every K slots.

    Static methods keep their fugacities fixed for the whole run; SGD
    methods adapt them online from the same all-off start.
    """
    inst = Instance.from_network(build_network(cfg)) if instance is None else instance
    n = inst.network.n_links
    rate = cfg.target_rates()[0]
    s = np.full(n, rate)
    k = cfg.record_every or cfg.slots
    rows = []
    for seed in cfg.seeds:
        for method in cfg.methods:
            if method in ("sgd1", "sgd2"):
                res = adaptive.sgd_run(inst.network, s, adaptive.sgd_variant(method), cfg.slots,
                                       seed, cfg.sgd_init, inst.graph, inst.feasible_sets,
                                       record_every=k)
                series = zip(res.slots, res.running_error)
            else:
                try:
                    fug = static_fugacities(method, inst, s)
                except CsmaBetheError:
                    continue
                stats = csma.simulate(inst.network, fug, cfg.slots, 0, seed, inst.graph,
                                      inst.feasible_sets, target=s, record_every=k)
                series = zip(stats.trajectory_slots, stats.running_errors())
            for slot, err in series:
                rows.append({"slot": int(slot), "method": method, "seed": seed,
                             "running_error": float(err)})
    return rows


def run_umax(cfg, instance=None):
    """Algorithm rows ``(iteration, subgradient_norm, rate_i...)`` and final fugacities."""
    inst = Instance.from_network(build_network(cfg)) if instance is None else instance
    if cfg.step_rule == "constant":
        step = adaptive.constant_step(cfg.step_scale)
    else:
        step = adaptive.scaled_harmonic_step(cfg.step_scale)
    res = adaptive.umax_run(inst.network, log_utility(), cfg.theta, step=step,
                            max_iters=cfg.max_iters, stop_norm=cfg.stop_norm,
                            graph=inst.graph, feasible_sets=inst.feasible_sets)
    rows = []
    for t, norm, rates in zip(res.iterations, res.subgradient_norm, res.rates):
        row = {"iteration": int(t) + 1, "subgradient_norm": float(norm)}
        row.update({f"rate_{i}": float(r) for i, r in enumerate(rates)})
        rows.append(row)
    columns = ("iteration", "subgradient_norm", *[f"rate_{i}" for i in range(inst.network.n_links)])
    return rows, columns, res.fugacities


def run_stationarity_audit(cfg, instance=None):
    inst = Instance.from_network(build_network(cfg)) if instance is None else instance
    n = inst.network.n_links
    s = np.full(n, cfg.target_rates()[0])
    rows = []
    for method in cfg.methods:
        if method in ("sgd1", "sgd2"):
            continue
        try:
            fug = static_fugacities(method, inst, s)
            rep = bethe.check_stationarity(inst.network, s, fug, inst.graph, inst.feasible_sets)
        except CsmaBetheError:
            continue
        for i in range(n):
            rows.append({
                "link": i, "method": method,
                "max_entropy_residual": float(rep.max_entropy_residual[i]),
                "fugacity_residual": float(rep.fugacity_residual[i]),
                "passed": int(rep.max_entropy_residual[i] <= rep.tol
                              and rep.fugacity_residual[i] <= rep.tol),
            })
    return rows


def run_experiment(cfg, out=None):
    """Run ``cfg.experiment`` and write its CSV(s); returns the main CSV text."""
    out = out or cfg.output or None
    if cfg.experiment == "error_vs_load":
        return write_csv(run_error_vs_load(cfg), ERROR_VS_LOAD_COLUMNS, "error_vs_load", out)
    if cfg.experiment in ("error_vs_time", "sgd_compare"):
        return write_csv(run_error_vs_time(cfg), ERROR_VS_TIME_COLUMNS, cfg.experiment, out)
    if cfg.experiment == "stationarity_audit":
        return write_csv(run_stationarity_audit(cfg), AUDIT_COLUMNS, "stationarity_audit", out)
    rows, columns, fug = run_umax(cfg)
    text = write_csv(rows, columns, "umax_convergence", out)
    if out:
        p = Path(out)
        p.with_name(p.stem + "_fugacities.csv").write_text(fug.to_csv())
    return text
