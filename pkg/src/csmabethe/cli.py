"""Command-line entry point: ``csmabethe <subcommand> ...``.

``generate``, ``fugacities`` and ``simulate`` work on single files; ``sgd``,
``umax``, ``sweep`` and ``audit`` run experiments from an optional INI config
with flag overrides and need ``--seed`` and ``--out``.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import csma, harness, topology
from .bethe import FugacityVector, bethe_fugacities, local_fugacities_to_csv
from .errors import CsmaBetheError


def _topology_flags(p):
    g = p.add_argument_group("topology")
    g.add_argument("--config", help="INI experiment config; flags override it")
    g.add_argument("--topology", choices=harness.TOPOLOGIES)
    g.add_argument("--network", dest="network_file", help="network file (implies --topology file)")
    g.add_argument("--n-links", type=int)
    g.add_argument("--rows", type=int)
    g.add_argument("--cols", type=int)
    g.add_argument("--plane-side", type=float)
    g.add_argument("--link-length", type=float)
    g.add_argument("--path-loss-exponent", type=float)
    g.add_argument("--close-in-radius", type=float)
    g.add_argument("--sinr-threshold-db", type=float)
    g.add_argument("--noise-power", type=float)
    g.add_argument("--topology-seed", type=int)


def _rate_flags(p):
    p.add_argument("--rate", dest="rates", type=float, action="append",
                   help="uniform target rate (repeatable)")
    p.add_argument("--rate-start", type=float)
    p.add_argument("--rate-stop", type=float)
    p.add_argument("--rate-step", type=float)


def _experiment_flags(p, experiment):
    _topology_flags(p)
    _rate_flags(p)
    p.add_argument("--seed", dest="seeds", type=int, action="append", required=True,
                   help="simulation seed (repeatable)")
    p.add_argument("--out", required=True)
    p.add_argument("--slots", type=int)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--record-every", type=int)
    if experiment:
        p.set_defaults(experiment=experiment)


def build_parser():
    parser = argparse.ArgumentParser(prog="csmabethe")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a network file")
    p.add_argument("--kind", choices=("random_sinr", "random_conflict", "grid", "complete",
                                      "path"), default="random_sinr")
    p.add_argument("--n-links", type=int, default=15)
    p.add_argument("--rows", type=int, default=4)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--plane-side", type=float, default=8.0)
    p.add_argument("--link-length", type=float, default=0.5)
    p.add_argument("--path-loss-exponent", type=float, default=3.0)
    p.add_argument("--close-in-radius", type=float, default=2.4)
    p.add_argument("--sinr-threshold-db", type=float, default=15.0)
    p.add_argument("--noise-power", type=float, default=0.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("fugacities", help="compute a fugacity vector for uniform target rates")
    _topology_flags(p)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--method", choices=("bethe_sinr", "bethe_vertex", "bethe_edge",
                                        "exact_oracle"), default="bethe_sinr")
    p.add_argument("--out", required=True)
    p.add_argument("--local-out", help="also write local fugacities (bethe_sinr only)")

    p = sub.add_parser("simulate", help="run the CSMA chain under given fugacities")
    _topology_flags(p)
    p.add_argument("--fugacities", required=True, help="fugacity CSV")
    p.add_argument("--slots", type=int, default=1_000_000)
    p.add_argument("--burn-in", type=int)
    p.add_argument("--rate", type=float, help="uniform target, for the target column")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sgd", help="running error of SGD adaptation (and static baselines)")
    _experiment_flags(p, "sgd_compare")
    p.add_argument("--methods", default="sgd1,sgd2")
    p.add_argument("--sgd-init", choices=("zero", "near_zero"))

    p = sub.add_parser("umax", help="local utility maximisation with log utilities")
    _experiment_flags(p, "umax_convergence")
    p.add_argument("--theta", type=float)
    p.add_argument("--step-rule", choices=harness.STEP_RULES)
    p.add_argument("--step-scale", type=float,
                   help="harmonic: alpha(t) = scale / t; constant: alpha(t) = scale")
    p.add_argument("--max-iters", type=int)
    p.add_argument("--stop-norm", type=float)

    p = sub.add_parser("sweep", help="error-vs-load or error-vs-time sweep")
    _experiment_flags(p, None)
    p.add_argument("--experiment", choices=("error_vs_load", "error_vs_time"))
    p.add_argument("--methods")
    p.add_argument("--sgd-init", choices=("zero", "near_zero"))

    p = sub.add_parser("audit", help="stationarity residuals of Bethe fugacities")
    _experiment_flags(p, "stationarity_audit")
    p.add_argument("--methods")
    return parser


_CONFIG_KEYS = tuple(harness.ExperimentConfig.__dataclass_fields__)


def config_from_args(args):
    overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if k in vars(args)}
    if isinstance(overrides.get("methods"), str):
        overrides["methods"] = tuple(m.strip() for m in overrides["methods"].split(",") if m)
    for key in ("rates", "seeds"):
        if overrides.get(key) is not None:
            overrides[key] = tuple(overrides[key])
    if overrides.get("network_file") and overrides.get("topology") is None:
        overrides["topology"] = "file"
    overrides["output"] = getattr(args, "out", None)
    if getattr(args, "config", None):
        return harness.ExperimentConfig.load(args.config, **overrides)
    return harness.ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _cmd_generate(args):
    radio = topology.RadioParams.from_db(
        args.sinr_threshold_db, path_loss_exponent=args.path_loss_exponent,
        close_in_radius=args.close_in_radius, noise_power=args.noise_power)
    if args.kind == "random_sinr":
        net = topology.generate_random_network(args.n_links, args.plane_side, args.link_length,
                                               radio, args.seed)
    elif args.kind == "random_conflict":
        net = harness.random_conflict_network(args.n_links, args.plane_side, args.link_length,
                                              radio, args.seed)
    elif args.kind == "grid":
        net = topology.build_conflict_graph_network(topology.grid_adjacency(args.rows, args.cols))
    elif args.kind == "complete":
        net = topology.build_conflict_graph_network(topology.complete_adjacency(args.n_links))
    else:
        net = topology.build_conflict_graph_network(topology.path_adjacency(args.n_links))
    topology.save_network(net, args.out)


def _instance(args):
    return harness.Instance.from_network(harness.build_network(config_from_args(args)))


def _cmd_fugacities(args):
    inst = _instance(args)
    s = np.full(inst.network.n_links, args.rate)
    if args.method == "bethe_sinr" and args.local_out:
        fug, local = bethe_fugacities(inst.network, s, inst.graph, inst.feasible_sets,
                                      return_local=True)
        Path(args.local_out).write_text(local_fugacities_to_csv(local))
    else:
        fug = harness.static_fugacities(args.method, inst, s)
    Path(args.out).write_text(fug.to_csv())


def _cmd_simulate(args):
    inst = _instance(args)
    fug = FugacityVector.from_csv(Path(args.fugacities).read_text())
    if fug.log_lambdas.size != inst.network.n_links:
        raise ValueError("fugacity vector length does not match the network")
    target = None if args.rate is None else np.full(inst.network.n_links, args.rate)
    stats = csma.simulate(inst.network, fug, args.slots, args.burn_in, args.seed, inst.graph,
                          inst.feasible_sets, target=target)
    Path(args.out).write_text(stats.to_csv())


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            _cmd_generate(args)
        elif args.command == "fugacities":
            _cmd_fugacities(args)
        elif args.command == "simulate":
            _cmd_simulate(args)
        else:
            harness.run_experiment(config_from_args(args))
    except (CsmaBetheError, ValueError, OSError, KeyError) as exc:
        print(f"csmabethe: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
