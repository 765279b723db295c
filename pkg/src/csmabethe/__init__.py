"""Bethe-approximated fugacities for CSMA wireless scheduling.

Computes per-link CSMA fugacities that approximately realise target service
rates under SINR or conflict-graph interference, simulates the CSMA Markov
chain to measure achieved rates, and runs SGD and local utility-maximisation
adaptation schemes.  Small networks can be checked against exact enumeration.
"""
from .adaptive import (
    SGD1,
    SGD2,
    constant_step,
    harmonic_step,
    scaled_harmonic_step,
    sgd_run,
    umax_run,
    umax_step,
)
from .bethe import (
    FugacityVector,
    bethe_fugacities,
    bethe_free_energy,
    check_stationarity,
    combine_global_fugacity,
    conflict_fugacities,
    conflict_global_fugacity_edge,
    conflict_global_fugacity_vertex,
    conflict_local_fugacities,
    solve_local_gibbsian,
)
from .csma import CsmaChain, bethe_error, glauber_step, simulate
from .errors import (
    CsmaBetheError,
    DegenerateRate,
    EnumerationTooLarge,
    InconsistentMarginals,
    InfeasibleLocalRates,
    RatePairOverload,
    TargetOutsideCapacity,
)
from .harness import ExperimentConfig, run_experiment
from .maxent import SolverSettings
from .oracle import (
    capacity_membership,
    enumerate_feasible_schedules,
    exact_fugacities,
    exact_log_partition,
    exact_marginals,
    utility_optimum_bruteforce,
)
from .topology import (
    CONFLICT_GRAPH,
    SINR_SPATIAL,
    Network,
    RadioParams,
    build_conflict_graph_network,
    build_interference_graph,
    compute_sinr,
    enumerate_local_feasible,
    generate_random_network,
    load_network,
    save_network,
)
from .utility import linear_utility, log_utility, weighted_log_utility

__version__ = "0.1.0"
