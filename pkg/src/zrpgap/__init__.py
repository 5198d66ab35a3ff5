"""Spectral-gap toolkit for the constant-rate zero range process.

Exact gaps and relaxation times on enumerable configuration spaces, the
multicommodity-flow comparison between torus and complete-graph dynamics,
a ranked-particle coupling with coupling-time tail estimation, and the
tagged-pair chain with its exactly verified stationary weights and time
reversal.
"""

__version__ = "0.1.0"

from .configurations import (
    RankedState,
    configuration_count,
    enumerate_configurations,
    random_configuration,
    rank_configuration,
    transitions,
    unrank_configuration,
)
from .coupling import (
    CouplingRun,
    EventDraw,
    advance,
    default_horizon,
    estimate_relaxation,
    init_coupling,
    run_to_coalescence,
    sample_coupling_times,
    sample_marginal,
)
from .errors import CapacityError, SolverConvergenceError
from .flow import (
    ComparisonCertificate,
    EdgeLoadReport,
    InducedFlowCheck,
    comparison_certificate,
    edge_loads,
    induced_flow_check,
)
from .graphs import Complete, GraphSpec, Torus, graph_from_json, shortest_path_data
from .reversal import (
    DriftParams,
    TaggedPairChain,
    balance_residuals,
    build_tagged_pair_chain,
    drift_check,
    occupation_time_inequality,
    reverse_chain,
    reversed_attempt_rates,
    sample_hitting_times,
    simulate_reversed_hitting,
    survival_agreement,
)
from .spectral import (
    Generator,
    SpectralReport,
    TVCurve,
    TestFunction,
    build_generator,
    exact_gap,
    fit_decay_rate,
    rayleigh_quotient,
    transient_distribution,
    tv_curve,
    wilson_bound,
    wilson_test_function,
)
from .stats import (
    MCEstimate,
    OccupancyTrace,
    TailFit,
    empty_probability_exact,
    estimate_window_constant,
    fit_exponential_tail,
    occupancy_stats,
    poisson_concentration,
    rw_no_return_probability,
    skellam_tail,
    skellam_table,
)
