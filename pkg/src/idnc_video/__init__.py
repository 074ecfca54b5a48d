"""Deadline-aware IDNC and RLNC broadcast scheduling for layered video."""

from .completion import CompletionBound, nb_pmf, post_selection_bound, prob_complete_within, upper_bound_all
from .errors import ArgumentError, ConfigError, ContractViolation, OracleUnavailable, SessionComplete
from .graph import Clique, IdncGraph, Vertex, adjacent_subgraph, build_graph, decode_attempt, enumerate_maximal_cliques
from .rlnc import (
    all_receivers_prob,
    decodable_layers,
    enumerate_policies,
    per_receiver_decode_prob,
    select_policy,
)
from .schedulers import (
    EwIdnc,
    MaxClique,
    NowIdnc,
    SchedulerDecision,
    ew_idnc_step,
    max_clique_baseline_step,
    now_idnc_step,
    select_clique_exact,
    select_clique_heuristic,
)
from .sim import EwRlnc, MonteCarloReport, RunMetrics, SimConfig, monte_carlo, run_episode, sweep, theta_from_bitrate
from .video import (
    Classification,
    LayeredGop,
    ReceiverClass,
    SessionClock,
    apply_feedback,
    classify_receivers,
    decoded_layers,
    has_set,
    largest_feasible_window,
    new_sfm,
    smallest_feasible_window,
    wants_counts,
    wants_set,
)

__version__ = "0.1.0"
