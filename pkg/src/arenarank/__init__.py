"""Pairwise-comparison ratings for model arenas.

Bradley-Terry maximum likelihood and Elo ratings, Fisher-information tools for
choosing which pairs to compare, proximity sampling and placement matches for
scheduling, a two-dimensional disc model for cyclic preferences, and a
simulator to evaluate all of it.
"""
from .analysis import (
    BootstrapReport,
    BootstrapRun,
    RankMetrics,
    bootstrap_arrays,
    bootstrap_variance,
    compare_bootstrap,
    rank_metrics,
    rank_metrics_arrays,
)
from .core import (
    DEFAULT_ANCHOR,
    ELO_ALPHA,
    BattleRecord,
    ComparisonMatrices,
    ModelRef,
    RatingVector,
    Source,
    build_matrices,
    payoff,
)
from .disc import DiscScores, fit_disc, transitivity_report
from .estimators import BradleyTerryRanker, DiscRanker, EloRanker
from .exceptions import (
    ArenaError,
    CorruptSnapshot,
    DisconnectedGraph,
    InputError,
    NoFiniteMaximizer,
    NumericalError,
)
from .information import (
    delta_phi_report,
    fisher_matrix,
    ideal_allocation,
    optimal_threshold,
    phi,
    trace_inv_fim,
)
from .io import StateSnapshot, ingest, load_state, save_state
from .rating import EloConfig, SolverConfig, elo_ratings, elo_update, fit_bt_mle, win_prob
from .scheduler import (
    PlacementConfig,
    PlacementState,
    ProximityConfig,
    ProximitySampler,
    next_placement_opponent,
    placement_step,
    proximity_sample,
    run_placement,
)

__version__ = "0.1.0"
