"""Parallel rotor-router walks: simulation, lock-in analysis, fast queries."""

from .graph import (
    GraphFormatError,
    PortGraph,
    RotorState,
    from_edges,
    make_state,
    parse_graph,
    serialize_state,
)
from .engine import (
    BalancingSets,
    LoadTrace,
    WindowExceededError,
    arc_distance,
    b_floor,
    balancing_sets,
    cumulative,
    discrepancy,
    discrepancy_of,
    potential,
    potential_vector,
    run,
    step,
)
from .stability import (
    BudgetExhaustedError,
    StabilityReport,
    SubcycleDecomposition,
    detect_stable_hash,
    detect_stable_potential,
    extract_decomposition,
    period_bound,
    period_from_decomposition,
    stabilize,
    state_at,
    theorem8_budget,
)
from .single_token import (
    PhaseIndex,
    PredecessorSet,
    build_phase_index,
    position_at,
    visits_before,
)
from .multi_query import MultiIndex, build_multi_index, query_state, query_visits
from . import generators

__version__ = "0.1.0"

__all__ = [
    "BalancingSets",
    "BudgetExhaustedError",
    "GraphFormatError",
    "LoadTrace",
    "MultiIndex",
    "PhaseIndex",
    "PortGraph",
    "PredecessorSet",
    "RotorState",
    "StabilityReport",
    "SubcycleDecomposition",
    "WindowExceededError",
    "arc_distance",
    "b_floor",
    "balancing_sets",
    "build_multi_index",
    "build_phase_index",
    "cumulative",
    "detect_stable_hash",
    "detect_stable_potential",
    "discrepancy",
    "discrepancy_of",
    "extract_decomposition",
    "from_edges",
    "generators",
    "make_state",
    "parse_graph",
    "period_bound",
    "period_from_decomposition",
    "position_at",
    "potential",
    "potential_vector",
    "query_state",
    "query_visits",
    "run",
    "serialize_state",
    "stabilize",
    "state_at",
    "step",
    "theorem8_budget",
    "visits_before",
]
