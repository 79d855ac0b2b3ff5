"""Two-strategy imitation dynamics on graphs under a prisoner's-dilemma payoff scheme.

Players hold a cooperate probability; at each step every player drifts toward
the strategies of strictly better-paid neighbors, weighted by payoff
advantage. The package covers graph ingestion and generation, the payoff and
imitation-weight kernel, discrete and continuous time evolution, equilibrium
classification with Jacobian/Gershgorin stability structure, and fitting a
payoff matrix to binned early/late behavioral scores.
"""

__version__ = "0.1.0"

from .dynamics import RunConfig, Trajectory, complete_graph_step, drift, integrate, step
from .equilibrium import (
    EquilibriumClass,
    EquilibriumKind,
    ImitationGraph,
    StabilityReport,
    classify,
    imitation_graph,
    jacobian_type1,
    perturb_and_run,
    perturbation_study,
)
from .fitting import (
    BinReport,
    FitResult,
    FitSettings,
    ScorePanel,
    assign_bin,
    assign_bins,
    confusion_counts,
    fit_payoff,
    generate_synthetic_panel,
    objective,
    predict_late,
    row_normalize,
)
from .game import PayoffMatrix, StrategyState, kappa_matrix, kappa_row, pairwise_payoff, payoffs, validate_pd
from .graph import EdgeListParseError, Graph, complete_graph, load_edge_list, random_graph, write_edge_list

__all__ = [
    "__version__",
    "Graph",
    "EdgeListParseError",
    "load_edge_list",
    "write_edge_list",
    "complete_graph",
    "random_graph",
    "PayoffMatrix",
    "StrategyState",
    "validate_pd",
    "pairwise_payoff",
    "payoffs",
    "kappa_row",
    "kappa_matrix",
    "RunConfig",
    "Trajectory",
    "drift",
    "step",
    "complete_graph_step",
    "integrate",
    "EquilibriumKind",
    "EquilibriumClass",
    "ImitationGraph",
    "StabilityReport",
    "classify",
    "imitation_graph",
    "jacobian_type1",
    "perturb_and_run",
    "perturbation_study",
    "ScorePanel",
    "BinReport",
    "assign_bin",
    "assign_bins",
    "confusion_counts",
    "row_normalize",
    "predict_late",
    "objective",
    "FitSettings",
    "FitResult",
    "fit_payoff",
    "generate_synthetic_panel",
]
