"""Approximate (s, S) inventory policies with certified error bounds."""

__version__ = "0.1.0"

from .bounds import (
    Certificate,
    certify,
    coarse_slack_caps,
    evaluate_value,
    flat_slack_caps,
    value_slack_above,
    value_slack_below,
)
from .grid import Grid
from .oracle import (
    DiscretePmf,
    OracleError,
    exact_dp,
    fine_grid_reference,
    policy_cost_discrete,
    simulate_policy,
)
from .problem import (
    DemandModel,
    Gamma,
    InventoryProblem,
    PeriodParams,
    PiecewiseCdf,
    TruncatedNormal,
    Uniform,
    lipschitz_gamma,
    transformed_cost,
    validate,
)
from .solver import (
    Policy,
    SolverError,
    SolverResult,
    backward_sweep,
    compute_cutoffs,
    minimize_shifted_cost,
    solve_policy,
)

__all__ = [
    "Certificate",
    "DemandModel",
    "DiscretePmf",
    "Gamma",
    "Grid",
    "InventoryProblem",
    "OracleError",
    "PeriodParams",
    "PiecewiseCdf",
    "Policy",
    "SolverError",
    "SolverResult",
    "TruncatedNormal",
    "Uniform",
    "backward_sweep",
    "certify",
    "coarse_slack_caps",
    "compute_cutoffs",
    "evaluate_value",
    "exact_dp",
    "fine_grid_reference",
    "flat_slack_caps",
    "lipschitz_gamma",
    "minimize_shifted_cost",
    "policy_cost_discrete",
    "simulate_policy",
    "solve_policy",
    "transformed_cost",
    "validate",
    "value_slack_above",
    "value_slack_below",
]
