"""Augmented Lagrangian solver for convex QPs with two priority levels of
equality constraints, including exact and weighted infeasibility shifts."""

from .alm import (
    TRACE_FIELDS,
    IterationRecord,
    IterationState,
    Mode,
    SolveReport,
    SolverConfig,
    Status,
    SubproblemUnboundedError,
    augmented_lagrangian_value,
    iterate,
    kkt_residual,
    project_box,
    solve,
    solve_subproblem,
    update_penalty,
)
from .control import (
    SigmaPair,
    SigmaSchedule,
    approximate_shift,
    approximate_shift_sequence,
    sigma_at,
)
from .netflow import GridSpec, build_instance, grid_incidence
from .oracle import OracleResult, hierarchical_shift, stage1_shift, stage2_shift
from .problem import (
    Finding,
    HierarchicalShift,
    ProblemData,
    ProblemFormatError,
    Severity,
    ShiftKind,
    ValidationReport,
    constraint_residuals,
    load_problem,
    objective_value,
    problem_document,
    save_problem,
    validate_problem,
)

__version__ = "0.1.0"

__all__ = [
    "TRACE_FIELDS",
    "Finding",
    "GridSpec",
    "HierarchicalShift",
    "IterationRecord",
    "IterationState",
    "Mode",
    "OracleResult",
    "ProblemData",
    "ProblemFormatError",
    "Severity",
    "ShiftKind",
    "SigmaPair",
    "SigmaSchedule",
    "SolveReport",
    "SolverConfig",
    "Status",
    "SubproblemUnboundedError",
    "ValidationReport",
    "approximate_shift",
    "approximate_shift_sequence",
    "augmented_lagrangian_value",
    "build_instance",
    "constraint_residuals",
    "grid_incidence",
    "hierarchical_shift",
    "iterate",
    "kkt_residual",
    "load_problem",
    "objective_value",
    "problem_document",
    "project_box",
    "save_problem",
    "sigma_at",
    "solve",
    "solve_subproblem",
    "stage1_shift",
    "stage2_shift",
    "update_penalty",
    "validate_problem",
]
