"""LOG-DS: direct search with a mixed penalty / log-barrier merit function."""
from .bank import builtin_suite, get_builtin, load_problem
from .merit import (ConstraintPartition, EvaluationRecord, MeritParams, Problem,
                    merit_eval, multiplier_estimates, partition_constraints)
from .profiles import data_profile, performance_profile, violation
from .solver import RunResult, SolverConfig, run

__all__ = [
    "ConstraintPartition", "EvaluationRecord", "MeritParams", "Problem", "RunResult",
    "SolverConfig", "builtin_suite", "data_profile", "get_builtin", "load_problem",
    "merit_eval", "multiplier_estimates", "partition_constraints", "performance_profile",
    "run", "violation",
]
