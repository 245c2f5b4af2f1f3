"""Batch-vectorized online POMDP planning.

The solver keeps the whole belief tree in columnar tables and runs both
phases of planning as batched array operations: a softmax-guided forward
search that advances tens of thousands of episodes per level through one
generative-model call, and a log-sum-exp preference backup that updates
every expanded belief of a depth level at once.
"""

from .backup import LevelValues, action_q_values, aggregate_leaves, backup, log_sum_exp_rows
from .belief import ParticleBelief, SirUpdate, sir_update, systematic_resample
from .core import ProblemModel, ProblemSpec, StateBatch, StepResult
from .rng import BoundRng, RowRng
from .search import LeafResult, SearchBatch, sample_actions, search, softmax_rows
from .solver import PlanOutcome, RunRecord, SolverConfig, plan, run_episode
from .tree import BeliefTree, init_tree, match_or_append_pairs

__version__ = "0.1.0"

__all__ = [
    "BeliefTree",
    "BoundRng",
    "LeafResult",
    "LevelValues",
    "ParticleBelief",
    "PlanOutcome",
    "ProblemModel",
    "ProblemSpec",
    "RowRng",
    "RunRecord",
    "SearchBatch",
    "SirUpdate",
    "SolverConfig",
    "StateBatch",
    "StepResult",
    "action_q_values",
    "aggregate_leaves",
    "backup",
    "init_tree",
    "log_sum_exp_rows",
    "match_or_append_pairs",
    "plan",
    "run_episode",
    "sample_actions",
    "search",
    "sir_update",
    "softmax_rows",
    "systematic_resample",
]
