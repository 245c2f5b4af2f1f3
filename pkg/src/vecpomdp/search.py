"""Vectorized forward search.

One call descends a whole batch of episodes from their current beliefs to
the target depth.  At each level the softmax policies of the distinct
beliefs in the batch are built once, every episode samples a single action
from its belief's policy, the generative model advances all episodes in one
batched step, and the tree is extended with two deduplicating appends.
Episodes that hit a terminal state keep stepping through the absorbing
self-loop so every kernel stays full width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ProblemModel, StateBatch
from .rng import BoundRng, RowRng
from .tree import BeliefTree

_SITE_ACTION = 0
_SITE_MODEL = 1


@dataclass
class SearchBatch:
    """The per-level frontier: belief index and state per episode."""

    belief_indices: np.ndarray
    states: StateBatch
    depth: int = 0

    def __post_init__(self):
        self.belief_indices = np.asarray(self.belief_indices, dtype=np.int64)
        if len(self.belief_indices) != len(self.states):
            raise ValueError("belief_indices and states must have equal length")


@dataclass
class LeafResult:
    leaf_belief_indices: np.ndarray
    heuristic_values: np.ndarray


def softmax_rows(pref_rows: np.ndarray, eta: float) -> np.ndarray:
    """Row-wise softmax of eta * prefs with max-subtraction stabilization."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    pref_rows = np.asarray(pref_rows, dtype=np.float64)
    z = eta * pref_rows
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sample_actions(
    policies: np.ndarray, rng: BoundRng, groups: np.ndarray | None = None
) -> np.ndarray:
    """Per-row categorical draws via inverse CDF.

    ``policies`` holds one probability row per policy; ``groups`` maps each
    bound rng row to its policy row (identity when omitted).  Each draw uses
    the row's own counter substream, so the action sampled for a logical row
    does not depend on batch width.
    """
    policies = np.asarray(policies, dtype=np.float64)
    u = rng.uniform()
    if groups is None:
        if len(policies) != len(u):
            raise ValueError("one policy row per bound rng row required")
        groups = np.arange(len(u), dtype=np.int64)
    else:
        groups = np.asarray(groups, dtype=np.int64)
    n_actions = policies.shape[1]
    cum = np.cumsum(policies, axis=1)
    if len(policies) == 1:
        # degenerate grouping: search directly in the single CDF row
        idx = np.searchsorted(cum[0], u, side="right")
    else:
        flat = (cum + np.arange(len(policies), dtype=np.float64)[:, None]).ravel()
        idx = np.searchsorted(flat, groups + u, side="right") - groups * n_actions
    return np.minimum(idx, n_actions - 1).astype(np.int64)


def search(
    tree: BeliefTree,
    model: ProblemModel,
    batch: SearchBatch,
    d_max: int,
    eta: float,
    rng: RowRng,
) -> LeafResult:
    """Descend ``d_max - batch.depth`` levels, expanding the tree in place.

    Exactly one action is sampled per episode per level; rewards and visit
    counts accumulate on the resolved action nodes.  Returns the frontier
    belief indices with their states' heuristic values.
    """
    if batch.depth > d_max:
        raise ValueError("batch.depth must not exceed d_max")
    beliefs = batch.belief_indices
    states = batch.states
    n = len(beliefs)
    row_ids = np.arange(n, dtype=np.int64)
    for depth in range(batch.depth, d_max):
        level_rng = rng.derive(depth)
        uniq, inv = np.unique(beliefs, return_inverse=True)
        policies = softmax_rows(tree.prefs[uniq], eta)
        actions = sample_actions(
            policies, level_rng.derive(_SITE_ACTION).bind(row_ids), groups=inv
        )
        result = model.step_batch(
            states, actions, level_rng.derive(_SITE_MODEL).bind(row_ids)
        )
        action_nodes = tree.append_actions(beliefs, actions, result.rewards)
        beliefs = tree.append_beliefs(action_nodes, result.observations)
        states = result.next_states
    return LeafResult(beliefs, np.asarray(model.value_heuristic(states), dtype=np.float64))
