"""Vectorized preference backup.

After a search call the frontier values are seeded from the aggregated leaf
heuristics and then propagated level by level back to the root.  At each
level every action node with at least one valued child gets a Q value (its
average immediate reward plus the discounted visit-weighted mean of its
children's values), and the parents' preference entries for exactly those
actions are moved by Q minus the parent's current log-sum-exp value.
Columns of actions not realized at the level are left untouched.

Leaf visit weights are the occurrence counts within the current batch;
interior weights come from the lifetime visit counts in the action table.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .search import LeafResult
from .tree import BeliefTree


@dataclass
class LevelValues:
    """Values and visit weights of the belief nodes at one depth."""

    belief_indices: np.ndarray
    values: np.ndarray
    visit_weights: np.ndarray


def log_sum_exp_rows(pref_rows: np.ndarray, eta: float) -> np.ndarray:
    """(1/eta) log sum_a exp(eta * prefs_a) per row, max-stabilized."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    pref_rows = np.asarray(pref_rows, dtype=np.float64)
    z = eta * pref_rows
    m = z.max(axis=-1)
    return m / eta + np.log(np.exp(z - m[..., None]).sum(axis=-1)) / eta


def aggregate_leaves(leaves: LeafResult) -> LevelValues:
    """Group the frontier batch by belief: counts and mean heuristics."""
    idx = np.asarray(leaves.leaf_belief_indices, dtype=np.int64)
    h = np.asarray(leaves.heuristic_values, dtype=np.float64)
    uniq, inv = np.unique(idx, return_inverse=True)
    counts = np.bincount(inv, minlength=len(uniq)).astype(np.float64)
    sums = np.bincount(inv, weights=h, minlength=len(uniq))
    return LevelValues(uniq, sums / counts, counts)


def action_q_values(
    tree: BeliefTree,
    action_rows: np.ndarray,
    child_values: LevelValues,
    gamma: float,
) -> np.ndarray:
    """Q per listed action node: mean reward + gamma * weighted child value."""
    action_rows = np.asarray(action_rows, dtype=np.int64)
    child_idx = np.asarray(child_values.belief_indices, dtype=np.int64)
    v = np.asarray(child_values.values, dtype=np.float64)
    n = np.asarray(child_values.visit_weights, dtype=np.float64)
    parents = tree.parent_action[child_idx]
    size = tree.n_actions
    num = np.bincount(parents, weights=v * n, minlength=size)
    den = np.bincount(parents, weights=n, minlength=size)
    if np.any(den[action_rows] <= 0):
        raise ValueError("action node without valued children")
    avg_r = tree.action_reward_sum[action_rows] / tree.action_visits[action_rows]
    return avg_r + gamma * num[action_rows] / den[action_rows]


def backup(
    tree: BeliefTree,
    leaves: LeafResult,
    d_max: int,
    eta: float,
    gamma: float,
) -> None:
    """Propagate leaf values through the preference table, in place."""
    values = np.zeros(tree.n_beliefs)
    weights = np.zeros(tree.n_beliefs)
    leaf_level = aggregate_leaves(leaves)
    values[leaf_level.belief_indices] = leaf_level.values
    weights[leaf_level.belief_indices] = leaf_level.visit_weights

    for d in range(d_max, 0, -1):
        level_beliefs, level_parents, _ = tree.nodes_at_depth(d)
        valued = weights[level_beliefs] > 0
        if not np.any(valued):
            continue
        children = level_beliefs[valued]
        actions = np.unique(level_parents[valued])
        q = action_q_values(
            tree,
            actions,
            LevelValues(children, values[children], weights[children]),
            gamma,
        )
        parent_beliefs = tree.action_parent_belief[actions]
        uniq_parents, inv = np.unique(parent_beliefs, return_inverse=True)
        v_curr = log_sum_exp_rows(tree.prefs[uniq_parents], eta)
        # (parent, action) pairs are unique by table construction, so the
        # scatter below has no conflicting writes
        cols = tree.action_id[actions]
        tree.prefs[parent_beliefs, cols] += q - v_curr[inv]
        values[uniq_parents] = log_sum_exp_rows(tree.prefs[uniq_parents], eta)
        weights[uniq_parents] = np.bincount(
            parent_beliefs,
            weights=tree.action_visits[actions].astype(np.float64),
            minlength=tree.n_beliefs,
        )[uniq_parents]
