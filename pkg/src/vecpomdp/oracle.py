"""Serial and exact reference implementations used by the test suite.

Everything here favors transparency over speed: the tree is linked records,
the search and backup are plain loops over scalars, and the value iteration
enumerates alpha vectors with LP pruning.  The serial search draws from the
same per-row counter streams as the vectorized code, so a width-1 batched
search must reproduce the serial build exactly.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .core import ROOT_SENTINEL, ProblemModel
from .envs.tabular import TabularPOMDP
from .rng import RowRng


class CapacityError(Exception):
    """Raised when exact enumeration would exceed its size budget."""


class ImpossibleEvidenceError(Exception):
    """Raised when an observation has zero probability under the belief."""


# ---------------------------------------------------------------------------
# serial belief tree
# ---------------------------------------------------------------------------


class SerialBeliefNode:
    def __init__(self, index, parent_action, parent_obs, depth, action_count, init_prefs):
        self.index = index
        self.parent_action = parent_action
        self.parent_obs = parent_obs
        self.depth = depth
        self.prefs = list(init_prefs) if init_prefs is not None else [0.0] * action_count
        self.actions = {}


class SerialActionNode:
    def __init__(self, index, parent, action):
        self.index = index
        self.parent = parent
        self.action = action
        self.reward_sum = 0.0
        self.visits = 0
        self.children = {}


class SerialTree:
    """Linked-record mirror of the columnar tree."""

    def __init__(self, action_count: int, init_prefs=None):
        self.action_count = action_count
        self.init_prefs = list(init_prefs) if init_prefs is not None else None
        self.beliefs: list[SerialBeliefNode] = []
        self.actions: list[SerialActionNode] = []
        self.root = self._new_belief(None, ROOT_SENTINEL, 0)

    def _new_belief(self, parent_action, parent_obs, depth) -> SerialBeliefNode:
        node = SerialBeliefNode(
            len(self.beliefs), parent_action, parent_obs, depth,
            self.action_count, self.init_prefs,
        )
        self.beliefs.append(node)
        return node

    def get_or_add_action(self, belief: SerialBeliefNode, action: int) -> SerialActionNode:
        node = belief.actions.get(action)
        if node is None:
            node = SerialActionNode(len(self.actions), belief, action)
            self.actions.append(node)
            belief.actions[action] = node
        return node

    def get_or_add_child(self, anode: SerialActionNode, obs: int) -> SerialBeliefNode:
        node = anode.children.get(obs)
        if node is None:
            node = self._new_belief(anode, obs, anode.parent.depth + 1)
            anode.children[obs] = node
        return node

    def to_text(self) -> str:
        lines = []
        for b in self.beliefs:
            pa = b.parent_action.index if b.parent_action is not None else ROOT_SENTINEL
            lines.append("B\t%d\t%d\t%d\t%d" % (b.index, pa, b.parent_obs, b.depth))
        for a in self.actions:
            lines.append(
                "A\t%d\t%d\t%d\t%r\t%d"
                % (a.index, a.parent.index, a.action, float(a.reward_sum), a.visits)
            )
        for b in self.beliefs:
            vals = "\t".join(repr(float(v)) for v in b.prefs)
            lines.append("P\t%d\t%d\t%s" % (b.index, b.index, vals))
        return "\n".join(lines) + "\n"


def _lse(prefs, eta: float) -> float:
    m = max(prefs)
    return m + math.log(sum(math.exp(eta * (p - m)) for p in prefs)) / eta


def _sample_from_prefs(prefs, eta: float, u: float) -> int:
    z = [eta * p for p in prefs]
    m = max(z)
    e = [math.exp(v - m) for v in z]
    total = sum(e)
    cum = []
    acc = 0.0
    for v in e:
        acc += v / total
        cum.append(acc)
    return min(bisect_right(cum, u), len(prefs) - 1)


def serial_backup(tree: SerialTree, leaves, d_max: int, eta: float, gamma: float):
    """Per-node preference backup; ``leaves`` is a list of (node, value)."""
    values: dict[SerialBeliefNode, float] = {}
    weights: dict[SerialBeliefNode, float] = {}
    counts: dict[SerialBeliefNode, int] = {}
    sums: dict[SerialBeliefNode, float] = {}
    for node, h in leaves:
        counts[node] = counts.get(node, 0) + 1
        sums[node] = sums.get(node, 0.0) + h
    for node in counts:
        values[node] = sums[node] / counts[node]
        weights[node] = float(counts[node])

    for d in range(d_max, 0, -1):
        level = [
            b for b in tree.beliefs if b.depth == d and weights.get(b, 0.0) > 0
        ]
        if not level:
            continue
        level_actions = []
        seen = set()
        for b in level:
            a = b.parent_action
            if a.index not in seen:
                seen.add(a.index)
                level_actions.append(a)
        q = {}
        for a in level_actions:
            num = 0.0
            den = 0.0
            for child in a.children.values():
                w = weights.get(child, 0.0)
                if w > 0:
                    num += values[child] * w
                    den += w
            q[a] = a.reward_sum / a.visits + gamma * num / den
        parents = []
        seen = set()
        for a in level_actions:
            if a.parent.index not in seen:
                seen.add(a.parent.index)
                parents.append(a.parent)
        v_curr = {b: _lse(b.prefs, eta) for b in parents}
        for a in level_actions:
            a.parent.prefs[a.action] += q[a] - v_curr[a.parent]
        for b in parents:
            values[b] = _lse(b.prefs, eta)
            weights[b] = float(
                sum(a.visits for a in level_actions if a.parent is b)
            )


def serial_search_backup(
    model: ProblemModel,
    initial_states,
    rng: RowRng,
    d_max: int,
    eta: float,
    gamma: float,
    tree: SerialTree | None = None,
) -> SerialTree:
    """Episode-by-episode construction with a backup after each episode.

    Episode e uses logical row id e, the same id the vectorized search would
    assign it, so a width-1 batched search over the same rng subtree builds
    an identical tree.
    """
    if tree is None:
        tree = SerialTree(model.spec.action_count)
    for e in range(len(initial_states)):
        state = initial_states.take(np.array([e]))
        node = tree.root
        for depth in range(d_max):
            level_rng = rng.derive(depth)
            u = float(level_rng.derive(0).bind([e]).uniform()[0])
            action = _sample_from_prefs(node.prefs, eta, u)
            result = model.step_batch(
                state, np.array([action], dtype=np.int64), level_rng.derive(1).bind([e])
            )
            anode = tree.get_or_add_action(node, action)
            anode.visits += 1
            anode.reward_sum += float(result.rewards[0])
            node = tree.get_or_add_child(anode, int(result.observations[0]))
            state = result.next_states
        h = float(model.value_heuristic(state)[0])
        serial_backup(tree, [(node, h)], d_max, eta, gamma)
    return tree


# ---------------------------------------------------------------------------
# exact value iteration over alpha vectors
# ---------------------------------------------------------------------------


@dataclass
class AlphaVectorValue:
    """A finite-horizon value function: max over tagged alpha vectors."""

    alphas: np.ndarray
    actions: np.ndarray

    def value(self, belief) -> float:
        return float((self.alphas @ np.asarray(belief)).max())

    def action(self, belief) -> int:
        return int(self.actions[np.argmax(self.alphas @ np.asarray(belief))])


def _lp_witness(v: np.ndarray, kept: list[np.ndarray], tol: float):
    """Belief where v beats every kept vector by the largest margin."""
    s = len(v)
    n_kept = len(kept)
    # variables: belief (s entries) then margin delta; maximize delta
    c = np.zeros(s + 1)
    c[-1] = -1.0
    a_ub = np.zeros((n_kept, s + 1))
    for i, w in enumerate(kept):
        a_ub[i, :s] = w - v
        a_ub[i, -1] = 1.0
    a_eq = np.zeros((1, s + 1))
    a_eq[0, :s] = 1.0
    bounds = [(0.0, 1.0)] * s + [(None, None)]
    res = linprog(
        c, A_ub=a_ub, b_ub=np.zeros(n_kept), A_eq=a_eq, b_eq=[1.0],
        bounds=bounds, method="highs",
    )
    if not res.success:
        raise RuntimeError(f"pruning LP failed: {res.message}")
    delta = -res.fun
    return (res.x[:s], delta) if delta > tol else (None, delta)


def _prune(alphas: np.ndarray, actions: np.ndarray, tol: float = 1e-9):
    uniq, idx = np.unique(np.round(alphas, 12), axis=0, return_index=True)
    alphas = alphas[np.sort(idx)]
    actions = actions[np.sort(idx)]
    candidates = list(range(len(alphas)))
    kept: list[int] = []
    while candidates:
        i = candidates[0]
        if not kept:
            kept.append(candidates.pop(0))
            continue
        witness, _ = _lp_witness(alphas[i], [alphas[k] for k in kept], tol)
        if witness is None:
            candidates.pop(0)
            continue
        scores = alphas[candidates] @ witness
        best = candidates[int(np.argmax(scores))]
        candidates.remove(best)
        kept.append(best)
    kept.sort()
    return alphas[kept], actions[kept]


def exact_value_iteration(
    pomdp: TabularPOMDP, horizon: int, max_vectors: int = 20_000
) -> AlphaVectorValue:
    """Finite-horizon optimal value function by alpha-vector enumeration."""
    s = pomdp.n_states
    gamma = pomdp.discount
    alphas = np.zeros((1, s))
    actions = np.zeros(1, dtype=np.int64)
    for _ in range(horizon):
        all_alphas = []
        all_actions = []
        for a in range(pomdp.n_actions):
            # back-projection per observation: (n_prev, s)
            current = pomdp.rewards[:, a][None, :]
            for o in range(pomdp.n_observations):
                proj = gamma * (alphas * pomdp.observations[a][:, o]) @ pomdp.transitions[a].T
                combined = current[:, None, :] + proj[None, :, :]
                current = combined.reshape(-1, s)
                if len(current) > max_vectors:
                    raise CapacityError(
                        f"cross-sum grew past {max_vectors} vectors; "
                        "horizon too large for enumeration"
                    )
                if len(current) > 64:
                    tags = np.zeros(len(current), dtype=np.int64)
                    current, _ = _prune(current, tags)
            all_alphas.append(current)
            all_actions.append(np.full(len(current), a, dtype=np.int64))
        alphas, actions = _prune(
            np.concatenate(all_alphas), np.concatenate(all_actions)
        )
    return AlphaVectorValue(alphas, actions)


def exact_bayes_filter(pomdp: TabularPOMDP, belief, action: int, observation: int):
    """Exact posterior over states after (action, observation)."""
    belief = np.asarray(belief, dtype=np.float64)
    predicted = pomdp.transitions[action].T @ belief
    posterior = pomdp.observations[action][:, observation] * predicted
    norm = posterior.sum()
    if norm <= 0.0:
        raise ImpossibleEvidenceError(
            f"observation {observation} has zero probability under action {action}"
        )
    return posterior / norm
