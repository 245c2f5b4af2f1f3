"""Columnar belief-tree storage.

The tree is three growable tables: belief rows (parent action index, parent
observation, depth), action rows (parent belief index, action id, cumulative
reward, visit count) and one preference row per belief.  All expansion runs
through vectorized match-or-append on integer key pairs, so duplicate
(parent, child) edges are never stored twice and a whole batch of episodes
can extend the tree in two appends per level.

Row 0 of the belief table is the root; its parent entries hold the -1
sentinel.  New rows are assigned indices in first-occurrence order of the
append batch, which makes width-1 batches reproduce a serial build exactly.
"""

from __future__ import annotations

import numpy as np

from .core import ROOT_SENTINEL, ProblemSpec

_KEY_SHIFT = np.int64(32)
_KEY_LIMIT = np.int64(1) << _KEY_SHIFT


def encode_pairs(first, second) -> np.ndarray:
    """Pack two non-negative int arrays (< 2**32) into one int64 key."""
    first = np.asarray(first, dtype=np.int64)
    second = np.asarray(second, dtype=np.int64)
    if first.size and (
        first.min() < 0
        or second.min() < 0
        or first.max() >= _KEY_LIMIT
        or second.max() >= _KEY_LIMIT
    ):
        raise ValueError("pair entries must be in [0, 2**32)")
    return (first << _KEY_SHIFT) | second


def decode_pairs(keys: np.ndarray):
    keys = np.asarray(keys, dtype=np.int64)
    return keys >> _KEY_SHIFT, keys & (_KEY_LIMIT - 1)


def _match_sorted(sorted_keys, sorted_rows, queries, next_row):
    """Match encoded query keys against a sorted key table.

    Returns (row index per query, encoded new keys in first-occurrence
    order).  Unseen unique keys are assigned consecutive indices starting
    at ``next_row``; duplicate queries share one assignment.
    """
    uniq, first_pos, inverse = np.unique(
        queries, return_index=True, return_inverse=True
    )
    pos = np.searchsorted(sorted_keys, uniq)
    pos_c = np.minimum(pos, max(len(sorted_keys) - 1, 0))
    if len(sorted_keys):
        hit = (pos < len(sorted_keys)) & (sorted_keys[pos_c] == uniq)
    else:
        hit = np.zeros(len(uniq), dtype=bool)

    rows_for_uniq = np.empty(len(uniq), dtype=np.int64)
    rows_for_uniq[hit] = sorted_rows[pos_c[hit]]

    miss_idx = np.flatnonzero(~hit)
    order = np.argsort(first_pos[miss_idx], kind="stable")
    new_keys = uniq[miss_idx[order]]
    rows_for_uniq[miss_idx[order]] = next_row + np.arange(len(miss_idx))
    return rows_for_uniq[inverse], new_keys


def match_or_append_pairs(existing_keys, query_keys):
    """Resolve integer pairs against a table, appending unseen ones.

    ``existing_keys`` is an (k, 2) array of pairwise-unique pairs whose row
    index is their position; ``query_keys`` is a (q, 2) batch.  Returns
    (row index per query, number of new rows).  The function is pure; new
    pairs get indices k, k+1, ... in first-occurrence order of the batch.
    """
    existing_keys = np.asarray(existing_keys, dtype=np.int64).reshape(-1, 2)
    query_keys = np.asarray(query_keys, dtype=np.int64).reshape(-1, 2)
    enc = encode_pairs(existing_keys[:, 0], existing_keys[:, 1])
    order = np.argsort(enc, kind="stable")
    rows, new_keys = _match_sorted(
        enc[order], order.astype(np.int64), encode_pairs(query_keys[:, 0], query_keys[:, 1]),
        len(existing_keys),
    )
    return rows, len(new_keys)


def _grow(arr: np.ndarray, need: int) -> np.ndarray:
    cap = len(arr)
    if need <= cap:
        return arr
    new_cap = max(need, 2 * cap, 16)
    out = np.empty((new_cap,) + arr.shape[1:], dtype=arr.dtype)
    out[:cap] = arr
    return out


class BeliefTree:
    """The three tables, plus sorted key caches for fast edge matching."""

    def __init__(self, action_count: int, init_prefs: np.ndarray | None = None):
        if action_count < 1:
            raise ValueError("action_count must be >= 1")
        self.action_count = action_count
        if init_prefs is None:
            init_prefs = np.zeros(action_count)
        init_prefs = np.asarray(init_prefs, dtype=np.float64)
        if init_prefs.shape != (action_count,) or not np.all(np.isfinite(init_prefs)):
            raise ValueError("init_prefs must be a finite vector of length |A|")
        self._init_prefs = init_prefs

        cap = 16
        self.n_beliefs = 1
        self._b_parent_action = np.full(cap, ROOT_SENTINEL, dtype=np.int64)
        self._b_parent_obs = np.full(cap, ROOT_SENTINEL, dtype=np.int64)
        self._b_depth = np.zeros(cap, dtype=np.int64)
        self._prefs = np.zeros((cap, action_count), dtype=np.float64)
        self._prefs[0] = init_prefs

        self.n_actions = 0
        self._a_parent_belief = np.empty(cap, dtype=np.int64)
        self._a_action = np.empty(cap, dtype=np.int64)
        self._a_reward = np.empty(cap, dtype=np.float64)
        self._a_visits = np.empty(cap, dtype=np.int64)

        # sorted (encoded key, row) caches for the two edge tables
        self._a_sorted_keys = np.empty(0, dtype=np.int64)
        self._a_sorted_rows = np.empty(0, dtype=np.int64)
        self._b_sorted_keys = np.empty(0, dtype=np.int64)
        self._b_sorted_rows = np.empty(0, dtype=np.int64)

    # -- trimmed column views -------------------------------------------------

    @property
    def parent_action(self) -> np.ndarray:
        return self._b_parent_action[: self.n_beliefs]

    @property
    def parent_obs(self) -> np.ndarray:
        return self._b_parent_obs[: self.n_beliefs]

    @property
    def depth(self) -> np.ndarray:
        return self._b_depth[: self.n_beliefs]

    @property
    def prefs(self) -> np.ndarray:
        return self._prefs[: self.n_beliefs]

    @property
    def action_parent_belief(self) -> np.ndarray:
        return self._a_parent_belief[: self.n_actions]

    @property
    def action_id(self) -> np.ndarray:
        return self._a_action[: self.n_actions]

    @property
    def action_reward_sum(self) -> np.ndarray:
        return self._a_reward[: self.n_actions]

    @property
    def action_visits(self) -> np.ndarray:
        return self._a_visits[: self.n_actions]

    # -- expansion ------------------------------------------------------------

    def _insert_sorted(self, which: str, new_keys: np.ndarray, first_row: int):
        keys = getattr(self, f"_{which}_sorted_keys")
        rows = getattr(self, f"_{which}_sorted_rows")
        order = np.argsort(new_keys, kind="stable")
        nk = new_keys[order]
        nr = first_row + order.astype(np.int64)
        pos = np.searchsorted(keys, nk)
        setattr(self, f"_{which}_sorted_keys", np.insert(keys, pos, nk))
        setattr(self, f"_{which}_sorted_rows", np.insert(rows, pos, nr))

    def append_actions(self, belief_indices, actions, rewards) -> np.ndarray:
        """Resolve (belief, action) edges, accumulate rewards and visits.

        Every batch row bumps its resolved node's visit count by one and its
        cumulative reward by the row's reward.  Returns per-row node indices.
        """
        belief_indices = np.asarray(belief_indices, dtype=np.int64)
        actions = np.asarray(actions, dtype=np.int64)
        rewards = np.asarray(rewards, dtype=np.float64)
        if not (len(belief_indices) == len(actions) == len(rewards)):
            raise ValueError("append_actions: batch lengths differ")
        if len(belief_indices) and (
            belief_indices.min() < 0 or belief_indices.max() >= self.n_beliefs
        ):
            raise ValueError("append_actions: invalid belief index")

        queries = encode_pairs(belief_indices, actions)
        idx, new_keys = _match_sorted(
            self._a_sorted_keys, self._a_sorted_rows, queries, self.n_actions
        )
        n_new = len(new_keys)
        if n_new:
            first = self.n_actions
            total = first + n_new
            self._a_parent_belief = _grow(self._a_parent_belief, total)
            self._a_action = _grow(self._a_action, total)
            self._a_reward = _grow(self._a_reward, total)
            self._a_visits = _grow(self._a_visits, total)
            pb, act = decode_pairs(new_keys)
            self._a_parent_belief[first:total] = pb
            self._a_action[first:total] = act
            self._a_reward[first:total] = 0.0
            self._a_visits[first:total] = 0
            self.n_actions = total
            self._insert_sorted("a", new_keys, first)

        np.add.at(self._a_reward, idx, rewards)
        np.add.at(self._a_visits, idx, 1)
        return idx

    def append_beliefs(self, action_node_indices, observations) -> np.ndarray:
        """Resolve (action node, observation) edges, creating belief rows.

        New rows get depth = parent belief depth + 1 and a fresh preference
        row.  Returns per-row belief indices for the next search level.
        """
        action_node_indices = np.asarray(action_node_indices, dtype=np.int64)
        observations = np.asarray(observations, dtype=np.int64)
        if len(action_node_indices) != len(observations):
            raise ValueError("append_beliefs: batch lengths differ")
        if len(action_node_indices) and (
            action_node_indices.min() < 0
            or action_node_indices.max() >= self.n_actions
        ):
            raise ValueError("append_beliefs: invalid action-node index")

        queries = encode_pairs(action_node_indices, observations)
        idx, new_keys = _match_sorted(
            self._b_sorted_keys, self._b_sorted_rows, queries, self.n_beliefs
        )
        n_new = len(new_keys)
        if n_new:
            first = self.n_beliefs
            total = first + n_new
            self._b_parent_action = _grow(self._b_parent_action, total)
            self._b_parent_obs = _grow(self._b_parent_obs, total)
            self._b_depth = _grow(self._b_depth, total)
            self._prefs = _grow(self._prefs, total)
            pa, obs = decode_pairs(new_keys)
            self._b_parent_action[first:total] = pa
            self._b_parent_obs[first:total] = obs
            parent_beliefs = self._a_parent_belief[pa]
            self._b_depth[first:total] = self._b_depth[parent_beliefs] + 1
            self._prefs[first:total] = self._init_prefs
            self.n_beliefs = total
            self._insert_sorted("b", new_keys, first)
        return idx

    def nodes_at_depth(self, d: int):
        """All belief rows at depth d with their parent and grandparent rows."""
        if d < 1:
            raise ValueError("nodes_at_depth requires d >= 1")
        beliefs = np.flatnonzero(self.depth == d)
        parents = self.parent_action[beliefs]
        grandparents = self.action_parent_belief[parents] if len(parents) else parents
        return beliefs, parents, grandparents

    # -- diagnostics ----------------------------------------------------------

    def validate(self):
        """Full-table invariant scan; raises AssertionError on violation."""
        nb, na = self.n_beliefs, self.n_actions
        assert nb >= 1
        assert self.parent_action[0] == ROOT_SENTINEL
        assert self.parent_obs[0] == ROOT_SENTINEL
        assert self.depth[0] == 0
        if nb > 1:
            pa = self.parent_action[1:]
            assert pa.min() >= 0 and pa.max() < na
            keys = encode_pairs(pa, self.parent_obs[1:])
            assert len(np.unique(keys)) == nb - 1, "duplicate belief edge"
            assert np.all(
                self.depth[1:] == self.depth[self.action_parent_belief[pa]] + 1
            )
        if na:
            pb = self.action_parent_belief
            assert pb.min() >= 0 and pb.max() < nb
            keys = encode_pairs(pb, self.action_id)
            assert len(np.unique(keys)) == na, "duplicate action edge"
            assert self.action_visits.min() >= 1
            assert np.all(np.isfinite(self.action_reward_sum))
        assert np.all(np.isfinite(self.prefs))

    def stats(self) -> dict[str, int]:
        return {"belief_rows": self.n_beliefs, "action_rows": self.n_actions}

    # -- debug serialization ---------------------------------------------------

    def serialize(self) -> str:
        """Line-oriented text dump, one row per line, tab-separated."""
        lines = []
        for i in range(self.n_beliefs):
            lines.append(
                "B\t%d\t%d\t%d\t%d"
                % (i, self.parent_action[i], self.parent_obs[i], self.depth[i])
            )
        for i in range(self.n_actions):
            lines.append(
                "A\t%d\t%d\t%d\t%r\t%d"
                % (
                    i,
                    self.action_parent_belief[i],
                    self.action_id[i],
                    float(self.action_reward_sum[i]),
                    self.action_visits[i],
                )
            )
        for i in range(self.n_beliefs):
            vals = "\t".join(repr(float(v)) for v in self.prefs[i])
            lines.append("P\t%d\t%d\t%s" % (i, i, vals))
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "BeliefTree":
        b_rows, a_rows, p_rows = [], [], []
        for line in text.splitlines():
            if not line.strip():
                continue
            parts = line.split("\t")
            if parts[0] == "B":
                b_rows.append([int(x) for x in parts[1:5]])
            elif parts[0] == "A":
                a_rows.append(
                    (int(parts[1]), int(parts[2]), int(parts[3]), float(parts[4]), int(parts[5]))
                )
            elif parts[0] == "P":
                p_rows.append((int(parts[1]), [float(x) for x in parts[3:]]))
            else:
                raise ValueError(f"unknown row tag {parts[0]!r}")
        if not b_rows or b_rows[0][0] != 0:
            raise ValueError("serialized tree must start with belief row 0")
        action_count = len(p_rows[0][1])
        tree = cls(action_count)
        nb, na = len(b_rows), len(a_rows)
        tree._b_parent_action = np.array([r[1] for r in b_rows], dtype=np.int64)
        tree._b_parent_obs = np.array([r[2] for r in b_rows], dtype=np.int64)
        tree._b_depth = np.array([r[3] for r in b_rows], dtype=np.int64)
        tree.n_beliefs = nb
        tree._a_parent_belief = np.array([r[1] for r in a_rows], dtype=np.int64)
        tree._a_action = np.array([r[2] for r in a_rows], dtype=np.int64)
        tree._a_reward = np.array([r[3] for r in a_rows], dtype=np.float64)
        tree._a_visits = np.array([r[4] for r in a_rows], dtype=np.int64)
        tree.n_actions = na
        prefs = np.zeros((nb, action_count), dtype=np.float64)
        for row, vals in p_rows:
            prefs[row] = vals
        tree._prefs = prefs
        if na:
            keys = encode_pairs(tree._a_parent_belief, tree._a_action)
            order = np.argsort(keys, kind="stable")
            tree._a_sorted_keys = keys[order]
            tree._a_sorted_rows = order.astype(np.int64)
        if nb > 1:
            keys = encode_pairs(tree._b_parent_action[1:nb], tree._b_parent_obs[1:nb])
            order = np.argsort(keys, kind="stable")
            tree._b_sorted_keys = keys[order]
            tree._b_sorted_rows = order.astype(np.int64) + 1
        return tree


def init_tree(spec: ProblemSpec, init_prefs: np.ndarray | None = None) -> BeliefTree:
    """Fresh tree: root belief row, no actions, one preference row.

    Under the uniform reference policy the initial preference row is the
    zero vector (the common (1/eta) log pi0 offset is dropped, which leaves
    softmax sampling at the first visit unchanged); a non-uniform reference
    passes its true scaled log-probabilities via ``init_prefs``.
    """
    return BeliefTree(spec.action_count, init_prefs)
