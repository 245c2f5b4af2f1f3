"""Grid navigation through a partially known obstacle field.

A robot starts on a random top-border cell of a 13x13 map and must reach
the goal cell at the bottom, passing one of two gates in the middle wall;
exactly one gate is open.  Interior cell occupancy (124 cells on the
default map) and the open gate are hidden, drawn from independent priors.
Each step the robot receives a noisy 8-bit occupancy reading of its
neighbor cells.

Map text format, one row per line: '#' permanent obstacle, '.' known free,
'G' goal, '|' gate, '?' unknown occupancy (drawn from the prior).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ProblemModel, ProblemSpec, StepResult, check_step_inputs
from ..rng import BoundRng, RowRng

DEFAULT_MAP = """
.............
?????????????
?????????????
?????????????
?????????????
???.?????.???
###|#####|###
???.?????.???
?????????????
?????????????
??????.??????
??????.??????
......G......
""".strip()

# cell kinds
_FREE, _WALL, _GATE, _UNKNOWN = 0, 1, 2, 3

# neighbor/move order: N, NE, E, SE, S, SW, W, NW (+ stay as action 8)
_DELTAS = np.array(
    [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)],
    dtype=np.int64,
)
STAY = 8


@dataclass
class NavStates:
    pos: np.ndarray          # flat cell index, row * width + col
    occ: np.ndarray          # (n, n_unknown) bool occupancy of unknown cells
    open_gate: np.ndarray    # (n,) which gate index is open
    terminal: np.ndarray

    def __len__(self) -> int:
        return len(self.pos)

    def take(self, indices) -> "NavStates":
        idx = np.asarray(indices, dtype=np.int64)
        return NavStates(
            self.pos[idx], self.occ[idx], self.open_gate[idx], self.terminal[idx]
        )


class NavigationModel(ProblemModel):
    def __init__(
        self,
        map_text: str = DEFAULT_MAP,
        p_obstacle: float = 0.25,
        sensor_accuracy: float = 0.9,
        discount: float = 0.983,
        max_steps: int = 60,
    ):
        rows = [r for r in map_text.splitlines() if r.strip()]
        self.height = len(rows)
        self.width = len(rows[0])
        if any(len(r) != self.width for r in rows):
            raise ValueError("map rows must have equal length")
        self.kind = np.full((self.height, self.width), _FREE, dtype=np.int8)
        self.aux = np.full((self.height, self.width), -1, dtype=np.int64)
        self.goal = np.zeros((self.height, self.width), dtype=bool)
        gates = 0
        unknown = 0
        for r, line in enumerate(rows):
            for c, ch in enumerate(line):
                if ch == "#":
                    self.kind[r, c] = _WALL
                elif ch == "|":
                    self.kind[r, c] = _GATE
                    self.aux[r, c] = gates
                    gates += 1
                elif ch == "?":
                    self.kind[r, c] = _UNKNOWN
                    self.aux[r, c] = unknown
                    unknown += 1
                elif ch == "G":
                    self.goal[r, c] = True
                elif ch != ".":
                    raise ValueError(f"unknown map character {ch!r}")
        if gates != 2:
            raise ValueError("map must contain exactly two gates")
        self.n_unknown = unknown
        self.n_gates = gates
        self.start_cells = np.flatnonzero(
            (self.kind[0] == _FREE) & ~self.goal[0]
        ).astype(np.int64)
        if len(self.start_cells) == 0:
            raise ValueError("top border has no free start cells")
        self.p_obstacle = p_obstacle
        self.sensor_accuracy = sensor_accuracy
        self.spec = ProblemSpec(
            name="navigation",
            action_count=9,
            observation_arity=256,
            discount=discount,
            max_steps=max_steps,
        )
        self._goal_dist = self._bfs_goal_distances()

    @classmethod
    def from_file(cls, path: str, **kwargs) -> "NavigationModel":
        with open(path) as fh:
            return cls(map_text=fh.read(), **kwargs)

    def _bfs_goal_distances(self) -> np.ndarray:
        """Optimistic 8-connected distance to goal: walls block, gates and
        unknown cells count as free."""
        dist = np.full((self.height, self.width), np.inf)
        frontier = list(zip(*np.nonzero(self.goal)))
        for r, c in frontier:
            dist[r, c] = 0
        while frontier:
            nxt = []
            for r, c in frontier:
                for dr, dc in _DELTAS:
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < self.height and 0 <= cc < self.width:
                        if self.kind[rr, cc] != _WALL and dist[rr, cc] == np.inf:
                            dist[rr, cc] = dist[r, c] + 1
                            nxt.append((rr, cc))
            frontier = nxt
        return dist

    def _occupied(self, states: NavStates, r: np.ndarray, c: np.ndarray) -> np.ndarray:
        """Per-row occupancy of target cells (out of bounds counts occupied)."""
        out = (r < 0) | (r >= self.height) | (c < 0) | (c >= self.width)
        rc = np.clip(r, 0, self.height - 1)
        cc = np.clip(c, 0, self.width - 1)
        kind = self.kind[rc, cc]
        aux = self.aux[rc, cc]
        blocked = out | (kind == _WALL)
        gate = ~out & (kind == _GATE)
        blocked |= gate & (aux != states.open_gate)
        unk = ~out & (kind == _UNKNOWN)
        if np.any(unk):
            rows = np.flatnonzero(unk)
            blocked[rows] |= states.occ[rows, aux[rows]]
        return blocked

    def _true_neighbor_bits(self, states: NavStates) -> np.ndarray:
        n = len(states)
        r = states.pos // self.width
        c = states.pos % self.width
        bits = np.empty((n, 8), dtype=bool)
        for i, (dr, dc) in enumerate(_DELTAS):
            bits[:, i] = self._occupied(states, r + dr, c + dc)
        return bits

    def sample_initial_states(self, n: int, rng: RowRng) -> NavStates:
        if n < 1:
            raise ValueError("n must be >= 1")
        rows = np.arange(n, dtype=np.int64)
        u_pos = rng.derive(0).uniform(rows)
        pos = self.start_cells[(u_pos * len(self.start_cells)).astype(np.int64)]
        occ = rng.derive(1).uniform(rows, self.n_unknown) < self.p_obstacle
        gate = (rng.derive(2).uniform(rows) < 0.5).astype(np.int64)
        return NavStates(pos, occ, gate, np.zeros(n, dtype=bool))

    def step_batch(self, states: NavStates, actions, rng: BoundRng) -> StepResult:
        check_step_inputs(self.spec, states, actions)
        actions = np.asarray(actions, dtype=np.int64)
        n = len(states)
        r = states.pos // self.width
        c = states.pos % self.width

        moving = actions != STAY
        act = np.minimum(actions, 7)
        tr = np.where(moving, r + _DELTAS[act, 0], r)
        tc = np.where(moving, c + _DELTAS[act, 1], c)
        blocked = moving & self._occupied(states, tr, tc)
        nr = np.where(blocked, r, tr)
        nc = np.where(blocked, c, tc)
        new_pos = nr * self.width + nc

        entered_goal = self.goal[nr, nc] & moving & ~blocked
        rewards = np.full(n, -0.1)
        rewards[~moving] = -0.3
        rewards[blocked] = -1.1
        rewards[entered_goal] = 20.0

        next_terminal = states.terminal | entered_goal
        next_states = NavStates(
            new_pos, states.occ.copy(), states.open_gate.copy(), next_terminal
        )

        bits = self._true_neighbor_bits(next_states)
        flips = rng.derive(0).uniform(8) >= self.sensor_accuracy
        noisy = bits ^ flips
        obs = noisy @ (1 << np.arange(8, dtype=np.int64))
        obs = obs.astype(np.int64)
        obs[next_terminal] = self.spec.terminal_obs

        absorbing = states.terminal
        next_states.pos[absorbing] = states.pos[absorbing]
        rewards[absorbing] = 0.0
        return StepResult(next_states, obs, rewards)

    def observation_log_likelihood(
        self, next_states: NavStates, action: int, observation: int
    ) -> np.ndarray:
        if not 0 <= observation <= self.spec.terminal_obs:
            raise ValueError("invalid observation code")
        n = len(next_states)
        out = np.full(n, -np.inf)
        term = next_states.terminal
        if observation == self.spec.terminal_obs:
            out[term] = 0.0
            return out
        bits = self._true_neighbor_bits(next_states)
        obs_bits = (observation >> np.arange(8)) & 1
        matches = (bits == obs_bits.astype(bool)).sum(axis=1)
        acc = self.sensor_accuracy
        live = ~term
        with np.errstate(divide="ignore", invalid="ignore"):
            hit_term = matches[live] * np.log(acc)
            misses = 8 - matches[live]
            miss_term = np.where(misses > 0, misses * np.log(1.0 - acc), 0.0)
        out[live] = hit_term + miss_term
        return out

    def value_heuristic(self, states: NavStates) -> np.ndarray:
        g = self.spec.discount
        r = states.pos // self.width
        c = states.pos % self.width
        d = np.maximum(self._goal_dist[r, c] - 1.0, 0.0)
        decay = g**d
        h = 20.0 * decay - 0.1 * (1.0 - decay) / (1.0 - g)
        h[states.terminal] = 0.0
        return h
