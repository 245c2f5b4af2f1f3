"""Two-agent rock sampling on an n x n grid.

Each agent moves in the four compass directions, samples the rock under it,
or points a noisy long-range sensor at one of the m rocks.  Good rocks pay
+10 and turn bad when sampled; sampling a bad rock or bare ground pays -10.
Moving east off the map retires the agent with a +10 bonus; the episode
ends when both agents have left.  Rock positions are fixed, known map
features; only the rock qualities are hidden (independent fair coins).

The joint action space is all (5 + m)^2 per-agent combinations.  The joint
observation packs the two per-agent sensor readings (GOOD / BAD / NULL)
into one code in [0, 9).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ProblemModel, ProblemSpec, StepResult, check_step_inputs
from ..rng import BoundRng, RowRng

# per-agent ops: 0..3 move N/E/S/W, 4 sample, 5+i check rock i
_MOVE_N, _MOVE_E, _MOVE_S, _MOVE_W, _SAMPLE = range(5)
_DX = np.array([0, 1, 0, -1], dtype=np.int64)
_DY = np.array([-1, 0, 1, 0], dtype=np.int64)

# per-agent readings
GOOD, BAD, NULL = 0, 1, 2


@dataclass
class MarsStates:
    x: np.ndarray        # (n, 2) agent columns; x == grid size means departed
    y: np.ndarray        # (n, 2) agent rows
    rocks: np.ndarray    # (n, m) bool, True while a rock is still good
    terminal: np.ndarray

    def __len__(self) -> int:
        return len(self.terminal)

    def take(self, indices) -> "MarsStates":
        idx = np.asarray(indices, dtype=np.int64)
        return MarsStates(self.x[idx], self.y[idx], self.rocks[idx], self.terminal[idx])


class MarsModel(ProblemModel):
    def __init__(
        self,
        n: int = 20,
        m: int = 20,
        layout_seed: int = 0,
        half_efficiency_distance: float = 20.0,
        discount: float = 0.983,
        max_steps: int = 90,
    ):
        if n < 2 or m < 1:
            raise ValueError("need a grid of at least 2 and at least one rock")
        self.n = n
        self.m = m
        self.half_efficiency_distance = half_efficiency_distance
        u = RowRng.from_seed(layout_seed).derive(0).uniform(
            np.arange(n * n, dtype=np.int64)
        )
        cells = np.argsort(u)[:m]
        self.rock_x = (cells % n).astype(np.int64)
        self.rock_y = (cells // n).astype(np.int64)
        self.rock_at = np.full((n, n), -1, dtype=np.int64)  # [x, y] -> rock index
        self.rock_at[self.rock_x, self.rock_y] = np.arange(m)
        self.start_x = np.array([0, 0], dtype=np.int64)
        self.start_y = np.array([n // 3, (2 * n) // 3], dtype=np.int64)
        self.per_agent_ops = 5 + m
        self.spec = ProblemSpec(
            name="mars",
            action_count=self.per_agent_ops**2,
            observation_arity=9,
            discount=discount,
            max_steps=max_steps,
        )

    def check_accuracy(self, dist: np.ndarray) -> np.ndarray:
        """Sensor accuracy 0.5 * (1 + 2^(-d / d0)); 1 at d = 0, 0.5 far away."""
        return 0.5 * (1.0 + 2.0 ** (-dist / self.half_efficiency_distance))

    def sample_initial_states(self, n: int, rng: RowRng) -> MarsStates:
        if n < 1:
            raise ValueError("n must be >= 1")
        rows = np.arange(n, dtype=np.int64)
        rocks = rng.derive(0).uniform(rows, self.m) < 0.5
        x = np.tile(self.start_x, (n, 1))
        y = np.tile(self.start_y, (n, 1))
        return MarsStates(x, y, rocks, np.zeros(n, dtype=bool))

    def _agent_move(self, x, y, op, departed):
        """Apply one agent's op in place; returns (reward, newly_departed)."""
        n_grid = self.n
        reward = np.zeros(len(x))
        move = ~departed & (op < 4)
        mi = np.flatnonzero(move)
        if len(mi):
            o = op[mi]
            tx = x[mi] + _DX[o]
            ty = y[mi] + _DY[o]
            departs = tx == n_grid
            inside = (tx >= 0) & (tx < n_grid) & (ty >= 0) & (ty < n_grid)
            ok = departs | inside
            x[mi] = np.where(ok, tx, x[mi])
            y[mi] = np.where(ok & ~departs, ty, y[mi])
            reward[mi[departs]] += 10.0
        return reward

    def _agent_sample(self, x, y, op, departed, rocks):
        """Apply one agent's sample op; mutates rocks; returns reward."""
        reward = np.zeros(len(x))
        samp = ~departed & (op == _SAMPLE)
        si = np.flatnonzero(samp)
        if len(si):
            reward[si] = -10.0
            rock = self.rock_at[x[si], y[si]]
            on_rock = rock >= 0
            si_on = si[on_rock]
            ri = rock[on_rock]
            was_good = rocks[si_on, ri]
            reward[si_on[was_good]] = 10.0
            rocks[si_on[was_good], ri[was_good]] = False
        return reward

    def _agent_reading(self, x, y, op, departed, rocks, u):
        """Sensor reading per row: GOOD/BAD for checks, NULL otherwise."""
        reading = np.full(len(x), NULL, dtype=np.int64)
        check = ~departed & (op >= 5)
        ci = np.flatnonzero(check)
        if len(ci):
            rock = op[ci] - 5
            d = np.sqrt(
                (x[ci] - self.rock_x[rock]) ** 2.0 + (y[ci] - self.rock_y[rock]) ** 2.0
            )
            acc = self.check_accuracy(d)
            correct = u[ci] < acc
            truth = rocks[ci, rock]
            is_good = truth == correct  # correct reading reports the truth
            reading[ci] = np.where(is_good, GOOD, BAD)
        return reading

    def step_batch(self, states: MarsStates, actions, rng: BoundRng) -> StepResult:
        check_step_inputs(self.spec, states, actions)
        actions = np.asarray(actions, dtype=np.int64)
        n = len(states)
        op = np.stack([actions // self.per_agent_ops, actions % self.per_agent_ops], axis=1)
        x = states.x.copy()
        y = states.y.copy()
        rocks = states.rocks.copy()
        departed = states.x == self.n

        rewards = np.zeros(n)
        for k in (0, 1):
            rewards += self._agent_move(x[:, k], y[:, k], op[:, k], departed[:, k])
        # agent 0 samples before agent 1: a shared good rock pays out once
        for k in (0, 1):
            rewards += self._agent_sample(x[:, k], y[:, k], op[:, k], departed[:, k], rocks)
        readings = [
            self._agent_reading(
                x[:, k], y[:, k], op[:, k], departed[:, k], rocks,
                rng.derive(k).uniform(),
            )
            for k in (0, 1)
        ]
        obs = readings[0] * 3 + readings[1]

        next_terminal = states.terminal | ((x[:, 0] == self.n) & (x[:, 1] == self.n))
        obs[next_terminal] = self.spec.terminal_obs

        absorbing = states.terminal
        if np.any(absorbing):
            x[absorbing] = states.x[absorbing]
            y[absorbing] = states.y[absorbing]
            rocks[absorbing] = states.rocks[absorbing]
            rewards[absorbing] = 0.0
        return StepResult(MarsStates(x, y, rocks, next_terminal), obs, rewards)

    def observation_log_likelihood(
        self, next_states: MarsStates, action: int, observation: int
    ) -> np.ndarray:
        if not 0 <= observation <= self.spec.terminal_obs:
            raise ValueError("invalid observation code")
        n = len(next_states)
        out = np.full(n, -np.inf)
        term = next_states.terminal
        if observation == self.spec.terminal_obs:
            out[term] = 0.0
            return out
        ops = (action // self.per_agent_ops, action % self.per_agent_ops)
        want = (observation // 3, observation % 3)
        log_p = np.zeros(n)
        for k in (0, 1):
            op = ops[k]
            departed = next_states.x[:, k] == self.n
            checking = ~departed & (op >= 5)
            p = np.zeros(n)
            if op >= 5:
                rock = op - 5
                d = np.sqrt(
                    (next_states.x[:, k] - self.rock_x[rock]) ** 2.0
                    + (next_states.y[:, k] - self.rock_y[rock]) ** 2.0
                )
                acc = self.check_accuracy(d)
                good = next_states.rocks[:, rock]
                if want[k] == GOOD:
                    p = np.where(good, acc, 1.0 - acc)
                elif want[k] == BAD:
                    p = np.where(good, 1.0 - acc, acc)
                else:
                    p = np.zeros(n)
                p = np.where(checking, p, 1.0 if want[k] == NULL else 0.0)
            else:
                p = np.full(n, 1.0 if want[k] == NULL else 0.0)
            with np.errstate(divide="ignore"):
                log_p += np.log(p)
        out[~term] = log_p[~term]
        return out

    def value_heuristic(self, states: MarsStates) -> np.ndarray:
        """Discounted potential: exit bonus per active agent plus, for every
        still-good rock, its payout discounted by the nearer agent's
        Manhattan distance."""
        g = self.spec.discount
        n = len(states)
        h = np.zeros(n)
        active = states.x < self.n
        for k in (0, 1):
            d_exit = (self.n - states.x[:, k] - 1).astype(np.float64)
            h += np.where(active[:, k], 10.0 * g**d_exit, 0.0)
        dist = np.abs(states.x[:, :, None] - self.rock_x[None, None, :]) + np.abs(
            states.y[:, :, None] - self.rock_y[None, None, :]
        )
        dist = np.where(active[:, :, None], dist, np.iinfo(np.int64).max // 2)
        nearest = dist.min(axis=1).astype(np.float64)
        any_active = active.any(axis=1)
        rock_term = (states.rocks * 10.0 * g**nearest).sum(axis=1)
        h += np.where(any_active, rock_term, 0.0)
        h[states.terminal] = 0.0
        return h

    def step_metrics(self, states: MarsStates, action: int, result: StepResult):
        ops = (action // self.per_agent_ops, action % self.per_agent_ops)
        good = bad = 0
        rocks = states.rocks[0].copy()
        for k in (0, 1):
            if ops[k] == _SAMPLE and states.x[0, k] < self.n and not states.terminal[0]:
                rock = self.rock_at[states.x[0, k], states.y[0, k]]
                if rock >= 0 and rocks[rock]:
                    good += 1
                    rocks[rock] = False
                else:
                    bad += 1
        return {"rocks_good": float(good), "rocks_bad": float(bad)}
