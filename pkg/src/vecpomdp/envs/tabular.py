"""Batched models for small enumerable POMDPs, plus the Tiger fixture.

A :class:`TabularPOMDP` holds explicit transition, observation and reward
matrices.  :class:`TabularModel` wraps one as a batched generative model so
the same matrices drive both the planner and the exact oracles used in
tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import ProblemModel, ProblemSpec, StateBatch, StepResult, check_step_inputs
from ..rng import BoundRng, RowRng


@dataclass(frozen=True)
class TabularPOMDP:
    """Explicit matrices: T[a, s, s'], Z[a, s', o], R[s, a]."""

    transitions: np.ndarray
    observations: np.ndarray
    rewards: np.ndarray
    initial_belief: np.ndarray
    discount: float
    terminal_states: np.ndarray
    name: str = "tabular"
    max_steps: int = 100

    def __post_init__(self):
        t = np.asarray(self.transitions, dtype=np.float64)
        z = np.asarray(self.observations, dtype=np.float64)
        r = np.asarray(self.rewards, dtype=np.float64)
        b0 = np.asarray(self.initial_belief, dtype=np.float64)
        term = np.asarray(self.terminal_states, dtype=bool)
        a, s, s2 = t.shape
        if s != s2 or z.shape[0] != a or z.shape[1] != s or r.shape != (s, a):
            raise ValueError("inconsistent matrix shapes")
        if not np.allclose(t.sum(axis=2), 1.0, atol=1e-9):
            raise ValueError("transition rows must sum to 1")
        if not np.allclose(z.sum(axis=2), 1.0, atol=1e-9):
            raise ValueError("observation rows must sum to 1")
        if abs(b0.sum() - 1.0) > 1e-9 or b0.shape != (s,):
            raise ValueError("initial belief must be a distribution over states")
        object.__setattr__(self, "transitions", t)
        object.__setattr__(self, "observations", z)
        object.__setattr__(self, "rewards", r)
        object.__setattr__(self, "initial_belief", b0)
        object.__setattr__(self, "terminal_states", term)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[0]

    @property
    def n_observations(self) -> int:
        return self.observations.shape[2]


@dataclass
class TabularStates:
    idx: np.ndarray
    terminal: np.ndarray

    def __len__(self) -> int:
        return len(self.idx)

    def take(self, indices) -> "TabularStates":
        indices = np.asarray(indices, dtype=np.int64)
        return TabularStates(self.idx[indices], self.terminal[indices])


class TabularModel(ProblemModel):
    def __init__(self, pomdp: TabularPOMDP):
        self.pomdp = pomdp
        self.spec = ProblemSpec(
            name=pomdp.name,
            action_count=pomdp.n_actions,
            observation_arity=pomdp.n_observations,
            discount=pomdp.discount,
            max_steps=pomdp.max_steps,
        )
        self._cum_t = np.cumsum(pomdp.transitions, axis=2)
        self._cum_z = np.cumsum(pomdp.observations, axis=2)
        with np.errstate(divide="ignore"):
            self._log_z = np.log(pomdp.observations)

    def states_from_indices(self, idx) -> TabularStates:
        idx = np.asarray(idx, dtype=np.int64)
        return TabularStates(idx, self.pomdp.terminal_states[idx])

    def sample_initial_states(self, n: int, rng: RowRng) -> TabularStates:
        if n < 1:
            raise ValueError("n must be >= 1")
        u = rng.uniform(np.arange(n, dtype=np.int64))
        cum = np.cumsum(self.pomdp.initial_belief)
        idx = np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)
        return self.states_from_indices(idx)

    def step_batch(self, states: TabularStates, actions, rng: BoundRng) -> StepResult:
        check_step_inputs(self.spec, states, actions)
        actions = np.asarray(actions, dtype=np.int64)
        n = len(states)
        s = states.idx

        u_next = rng.derive(0).uniform()
        cum_rows = self._cum_t[actions, s]
        next_idx = (cum_rows < u_next[:, None]).sum(axis=1)
        next_idx = np.minimum(next_idx, self.pomdp.n_states - 1)

        u_obs = rng.derive(1).uniform()
        cum_obs = self._cum_z[actions, next_idx]
        obs = (cum_obs < u_obs[:, None]).sum(axis=1)
        obs = np.minimum(obs, self.pomdp.n_observations - 1).astype(np.int64)

        rewards = self.pomdp.rewards[s, actions].astype(np.float64)

        next_terminal = self.pomdp.terminal_states[next_idx] | states.terminal
        obs[next_terminal] = self.spec.terminal_obs
        # absorbing rows: stay in place with zero reward
        absorbing = states.terminal
        next_idx = np.where(absorbing, s, next_idx)
        rewards[absorbing] = 0.0
        return StepResult(TabularStates(next_idx, next_terminal), obs, rewards)

    def observation_log_likelihood(
        self, next_states: TabularStates, action: int, observation: int
    ) -> np.ndarray:
        if not 0 <= observation <= self.spec.terminal_obs:
            raise ValueError("invalid observation code")
        n = len(next_states)
        out = np.full(n, -np.inf)
        term = next_states.terminal
        if observation == self.spec.terminal_obs:
            out[term] = 0.0
        else:
            live = ~term
            out[live] = self._log_z[action, next_states.idx[live], observation]
        return out


def tiger_model(
    listen_accuracy: float = 0.85,
    reward_open_correct: float = 10.0,
    reward_open_wrong: float = -100.0,
    reward_listen: float = -1.0,
    discount: float = 0.95,
    max_steps: int = 100,
) -> TabularModel:
    """The classic two-door test fixture.

    States: 0 = tiger behind the left door, 1 = tiger right, 2 = done.
    Actions: 0 = listen, 1 = open left, 2 = open right.
    Observations: 0 = hear left, 1 = hear right.  Opening the door without
    the tiger pays ``reward_open_correct``; the other one pays
    ``reward_open_wrong``; either ends the episode.
    """
    acc = listen_accuracy
    t = np.zeros((3, 3, 3))
    t[0] = np.eye(3)  # listen keeps the state
    t[1, :, 2] = 1.0  # open left -> done
    t[2, :, 2] = 1.0  # open right -> done
    z = np.zeros((3, 3, 2))
    z[0, 0] = (acc, 1 - acc)
    z[0, 1] = (1 - acc, acc)
    z[0, 2] = (0.5, 0.5)
    z[1:, :, :] = 0.5  # openings carry no information
    r = np.zeros((3, 3))
    r[0, 0] = r[1, 0] = reward_listen
    r[0, 1] = reward_open_wrong   # tiger left, open left
    r[0, 2] = reward_open_correct
    r[1, 1] = reward_open_correct
    r[1, 2] = reward_open_wrong
    pomdp = TabularPOMDP(
        transitions=t,
        observations=z,
        rewards=r,
        initial_belief=np.array([0.5, 0.5, 0.0]),
        discount=discount,
        terminal_states=np.array([False, False, True]),
        name="tiger",
        max_steps=max_steps,
    )
    return TabularModel(pomdp)
