"""Contracts every planning problem must satisfy.

A problem is described by a :class:`ProblemSpec` (sizes, discount, episode
cap) and a :class:`ProblemModel` (batched generative stepping, observation
likelihoods, initial-state sampling, leaf heuristics, reference policy).
State batches are columnar: one array per field, all of equal length, plus
a boolean ``terminal`` column.

Terminal handling follows the absorbing convention: once a row is terminal
it stays terminal, steps in place with reward exactly 0, and emits the
reserved ``terminal_obs`` code.  Transitions that *enter* a terminal state
also emit ``terminal_obs`` (the code marks termination itself, not just the
absorbing self-loop), so terminal rows carry probability one on that code
and observation likelihoods stay normalized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from .rng import BoundRng, RowRng

ROOT_SENTINEL = -1


@dataclass(frozen=True)
class ProblemSpec:
    """Sizes and episode constants of one problem instance."""

    name: str
    action_count: int
    observation_arity: int
    discount: float
    max_steps: int

    def __post_init__(self):
        if self.action_count < 1:
            raise ValueError("action_count must be >= 1")
        if self.observation_arity < 1:
            raise ValueError("observation_arity must be >= 1")
        if not 0.0 < self.discount < 1.0:
            raise ValueError("discount must lie in (0, 1)")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")

    @property
    def terminal_obs(self) -> int:
        """Reserved code, one past the regular observation space."""
        return self.observation_arity


@runtime_checkable
class StateBatch(Protocol):
    """Columnar storage of n problem-specific state records."""

    terminal: np.ndarray

    def __len__(self) -> int: ...

    def take(self, indices) -> "StateBatch": ...


@dataclass
class StepResult:
    next_states: StateBatch
    observations: np.ndarray
    rewards: np.ndarray


def check_step_inputs(spec: ProblemSpec, states: StateBatch, actions: np.ndarray):
    """Raise on the contract violations shared by all step implementations."""
    actions = np.asarray(actions)
    if len(actions) != len(states):
        raise ValueError(
            f"batch-length mismatch: {len(states)} states vs {len(actions)} actions"
        )
    if actions.size and (actions.min() < 0 or actions.max() >= spec.action_count):
        raise ValueError("invalid action id in batch")


class ProblemModel:
    """Batched generative interface; immutable after construction.

    Subclasses implement ``step_batch``, ``observation_log_likelihood`` and
    ``sample_initial_states``; the remaining methods have defaults (zero
    heuristic, uniform reference policy, no-op belief reconciliation).
    """

    spec: ProblemSpec

    def step_batch(self, states: StateBatch, actions, rng: BoundRng) -> StepResult:
        raise NotImplementedError

    def observation_log_likelihood(
        self, next_states: StateBatch, action: int, observation: int
    ) -> np.ndarray:
        raise NotImplementedError

    def sample_initial_states(self, n: int, rng: RowRng) -> StateBatch:
        raise NotImplementedError

    def value_heuristic(self, states: StateBatch) -> np.ndarray:
        """Leaf value estimates; must be exactly 0 on terminal rows."""
        return np.zeros(len(states))

    def reference_log_probs(self) -> np.ndarray:
        """log pi0 per action; uniform unless overridden."""
        n = self.spec.action_count
        return np.full(n, -np.log(n))

    def reference_log_prob(self, action: int) -> float:
        if not 0 <= action < self.spec.action_count:
            raise ValueError("invalid action id")
        return float(self.reference_log_probs()[action])

    def refresh_executed(self, executed: StateBatch) -> StateBatch:
        """Per-step bookkeeping on the true environment state (width 1).

        Called after each executed, non-terminal step, before the belief is
        reconciled against the result.  The default is the identity.
        """
        return executed

    def reconcile_belief(
        self, particles: StateBatch, executed: StateBatch
    ) -> StateBatch:
        """Overwrite the observable part of belief particles after a real step.

        ``executed`` is the width-1 batch holding the true environment state.
        The default keeps particles untouched; problems with an observable
        state component override this.
        """
        return particles

    def step_metrics(
        self, states: StateBatch, action: int, result: StepResult
    ) -> dict[str, float]:
        """Problem-specific counters for one executed (width-1) step."""
        return {}
