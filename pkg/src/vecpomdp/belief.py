"""Weighted particle beliefs and the SIR update between planning steps."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ProblemModel, StateBatch
from .rng import RowRng

_SITE_RESAMPLE = 97


@dataclass
class ParticleBelief:
    """A weighted particle set; weights are kept normalized."""

    states: StateBatch
    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if len(self.weights) != len(self.states) or len(self.weights) < 1:
            raise ValueError("weights must match particle count and be non-empty")
        if abs(self.weights.sum() - 1.0) > 1e-9 or self.weights.min() < 0:
            raise ValueError("weights must be non-negative and sum to 1")

    def __len__(self) -> int:
        return len(self.weights)

    @classmethod
    def from_model(cls, model: ProblemModel, m: int, rng: RowRng) -> "ParticleBelief":
        states = model.sample_initial_states(m, rng)
        return cls(states, np.full(m, 1.0 / m))

    def sample_states(self, n: int, rng: RowRng) -> StateBatch:
        """n draws with replacement proportional to the weights."""
        if n < 1:
            raise ValueError("n must be >= 1")
        u = rng.uniform(np.arange(n, dtype=np.int64))
        cum = np.cumsum(self.weights)
        idx = np.minimum(np.searchsorted(cum, u, side="right"), len(cum) - 1)
        return self.states.take(idx)


def systematic_resample(weights: np.ndarray, m: int, u0: float) -> np.ndarray:
    """Low-variance resampling: m evenly spaced quantiles offset by u0."""
    weights = np.asarray(weights, dtype=np.float64)
    positions = (np.arange(m, dtype=np.float64) + u0) / m
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return np.searchsorted(cum, positions, side="right").astype(np.int64)


@dataclass
class SirUpdate:
    belief: ParticleBelief
    retries: int
    degenerate: bool


def sir_update(
    belief: ParticleBelief,
    model: ProblemModel,
    action: int,
    observation: int,
    rng: RowRng,
    max_retries: int = 3,
) -> SirUpdate:
    """Propagate, reweight by the observation likelihood, resample to uniform.

    On total weight collapse (no particle explains the observation) the
    propagate-reweight step is retried with fresh noise up to ``max_retries``
    times; if all fail, the propagated particles are kept unweighted and the
    update is flagged degenerate.
    """
    m = len(belief)
    actions = np.full(m, action, dtype=np.int64)
    rows = np.arange(m, dtype=np.int64)
    retries = 0
    degenerate = False
    while True:
        result = model.step_batch(belief.states, actions, rng.derive(retries).bind(rows))
        log_lik = model.observation_log_likelihood(result.next_states, action, observation)
        with np.errstate(divide="ignore"):
            log_w = np.log(belief.weights) + log_lik
        finite = log_w > -np.inf
        if np.any(finite):
            shifted = np.exp(log_w - log_w[finite].max())
            new_weights = shifted / shifted.sum()
            break
        retries += 1
        if retries > max_retries:
            degenerate = True
            new_weights = np.full(m, 1.0 / m)
            break
    idx = systematic_resample(
        new_weights, m, rng.derive(_SITE_RESAMPLE).uniform1()
    )
    resampled = ParticleBelief(result.next_states.take(idx), np.full(m, 1.0 / m))
    return SirUpdate(resampled, retries, degenerate)
