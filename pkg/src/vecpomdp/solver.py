"""The per-step planning loop and the episode runner.

Each planning step builds a fresh tree and repeats {sample a batch of
initial states from the belief, search to the current depth target, back
up preferences, deepen} until the budget runs out; the root's best
preference entry gives the executed action.  The episode runner alternates
planning, a step of the held-out true environment state, and the SIR
belief update until termination or the step cap.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .backup import backup
from .belief import ParticleBelief, sir_update
from .core import ProblemModel
from .rng import RowRng
from .search import LeafResult, SearchBatch, search
from .tree import BeliefTree, init_tree

_NS_ENV = 0
_NS_PLAN = 1
_NS_SIR = 2
_NS_INIT_BELIEF = 3
_SITE_DRAW = 0
_SITE_SEARCH = 1


@dataclass(frozen=True)
class SolverConfig:
    """Planner parameters; exactly one of the two budgets must be set."""

    eta: float = 2.0
    n_parallel: int = 1024
    planning_seconds: float | None = None
    iterations: int | None = None
    d_max_cap: int = 90
    seed: int = 0
    particles: int = 10_000
    max_sir_retries: int = 3

    def __post_init__(self):
        if self.eta <= 0:
            raise ValueError("eta must be positive")
        if self.n_parallel < 1:
            raise ValueError("n_parallel must be >= 1")
        if self.d_max_cap < 1:
            raise ValueError("d_max_cap must be >= 1")
        if (self.planning_seconds is None) == (self.iterations is None):
            raise ValueError("set exactly one of planning_seconds / iterations")
        if self.planning_seconds is not None and self.planning_seconds <= 0:
            raise ValueError("planning_seconds must be positive")
        if self.iterations is not None and self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.particles < 1:
            raise ValueError("particles must be >= 1")


@dataclass
class PlanOutcome:
    chosen_action: int
    iterations_run: int
    final_d_max: int
    tree_stats: dict[str, int]
    tree: BeliefTree = field(repr=False, default=None)


def _initial_prefs(model: ProblemModel, eta: float) -> np.ndarray | None:
    ref = model.reference_log_probs()
    if np.allclose(ref, ref[0]):
        return None  # uniform reference: zero rows
    return ref / eta


def plan(
    belief: ParticleBelief,
    model: ProblemModel,
    config: SolverConfig,
    rng: RowRng,
) -> PlanOutcome:
    """One planning step: iterative-deepening search/backup, then argmax.

    The first iteration always runs to completion regardless of budget;
    ties at the root break toward the lowest action id.
    """
    spec = model.spec
    tree = init_tree(spec, _initial_prefs(model, config.eta))
    d_max = 1
    iterations = 0
    final_d_max = 0
    started = time.perf_counter()
    while True:
        it_rng = rng.derive(iterations)
        states = belief.sample_states(config.n_parallel, it_rng.derive(_SITE_DRAW))
        batch = SearchBatch(
            np.zeros(config.n_parallel, dtype=np.int64), states, depth=0
        )
        leaves = search(tree, model, batch, d_max, config.eta, it_rng.derive(_SITE_SEARCH))
        backup(tree, leaves, d_max, config.eta, spec.discount)
        iterations += 1
        final_d_max = d_max
        if config.iterations is not None:
            if iterations >= config.iterations:
                break
        elif time.perf_counter() - started >= config.planning_seconds:
            break
        d_max = min(d_max + 1, config.d_max_cap)
    chosen = int(np.argmax(tree.prefs[0]))
    return PlanOutcome(chosen, iterations, final_d_max, tree.stats(), tree)


@dataclass
class RunRecord:
    """One benchmark episode's outcome."""

    run_index: int
    seed: int
    discounted_return: float
    steps: int
    terminal_reason: str
    plan_wall_times: list[float]
    counters: dict[str, float]
    degenerate_updates: int


def run_episode(
    model: ProblemModel,
    config: SolverConfig,
    seed: int,
    run_index: int = 0,
) -> RunRecord:
    """Plan / execute / filter until termination or the episode cap."""
    spec = model.spec
    root = RowRng.from_seed(seed)
    env_rng = root.derive(_NS_ENV)
    env_state = model.sample_initial_states(1, env_rng.derive(0))
    belief = ParticleBelief.from_model(model, config.particles, root.derive(_NS_INIT_BELIEF))
    belief = ParticleBelief(
        model.reconcile_belief(belief.states, env_state), belief.weights
    )

    total = 0.0
    counters: dict[str, float] = {}
    plan_times: list[float] = []
    degenerate = 0
    t = 0
    reason = "truncated"
    while t < spec.max_steps:
        t0 = time.perf_counter()
        outcome = plan(belief, model, config, root.derive(_NS_PLAN, t))
        plan_times.append(time.perf_counter() - t0)
        a = outcome.chosen_action

        result = model.step_batch(
            env_state, np.array([a], dtype=np.int64), env_rng.derive(1 + t).bind([0])
        )
        total += spec.discount**t * float(result.rewards[0])
        for key, val in model.step_metrics(env_state, a, result).items():
            counters[key] = counters.get(key, 0.0) + float(val)
        env_state = result.next_states
        t += 1
        if bool(env_state.terminal[0]):
            reason = "terminal"
            break

        update = sir_update(
            belief,
            model,
            a,
            int(result.observations[0]),
            root.derive(_NS_SIR, t),
            max_retries=config.max_sir_retries,
        )
        degenerate += int(update.degenerate)
        env_state = model.refresh_executed(env_state)
        belief = ParticleBelief(
            model.reconcile_belief(update.belief.states, env_state),
            update.belief.weights,
        )

    return RunRecord(
        run_index=run_index,
        seed=seed,
        discounted_return=total,
        steps=t,
        terminal_reason=reason,
        plan_wall_times=plan_times,
        counters=counters,
        degenerate_updates=degenerate,
    )
