"""Robot navigation through a reactive crowd.

The robot crosses a 50 x 40 m hall from the southern to the northern border
in 1 m moves, among 300 people whose positions are fully observable but
whose dispositions are hidden: curious people drift toward a nearby robot,
shy people back away, and a YELL drives everyone nearby back fast.  Every
person jitters with Gaussian noise each step.  The robot's observation is
a bit per tracked person (the six nearest when the step was executed)
telling whether that person closed distance; traits must be inferred from
those bits.

One planning step corresponds to one second, so the stated velocities are
applied as meters per step.  The observation is a deterministic function of
the successor state, so states carry the code they emitted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ProblemModel, ProblemSpec, StepResult, check_step_inputs
from ..rng import BoundRng, RowRng

NORTH, EAST, SOUTH, WEST, YELL = range(5)
_DIRS = np.array(
    [(0.0, 1.0), (1.0, 0.0), (0.0, -1.0), (-1.0, 0.0), (0.0, 0.0)]
)


@dataclass
class CrowdStates:
    robot: np.ndarray        # (n, 2) meters
    persons: np.ndarray      # (n, p, 2) float32 meters
    curious: np.ndarray      # (n, p) bool
    tracked: np.ndarray      # (n, k) person indices watched by the sensor
    prev_dist: np.ndarray    # (n, k) distances at the previous step
    last_code: np.ndarray    # (n,) observation emitted on entry to this state
    terminal: np.ndarray

    def __len__(self) -> int:
        return len(self.robot)

    def take(self, indices) -> "CrowdStates":
        idx = np.asarray(indices, dtype=np.int64)
        return CrowdStates(
            self.robot[idx], self.persons[idx], self.curious[idx],
            self.tracked[idx], self.prev_dist[idx], self.last_code[idx],
            self.terminal[idx],
        )


class CrowdNavModel(ProblemModel):
    def __init__(
        self,
        p_curious: float = 0.5,
        n_people: int = 300,
        n_tracked: int = 6,
        hall_width: float = 50.0,
        hall_depth: float = 40.0,
        motion_noise: float = 0.05,
        react_prob: float = 0.9,
        r_nearby: float = 4.0,
        v_curious: float = 0.3,
        v_shy: float = 0.8,
        v_back: float = 2.0,
        collision_radius: float = 0.5,
        discount: float = 0.97,
        max_steps: int = 200,
    ):
        if not 0.0 <= p_curious <= 1.0:
            raise ValueError("p_curious must be in [0, 1]")
        self.p_curious = p_curious
        self.n_people = n_people
        self.n_tracked = n_tracked
        self.hall = np.array([hall_width, hall_depth])
        self.motion_noise = motion_noise
        self.react_prob = react_prob
        self.r_nearby = r_nearby
        self.v_curious = v_curious
        self.v_shy = v_shy
        self.v_back = v_back
        self.collision_radius = collision_radius
        self.spec = ProblemSpec(
            name="crowdnav",
            action_count=5,
            observation_arity=2**n_tracked,
            discount=discount,
            max_steps=max_steps,
        )

    def _tracked_distances(self, robot, persons, tracked) -> np.ndarray:
        picked = np.take_along_axis(persons, tracked[:, :, None], axis=1)
        diff = picked.astype(np.float64) - robot[:, None, :]
        return np.sqrt((diff**2).sum(axis=2))

    def sample_initial_states(self, n: int, rng: RowRng) -> CrowdStates:
        if n < 1:
            raise ValueError("n must be >= 1")
        rows = np.arange(n, dtype=np.int64)
        robot = np.tile(np.array([self.hall[0] / 2.0, 0.0]), (n, 1))
        u = rng.derive(0).uniform(rows, self.n_people * 2)
        persons = (u.reshape(n, self.n_people, 2) * self.hall).astype(np.float32)
        curious = rng.derive(1).uniform(rows, self.n_people) < self.p_curious
        dist = np.sqrt(
            ((persons.astype(np.float64) - robot[:, None, :]) ** 2).sum(axis=2)
        )
        tracked = np.argsort(dist, axis=1)[:, : self.n_tracked].astype(np.int64)
        prev = np.take_along_axis(dist, tracked, axis=1)
        return CrowdStates(
            robot, persons, curious, tracked, prev,
            np.zeros(n, dtype=np.int64), np.zeros(n, dtype=bool),
        )

    def step_batch(self, states: CrowdStates, actions, rng: BoundRng) -> StepResult:
        check_step_inputs(self.spec, states, actions)
        actions = np.asarray(actions, dtype=np.int64)
        n = len(states)
        p = self.n_people

        new_robot = states.robot + _DIRS[actions]
        entered = new_robot[:, 1] >= self.hall[1]
        new_robot[:, 0] = np.clip(new_robot[:, 0], 0.0, self.hall[0])
        new_robot[:, 1] = np.clip(new_robot[:, 1], 0.0, self.hall[1])

        noise = rng.derive(0).normal(p * 2).reshape(n, p, 2) * self.motion_noise
        persons = states.persons.astype(np.float64) + noise
        diff = new_robot[:, None, :] - persons
        dist = np.sqrt((diff**2).sum(axis=2))
        reacts = (
            (dist < self.r_nearby)
            & (dist > 1e-9)
            & (rng.derive(1).uniform(p) < self.react_prob)
        )
        direction = diff / np.maximum(dist, 1e-9)[:, :, None]
        speed = np.where(states.curious, self.v_curious, -self.v_shy)
        if np.any(actions == YELL):
            speed = np.where((actions == YELL)[:, None], -self.v_back, speed)
        persons += reacts[:, :, None] * speed[:, :, None] * direction
        np.clip(persons[:, :, 0], 0.0, self.hall[0], out=persons[:, :, 0])
        np.clip(persons[:, :, 1], 0.0, self.hall[1], out=persons[:, :, 1])
        persons = persons.astype(np.float32)

        new_dist = np.sqrt(
            ((persons.astype(np.float64) - new_robot[:, None, :]) ** 2).sum(axis=2)
        )
        bumped = (new_dist < self.collision_radius).any(axis=1)

        rewards = np.full(n, -1.0)
        rewards -= 25.0 * (actions == YELL)
        rewards -= 200.0 * bumped
        rewards += 1000.0 * entered

        tracked_dist = np.take_along_axis(new_dist, states.tracked, axis=1)
        closed = tracked_dist < states.prev_dist
        code = closed @ (1 << np.arange(self.n_tracked, dtype=np.int64))
        code = code.astype(np.int64)

        next_terminal = states.terminal | entered
        obs = np.where(next_terminal, self.spec.terminal_obs, code)

        next_states = CrowdStates(
            new_robot, persons, states.curious.copy(), states.tracked.copy(),
            tracked_dist, code, next_terminal,
        )
        absorbing = states.terminal
        if np.any(absorbing):
            next_states.robot[absorbing] = states.robot[absorbing]
            next_states.persons[absorbing] = states.persons[absorbing]
            next_states.prev_dist[absorbing] = states.prev_dist[absorbing]
            next_states.last_code[absorbing] = states.last_code[absorbing]
            rewards[absorbing] = 0.0
        return StepResult(next_states, obs, rewards)

    def observation_log_likelihood(
        self, next_states: CrowdStates, action: int, observation: int
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
            out[live & (next_states.last_code == observation)] = 0.0
        return out

    def value_heuristic(self, states: CrowdStates) -> np.ndarray:
        g = self.spec.discount
        moves = np.maximum(np.ceil(self.hall[1] - states.robot[:, 1]) - 1.0, 0.0)
        decay = g**moves
        h = 1000.0 * decay - (1.0 - decay) / (1.0 - g)
        h[states.terminal] = 0.0
        return h

    def refresh_executed(self, executed: CrowdStates) -> CrowdStates:
        """Re-select the tracked persons after a real step."""
        dist = np.sqrt(
            (
                (executed.persons.astype(np.float64) - executed.robot[:, None, :]) ** 2
            ).sum(axis=2)
        )
        tracked = np.argsort(dist, axis=1)[:, : self.n_tracked].astype(np.int64)
        prev = np.take_along_axis(dist, tracked, axis=1)
        return CrowdStates(
            executed.robot, executed.persons, executed.curious, tracked, prev,
            executed.last_code, executed.terminal,
        )

    def reconcile_belief(self, particles: CrowdStates, executed: CrowdStates) -> CrowdStates:
        """Copy the observable component (everything but traits) into particles."""
        n = len(particles)
        return CrowdStates(
            np.repeat(executed.robot, n, axis=0),
            np.repeat(executed.persons, n, axis=0),
            particles.curious,
            np.repeat(executed.tracked, n, axis=0),
            np.repeat(executed.prev_dist, n, axis=0),
            np.repeat(executed.last_code, n, axis=0),
            np.repeat(executed.terminal, n, axis=0),
        )

    def step_metrics(self, states: CrowdStates, action: int, result: StepResult):
        moved = float(np.linalg.norm(result.next_states.robot[0] - states.robot[0]))
        nearest = np.sqrt(
            (
                (
                    result.next_states.persons[0].astype(np.float64)
                    - result.next_states.robot[0]
                )
                ** 2
            ).sum(axis=1)
        ).min()
        return {
            "path_length": moved,
            "yells": float(action == YELL),
            "bumps": float(nearest < self.collision_radius),
        }
