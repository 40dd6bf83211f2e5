"""CartPole (classic-control v1 dynamics) and a deterministic k-armed bandit."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

TRAJECTORY_COLUMNS = ["step", "x", "x_dot", "theta", "theta_dot", "action", "reward", "done"]


@dataclass(frozen=True)
class CartPoleParams:
    gravity: float = 9.8
    cart_mass: float = 1.0
    pole_mass: float = 0.1
    half_pole_length: float = 0.5
    force_magnitude: float = 10.0
    tau: float = 0.02
    x_threshold: float = 2.4
    theta_threshold: float = 12 * 2 * math.pi / 360
    max_episode_steps: int = 500

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")


class CartPoleState(NamedTuple):
    x: float
    x_dot: float
    theta: float
    theta_dot: float


class StepResult(NamedTuple):
    next_state: CartPoleState
    reward: float
    done: bool
    truncated: bool


def cartpole_dynamics(state, force: float, params: CartPoleParams = CartPoleParams()) -> CartPoleState:
    """One explicit-Euler step under a horizontal ``force`` (N).

    Positions advance with the *old* velocities.  Taking a raw force rather
    than an action index lets tests drive the zero-force fixed point.
    """
    x, x_dot, theta, theta_dot = state
    total_mass = params.cart_mass + params.pole_mass
    pml = params.pole_mass * params.half_pole_length
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    temp = (force + pml * theta_dot * theta_dot * sin_t) / total_mass
    theta_acc = (params.gravity * sin_t - cos_t * temp) / (
        params.half_pole_length * (4.0 / 3.0 - params.pole_mass * cos_t * cos_t / total_mass)
    )
    x_acc = temp - pml * theta_acc * cos_t / total_mass
    tau = params.tau
    return CartPoleState(
        x + tau * x_dot,
        x_dot + tau * x_acc,
        theta + tau * theta_dot,
        theta_dot + tau * theta_acc,
    )


class CartPole:
    """Seeded CartPole with a 500-step time limit (``truncated``, not ``done``)."""

    n_actions = 2
    state_dim = 4

    def __init__(self, params: CartPoleParams | None = None):
        self.params = params or CartPoleParams()
        self.state: CartPoleState | None = None
        self.steps = 0
        self._terminal = True

    def reset(self, rng: np.random.Generator) -> CartPoleState:
        self.state = CartPoleState(*(float(v) for v in rng.uniform(-0.05, 0.05, size=4)))
        self.steps = 0
        self._terminal = False
        return self.state

    def step(self, action: int) -> StepResult:
        if self._terminal:
            raise RuntimeError("step() on a terminal or un-reset episode; call reset()")
        result = cartpole_step(self.state, action, self.params, self.steps)
        self.steps += 1
        self.state = result.next_state
        self._terminal = result.done or result.truncated
        return result


def cartpole_step(state, action: int, params: CartPoleParams = CartPoleParams(),
                  steps_taken: int = 0) -> StepResult:
    """Pure transition: push left (0) or right (1) from ``state``.

    ``steps_taken`` counts steps before this one and only feeds truncation.
    """
    if action not in (0, 1):
        raise ValueError(f"action must be 0 (left) or 1 (right), got {action!r}")
    force = params.force_magnitude if action == 1 else -params.force_magnitude
    s = cartpole_dynamics(state, force, params)
    done = abs(s.x) > params.x_threshold or abs(s.theta) > params.theta_threshold
    truncated = not done and steps_taken + 1 >= params.max_episode_steps
    return StepResult(s, 1.0, done, truncated)


def rollout(env: CartPole, rng: np.random.Generator, actions) -> list[dict]:
    """Reset, then play ``actions`` until the list or the episode ends.

    Rows follow :data:`TRAJECTORY_COLUMNS`; row 0 is the reset state.
    """
    s = env.reset(rng)
    rows = [dict(step=0, x=s.x, x_dot=s.x_dot, theta=s.theta, theta_dot=s.theta_dot,
                 action="", reward="", done=False)]
    for t, a in enumerate(actions, start=1):
        res = env.step(int(a))
        ns = res.next_state
        rows.append(dict(step=t, x=ns.x, x_dot=ns.x_dot, theta=ns.theta, theta_dot=ns.theta_dot,
                         action=int(a), reward=res.reward, done=res.done))
        if res.done or res.truncated:
            break
    return rows


def write_trajectory_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=TRAJECTORY_COLUMNS)
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def read_trajectory_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            rows.append(dict(
                step=int(raw["step"]),
                x=float(raw["x"]), x_dot=float(raw["x_dot"]),
                theta=float(raw["theta"]), theta_dot=float(raw["theta_dot"]),
                action=int(raw["action"]) if raw["action"] else None,
                reward=float(raw["reward"]) if raw["reward"] else None,
                done=raw["done"] == "True",
            ))
    return rows


@dataclass
class BanditSpec:
    arm_rewards: list[float] = field(default_factory=lambda: [1.0, 2.0])
    noise_sigma: float = 0.0

    def __post_init__(self):
        if len(self.arm_rewards) < 2:
            raise ValueError("a bandit needs at least 2 arms")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")

    @property
    def n_arms(self) -> int:
        return len(self.arm_rewards)


def bandit_pull(spec: BanditSpec, arm: int, rng: np.random.Generator | None = None) -> float:
    """Reward of ``arm``; adds N(0, noise_sigma^2) noise when noise_sigma > 0."""
    if not 0 <= arm < spec.n_arms:
        raise IndexError(f"arm {arm} out of range for {spec.n_arms} arms")
    reward = float(spec.arm_rewards[arm])
    if spec.noise_sigma > 0:
        if rng is None:
            raise ValueError("stochastic bandit needs an rng")
        reward += spec.noise_sigma * float(rng.standard_normal())
    return reward
