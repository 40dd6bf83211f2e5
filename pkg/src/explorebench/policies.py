"""Action selection: greedy, random, epsilon-greedy, Boltzmann, MC-dropout.

Every selector is a pure function of its inputs and the rng it is handed,
so replaying an rng replays the choices.  Ties always go to the lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .qnet import QNetwork, forward

STRATEGIES = ("greedy", "random", "eps-greedy", "boltzmann", "bayes-dropout")
TEMPERATURE_FLOOR = 1e-6


@dataclass
class Schedule:
    """Linear anneal from ``start`` to ``end`` over ``anneal_steps``, then flat."""

    start: float
    end: float
    anneal_steps: int

    def __post_init__(self):
        if self.anneal_steps < 1:
            raise ValueError("anneal_steps must be >= 1")

    def value(self, global_step: int) -> float:
        if global_step < 0:
            raise ValueError("global_step must be >= 0")
        if global_step >= self.anneal_steps:
            return float(self.end)
        frac = global_step / self.anneal_steps
        return float(self.start + frac * (self.end - self.start))


@dataclass
class PolicySpec:
    kind: str
    epsilon_schedule: Schedule = field(default_factory=lambda: Schedule(1.0, 0.1, 10_000))
    temperature_schedule: Schedule = field(default_factory=lambda: Schedule(1.0, 0.05, 10_000))
    dropout_samples: int = 10

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.kind!r}; expected one of {STRATEGIES}")
        eps = self.epsilon_schedule
        if not 0.0 <= eps.end <= eps.start <= 1.0:
            raise ValueError(f"epsilon schedule needs 0 <= end <= start <= 1, got {eps}")
        temp = self.temperature_schedule
        if temp.start <= 0 or temp.end <= 0:
            raise ValueError(f"temperatures must be positive, got {temp}")
        if self.dropout_samples < 1:
            raise ValueError("dropout_samples must be >= 1")


def _check_q(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1 or q.size == 0:
        raise ValueError("q must be a non-empty vector")
    if not np.all(np.isfinite(q)):
        raise ValueError("q contains non-finite values")
    return q


def greedy_select(q) -> int:
    return int(np.argmax(_check_q(q)))


def random_select(action_count: int, rng: np.random.Generator) -> int:
    if action_count < 1:
        raise ValueError("action_count must be >= 1")
    return int(rng.integers(action_count))


def epsilon_at(schedule: Schedule, global_step: int) -> float:
    return schedule.value(global_step)


def epsilon_greedy_select(q, epsilon: float, rng: np.random.Generator) -> int:
    q = _check_q(q)
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    # the random branch is uniform over all actions, greedy one included
    if rng.random() < epsilon:
        return int(rng.integers(q.size))
    return int(np.argmax(q))


def temperature_at(schedule: Schedule, global_step: int) -> float:
    if schedule.start <= 0 or schedule.end <= 0:
        raise ValueError("temperature schedule values must be positive")
    return schedule.value(global_step)


def boltzmann_distribution(q, temperature: float) -> np.ndarray:
    """Softmax of ``q / temperature`` with max-subtraction."""
    q = _check_q(q)
    if not temperature > 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    z = (q - q.max()) / max(temperature, TEMPERATURE_FLOOR)
    e = np.exp(z)
    return e / e.sum()


def sample_from(probs, rng: np.random.Generator) -> int:
    """Inverse-CDF draw from a discrete distribution."""
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, len(cdf) - 1)


def boltzmann_select(q, temperature: float, rng: np.random.Generator) -> int:
    return sample_from(boltzmann_distribution(q, temperature), rng)


def bayes_dropout_select(net: QNetwork, state, rng: np.random.Generator) -> int:
    """Argmax of one dropout-sampled Q vector (Thompson-style)."""
    q, _ = forward(net, state, rng=rng)
    return greedy_select(q)


def action_uncertainty(net: QNetwork, state, dropout_samples: int, rng: np.random.Generator):
    """Per-action sample mean and unbiased variance over stochastic passes."""
    if dropout_samples < 2:
        raise ValueError("dropout_samples must be >= 2")
    state = np.asarray(state, dtype=np.float64)
    batch = np.broadcast_to(state, (dropout_samples, state.size))
    q, _ = forward(net, batch, rng=rng)
    # shifted data: identical samples give exactly zero variance
    d = q - q[0]
    return q[0] + d.mean(axis=0), d.var(axis=0, ddof=1)


def schedule_value(spec: PolicySpec, global_step: int, dropout_rate: float = 0.0) -> float:
    """The exploration knob in force at ``global_step``, for logging.

    Greedy reports 0 and random 1 (their effective epsilon).
    """
    if spec.kind == "eps-greedy":
        return epsilon_at(spec.epsilon_schedule, global_step)
    if spec.kind == "boltzmann":
        return temperature_at(spec.temperature_schedule, global_step)
    if spec.kind == "bayes-dropout":
        return float(dropout_rate)
    return 1.0 if spec.kind == "random" else 0.0


def select_action(spec: PolicySpec, global_step: int, rng: np.random.Generator,
                  *, q=None, net: QNetwork | None = None, state=None) -> int:
    """Uniform entry point.  Supply ``q`` directly (tabular) or ``net`` + ``state``."""
    kind = spec.kind
    if kind == "random":
        n = net.n_actions if net is not None else len(q)
        return random_select(n, rng)
    if kind == "bayes-dropout":
        if net is None:
            raise ValueError("bayes-dropout needs a network")
        return bayes_dropout_select(net, state, rng)
    if q is None:
        q, _ = forward(net, state)
    if kind == "greedy":
        return greedy_select(q)
    if kind == "eps-greedy":
        return epsilon_greedy_select(q, epsilon_at(spec.epsilon_schedule, global_step), rng)
    return boltzmann_select(q, temperature_at(spec.temperature_schedule, global_step), rng)
