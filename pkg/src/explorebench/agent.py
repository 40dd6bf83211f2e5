"""DQN learner: replay buffer, TD targets from a synced target network,
and the per-episode interaction loop."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import policies
from .qnet import (
    AdamState, QNetwork, apply_update, backward, clip_gradients, copy_parameters,
    forward, init_adam, init_network,
)


class Transition(NamedTuple):
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    terminal: bool  # failure only; time-limit truncation is not terminal


@dataclass
class AgentConfig:
    gamma: float = 0.99
    batch_size: int = 64
    target_sync_interval: int = 200
    warmup_transitions: int = 500
    learn_every: int = 1
    buffer_capacity: int = 10_000
    learning_rate: float = 1e-3
    hidden_dims: tuple[int, ...] = (64, 64)
    dropout_rate: float = 0.1
    grad_clip: float | None = None

    def __post_init__(self):
        self.hidden_dims = tuple(int(h) for h in self.hidden_dims)
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        for name in ("batch_size", "target_sync_interval", "learn_every", "buffer_capacity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.warmup_transitions < 0:
            raise ValueError("warmup_transitions must be >= 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive or None")


class ReplayBuffer:
    """Bounded FIFO of transitions stored in a ring of numpy arrays."""

    def __init__(self, capacity: int, state_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.next_states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.terminals = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def push(self, t: Transition) -> None:
        i = self._next
        self.states[i] = t.state
        self.actions[i] = t.action
        self.rewards[i] = t.reward
        self.next_states[i] = t.next_state
        self.terminals[i] = t.terminal
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _physical(self, logical):
        # logical 0 is the oldest stored transition
        start = (self._next - self._size) % self.capacity
        return (start + np.asarray(logical)) % self.capacity

    def __getitem__(self, logical: int) -> Transition:
        if not 0 <= logical < self._size:
            raise IndexError(logical)
        i = int(self._physical(logical))
        return Transition(self.states[i].copy(), int(self.actions[i]), float(self.rewards[i]),
                          self.next_states[i].copy(), bool(self.terminals[i]))

    def contents(self) -> list[Transition]:
        return [self[i] for i in range(self._size)]

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if batch_size > self._size:
            raise ValueError(f"buffer holds {self._size} transitions, batch needs {batch_size}")
        return rng.choice(self._size, size=batch_size, replace=False)

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Transition]:
        return [self[int(i)] for i in self.sample_indices(batch_size, rng)]

    def sample_arrays(self, batch_size: int, rng: np.random.Generator):
        idx = self._physical(self.sample_indices(batch_size, rng))
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx], self.terminals[idx])


def buffer_push(buffer: ReplayBuffer, transition: Transition) -> None:
    buffer.push(transition)


def buffer_sample(buffer: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> list[Transition]:
    return buffer.sample(batch_size, rng)


def td_target(transition: Transition, gamma: float, target_net: QNetwork) -> float:
    if transition.terminal:
        return float(transition.reward)
    q_next, _ = forward(target_net, transition.next_state)
    return float(transition.reward + gamma * np.max(q_next))


def td_targets(rewards, next_states, terminals, gamma: float, target_net: QNetwork) -> np.ndarray:
    """Vectorised :func:`td_target` over a batch."""
    q_next, _ = forward(target_net, next_states)
    bootstrap = np.where(terminals, 0.0, q_next.max(axis=1))
    return rewards + gamma * bootstrap


def sync_target(online_net: QNetwork, target_net: QNetwork) -> None:
    copy_parameters(online_net, target_net)


@dataclass
class DQNAgent:
    online: QNetwork
    target: QNetwork
    optimizer: AdamState
    buffer: ReplayBuffer
    config: AgentConfig
    global_step: int = 0
    grad_steps: int = 0
    losses: list[float] = field(default_factory=list)

    @classmethod
    def create(cls, state_dim: int, n_actions: int, config: AgentConfig, rng: np.random.Generator):
        dims = [state_dim, *config.hidden_dims, n_actions]
        online = init_network(dims, rng, dropout_rate=config.dropout_rate)
        return cls(online, online.copy(), init_adam(online, lr=config.learning_rate),
                   ReplayBuffer(config.buffer_capacity, state_dim), config)


def learn_step(online_net: QNetwork, target_net: QNetwork, buffer: ReplayBuffer,
               config: AgentConfig, rng: np.random.Generator, optimizer: AdamState,
               stochastic: bool = False) -> float:
    """One gradient step on a uniformly sampled batch; returns the batch loss.

    ``stochastic`` trains the online net through fresh dropout masks (used
    for the bayes-dropout strategy only).
    """
    if len(buffer) < max(config.warmup_transitions, config.batch_size):
        raise ValueError(f"buffer underfull: {len(buffer)} transitions")
    s, a, r, s2, term = buffer.sample_arrays(config.batch_size, rng)
    y = td_targets(r, s2, term, config.gamma, target_net)
    _, cache = forward(online_net, s, rng=rng if stochastic else None)
    grads = backward(online_net, cache, a, y)
    if config.grad_clip is not None:
        grads = clip_gradients(grads, config.grad_clip)
    apply_update(online_net, grads, optimizer)
    return grads.loss


class EpisodeResult(NamedTuple):
    episode_return: float
    steps: int
    global_step: int


def run_episode(env, agent: DQNAgent, policy: policies.PolicySpec,
                rng: np.random.Generator) -> EpisodeResult:
    """Play one episode, learning online.  Returns the undiscounted return.

    Until the buffer holds ``warmup_transitions`` the agent acts uniformly at
    random to fill it.  Schedules are indexed by the agent's global env step.
    """
    cfg = agent.config
    stochastic = policy.kind == "bayes-dropout"
    state = np.asarray(env.reset(rng), dtype=np.float64)
    total, steps = 0.0, 0
    while True:
        if len(agent.buffer) < cfg.warmup_transitions:
            action = policies.random_select(env.n_actions, rng)
        else:
            action = policies.select_action(policy, agent.global_step, rng,
                                            net=agent.online, state=state)
        res = env.step(action)
        next_state = np.asarray(res.next_state, dtype=np.float64)
        agent.buffer.push(Transition(state, action, res.reward, next_state, res.done))
        agent.global_step += 1
        total += res.reward
        steps += 1
        warm = len(agent.buffer) >= max(cfg.warmup_transitions, cfg.batch_size)
        if warm and agent.global_step % cfg.learn_every == 0:
            loss = learn_step(agent.online, agent.target, agent.buffer, cfg, rng,
                              agent.optimizer, stochastic)
            agent.losses.append(loss)
            agent.grad_steps += 1
            if agent.grad_steps % cfg.target_sync_interval == 0:
                sync_target(agent.online, agent.target)
        if res.done or res.truncated:
            return EpisodeResult(total, steps, agent.global_step)
        state = next_state
