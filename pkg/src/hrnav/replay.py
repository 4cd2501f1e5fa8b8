"""Fixed-capacity FIFO experience replay with uniform sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray
    action: object
    reward: float
    next_obs: np.ndarray
    done: bool
    # low-level steps spanned; >1 only for high-level (semi-Markov) transitions
    steps: int = 1


@dataclass
class Batch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    dones: np.ndarray
    steps: np.ndarray

    def __len__(self):
        return len(self.rewards)

    def transition(self, i: int) -> Transition:
        a = self.actions[i]
        return Transition(self.obs[i], int(a) if self.actions.dtype.kind == "i" else a.copy(),
                          float(self.rewards[i]), self.next_obs[i], bool(self.dones[i]), int(self.steps[i]))


class ReplayBuffer:
    """Ring buffer of transitions.

    ``action_dim=None`` stores discrete action indices; an integer stores
    continuous action vectors of that width.
    """

    def __init__(self, capacity: int, obs_dim: int, action_dim: int | None = None):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.obs_dim = int(obs_dim)
        self.action_dim = action_dim
        self.obs = np.zeros((capacity, obs_dim))
        self.next_obs = np.zeros((capacity, obs_dim))
        if action_dim is None:
            self.actions = np.zeros(capacity, dtype=np.int64)
        else:
            self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.steps = np.ones(capacity, dtype=np.int64)
        self.size = 0
        self.cursor = 0

    def __len__(self):
        return self.size

    def push(self, t: Transition) -> None:
        obs = np.asarray(t.obs, dtype=np.float64)
        next_obs = np.asarray(t.next_obs, dtype=np.float64)
        if obs.shape != (self.obs_dim,) or next_obs.shape != (self.obs_dim,):
            raise ValueError(f"observation length must be {self.obs_dim}, got {obs.shape} / {next_obs.shape}")
        if self.action_dim is not None:
            action = np.asarray(t.action, dtype=np.float64)
            if action.shape != (self.action_dim,):
                raise ValueError(f"action must have length {self.action_dim}, got {action.shape}")
        else:
            action = int(t.action)
        i = self.cursor
        self.obs[i] = obs
        self.next_obs[i] = next_obs
        self.actions[i] = action
        self.rewards[i] = t.reward
        self.dones[i] = t.done
        self.steps[i] = t.steps
        self.cursor = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def add(self, obs, action, reward, next_obs, done, steps=1) -> None:
        self.push(Transition(obs, action, reward, next_obs, done, steps))

    def contents(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        start = self.cursor if self.size == self.capacity else 0
        idx = [(start + k) % self.capacity for k in range(self.size)]
        return [self._gather(np.array([i])).transition(0) for i in idx]

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if batch_size > self.size:
            raise ValueError(f"cannot sample {batch_size} from a buffer holding {self.size}")
        return rng.integers(0, self.size, size=batch_size)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        return self._gather(self.sample_indices(batch_size, rng))

    def _gather(self, idx) -> Batch:
        return Batch(self.obs[idx], self.actions[idx], self.rewards[idx], self.next_obs[idx],
                     self.dones[idx], self.steps[idx])
