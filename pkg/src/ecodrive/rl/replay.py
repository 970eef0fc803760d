"""Prioritized experience replay with proportional sampling and
importance-sampling weights."""

from __future__ import annotations

import numpy as np


class PrioritizedReplay:
    """FIFO transition store with priorities proportional to recent TD
    error magnitudes; new transitions enter at the current max priority."""

    def __init__(self, capacity: int = 50_000, obs_shape=(4, 12),
                 alpha: float = 0.6, epsilon: float = 1e-3, seed: int = 0):
        self.capacity = capacity
        self.alpha = alpha
        self.epsilon = epsilon
        self.rng = np.random.default_rng(seed)
        self.size = 0
        self._pos = 0
        flat = int(np.prod(obs_shape))
        self.obs = np.zeros((capacity, flat))
        self.next_obs = np.zeros((capacity, flat))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity)
        self.priorities = np.zeros(capacity)

    def __len__(self) -> int:
        return self.size

    def add(self, s, a, r, s_next, done) -> None:
        i = self._pos
        self.obs[i] = np.asarray(s, dtype=float).ravel()
        self.next_obs[i] = np.asarray(s_next, dtype=float).ravel()
        self.actions[i] = a
        self.rewards[i] = r
        self.dones[i] = float(done)
        self.priorities[i] = self.priorities[: self.size].max() if self.size else 1.0
        self._pos = (self._pos + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def _probabilities(self) -> np.ndarray:
        scaled = self.priorities[: self.size] ** self.alpha
        return scaled / scaled.sum()

    def sample(self, batch: int, beta: float):
        """Proportional draw of `batch` transitions; returns the indices,
        the transition arrays and max-normalized importance weights."""
        if self.size == 0:
            raise ValueError("cannot sample from an empty buffer")
        probs = self._probabilities()
        idx = self.rng.choice(self.size, size=batch, p=probs)
        weights = (self.size * probs[idx]) ** (-beta)
        weights /= weights.max()
        return idx, (self.obs[idx], self.actions[idx], self.rewards[idx],
                     self.next_obs[idx], self.dones[idx]), weights

    def update_priorities(self, idx, td_errors) -> None:
        self.priorities[idx] = np.abs(td_errors) + self.epsilon
