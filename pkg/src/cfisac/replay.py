"""Capacity-bounded FIFO experience replay with seeded sampling."""

from __future__ import annotations

import numpy as np


class ReplayBuffer:
    """Ring buffer of transitions; batches sample without replacement."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int,
                 seed: int = 0):
        self.capacity = int(capacity)
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.rng = np.random.default_rng(seed)
        self._write = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def add(self, state, action, reward, next_state):
        if not (np.all(np.isfinite(state)) and np.all(np.isfinite(action))
                and np.isfinite(reward) and np.all(np.isfinite(next_state))):
            raise ValueError("transitions must be finite")
        i = self._write
        self.states[i] = state
        self.actions[i] = action
        self.rewards[i] = reward
        self.next_states[i] = next_state
        self._write = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, batch_size: int):
        if batch_size > self._size:
            raise ValueError(
                f"cannot sample {batch_size} of {self._size} transitions")
        idx = self.rng.choice(self._size, size=batch_size, replace=False)
        return (self.states[idx], self.actions[idx], self.rewards[idx],
                self.next_states[idx])
