"""One-step contextual bandit with a known optimum, for checking the learner."""
from __future__ import annotations

import numpy as np

from .environment import StepOutcome


class ContextualBandit:
    """Context s ~ U[-1, 1]^obs_dim; reward -||a - f(s)||^2 with f(s) = scale * tanh(W s).

    ``W`` is fixed by ``task_seed``; the optimum reward is 0.
    """

    def __init__(self, obs_dim: int = 4, action_dim: int = 8, scale: float = 0.8, task_seed: int = 1234):
        self.obs_dim = obs_dim
        self.action_dim = action_dim
        self.scale = scale
        self.weights = np.random.default_rng(task_seed).normal(size=(obs_dim, action_dim)) / np.sqrt(obs_dim)
        self._rng = np.random.default_rng(0)
        self._obs = None

    def optimum(self, obs) -> np.ndarray:
        return self.scale * np.tanh(np.asarray(obs) @ self.weights)

    def reset(self, seed=None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        self._obs = self._rng.uniform(-1.0, 1.0, self.obs_dim)
        return self._obs.copy()

    def step(self, action) -> StepOutcome:
        if self._obs is None:
            raise RuntimeError("call reset() before step()")
        a = np.asarray(action, dtype=float).reshape(-1)
        if a.shape[0] != self.action_dim:
            raise ValueError(f"action must have length {self.action_dim}")
        reward = -float(np.sum((a - self.optimum(self._obs)) ** 2))
        obs = self._obs
        self._obs = None
        return StepOutcome(obs.copy(), reward, True, {})
