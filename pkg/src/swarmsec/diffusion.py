"""Noise schedules and the state-conditioned reverse-diffusion action sampler."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import nn
from .errors import ConfigError

SCHEDULES = ("vp", "linear", "cosine")


@dataclass(frozen=True)
class DiffusionSchedule:
    """Per-step tables, index 0 holding step t = 1."""

    kind: str
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray
    alpha_bars_prev: np.ndarray
    posterior_betas: np.ndarray  # beta~_t = (1 - abar_{t-1}) / (1 - abar_t) * beta_t

    @property
    def steps(self) -> int:
        return len(self.betas)

    def noise_scale(self, t: int) -> float:
        """Multiplier of the fresh Gaussian draw in reverse step ``t``."""
        return float((self.posterior_betas[t - 1] / 2.0) ** 2)


def vp_betas(steps: int, beta_min: float, beta_max: float) -> np.ndarray:
    t = np.arange(1, steps + 1)
    return 1.0 - np.exp(-beta_min / steps - (2 * t - 1) / (2.0 * steps ** 2) * (beta_max - beta_min))


def linear_betas(steps: int, beta_start: float = 1e-4, beta_end: float = 2e-2) -> np.ndarray:
    return np.linspace(beta_start, beta_end, steps) if steps > 1 else np.array([beta_end])


def cosine_betas(steps: int, s: float = 0.008, max_beta: float = 0.999) -> np.ndarray:
    x = np.linspace(0, steps, steps + 1)
    abar = np.cos(((x / steps) + s) / (1 + s) * math.pi * 0.5) ** 2
    abar = abar / abar[0]
    return np.clip(1.0 - abar[1:] / abar[:-1], 0.0, max_beta)


def build_schedule(steps: int, beta_min: float = 0.1, beta_max: float = 10.0, kind: str = "vp") -> DiffusionSchedule:
    steps = int(steps)
    if steps < 1:
        raise ConfigError("the number of denoising steps must be at least 1")
    if kind == "vp":
        if not 0.0 < beta_min < beta_max:
            raise ConfigError("need 0 < beta_min < beta_max")
        betas = vp_betas(steps, beta_min, beta_max)
    elif kind == "linear":
        betas = linear_betas(steps)
    elif kind == "cosine":
        betas = cosine_betas(steps)
    else:
        raise ConfigError(f"unknown schedule {kind!r}; valid: {', '.join(SCHEDULES)}")
    if not np.all((betas > 0.0) & (betas < 1.0)):
        raise ConfigError(f"schedule produced beta values outside (0, 1): {betas}")
    alphas = 1.0 - betas
    abar = np.cumprod(alphas)
    abar_prev = np.concatenate([[1.0], abar[:-1]])
    post = (1.0 - abar_prev) / (1.0 - abar) * betas
    for arr in (betas, alphas, abar, abar_prev, post):
        arr.setflags(write=False)
    return DiffusionSchedule(kind, betas, alphas, abar, abar_prev, post)


def denoise_mean(x_t, eps, t: int, schedule: DiffusionSchedule):
    """Reverse-step mean from the noisy action and the predicted noise."""
    beta = schedule.betas[t - 1]
    return (x_t - beta * eps / math.sqrt(1.0 - schedule.alpha_bars[t - 1])) / math.sqrt(schedule.alphas[t - 1])


def predict_x0(x_t, eps, t: int, schedule: DiffusionSchedule):
    abar = schedule.alpha_bars[t - 1]
    return (x_t - math.sqrt(1.0 - abar) * eps) / math.sqrt(abar)


def posterior_mean(x0, x_t, t: int, schedule: DiffusionSchedule):
    """Mean of q(x_{t-1} | x_t, x_0)."""
    i = t - 1
    beta, alpha = schedule.betas[i], schedule.alphas[i]
    abar, abar_prev = schedule.alpha_bars[i], schedule.alpha_bars_prev[i]
    c0 = math.sqrt(abar_prev) * beta / (1.0 - abar)
    ct = math.sqrt(alpha) * (1.0 - abar_prev) / (1.0 - abar)
    return c0 * x0 + ct * x_t


@dataclass
class ChainNoise:
    """Frozen random inputs of one reverse chain: x_T and one draw per step (index t - 1)."""

    x_T: np.ndarray          # (B, A)
    steps: np.ndarray        # (T, B, A)

    @classmethod
    def draw(cls, rng: np.random.Generator, schedule: DiffusionSchedule, batch: int, dim: int):
        return cls(rng.standard_normal((batch, dim)), rng.standard_normal((schedule.steps, batch, dim)))

    @classmethod
    def zeros(cls, schedule: DiffusionSchedule, batch: int, dim: int):
        return cls(np.zeros((batch, dim)), np.zeros((schedule.steps, batch, dim)))


class DiffusionActor:
    """Noise predictor eps(x_t, t, s) wrapped in the T-step reverse sampler.

    Network input is the concatenation [x_t, embed(t), s].  With ``skip`` the
    predictor is ``x_t / sqrt(1 - abar_t) + mlp(...)``: the fixed term is the
    exact noise for actions concentrated at 0, so an untrained network maps
    every x_T near the centre of the box instead of onto its corners.
    """

    kind = "diffusion"

    def __init__(self, obs_dim: int, act_dim: int, schedule: DiffusionSchedule,
                 hidden: int = 256, emb_dim: int = 16, skip: bool = True):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.schedule = schedule
        self.emb_dim = emb_dim
        self.skip = skip
        self._skip_coef = 1.0 / np.sqrt(1.0 - schedule.alpha_bars) if skip else np.zeros(schedule.steps)
        self.spec = nn.DenseNetSpec((act_dim + emb_dim + obs_dim, hidden, hidden, act_dim),
                                    ("mish", "mish", "linear"))
        self._emb = {t: nn.sinusoidal_embed(float(t), emb_dim) for t in range(1, schedule.steps + 1)}

    def init_params(self, rng, final_scale: float = 0.1):
        return nn.init_params(self.spec, rng, final_scale)

    def _net_input(self, x, t, obs):
        emb = np.broadcast_to(self._emb[t], (x.shape[0], self.emb_dim))
        return np.concatenate([x, emb, obs], axis=1)

    def epsilon(self, params, x_t, t, obs, record=False):
        out = nn.forward(self.spec, params, self._net_input(x_t, t, obs), record=record)
        if not self.skip:
            return out
        if record:
            return out[0] + self._skip_coef[t - 1] * x_t, out[1]
        return out + self._skip_coef[t - 1] * x_t

    def sample(self, params, obs, noise: ChainNoise, record: bool = False):
        """Run the reverse chain; returns ``(x_0, cache)`` (cache is None unless ``record``)."""
        obs = np.atleast_2d(obs)
        sched = self.schedule
        x = np.asarray(noise.x_T, dtype=float)
        cache = [] if record else None
        for t in range(sched.steps, 0, -1):
            if record:
                eps, tape = self.epsilon(params, x, t, obs, record=True)
            else:
                eps = self.epsilon(params, x, t, obs)
            y = denoise_mean(x, eps, t, sched) + sched.noise_scale(t) * noise.steps[t - 1]
            x_next = np.clip(y, -1.0, 1.0)
            if record:
                cache.append((t, tape, (y > -1.0) & (y < 1.0)))
            x = x_next
        return x, cache

    def backward(self, params, cache, grad_action):
        """Gradients of the parameters given dL/d(action) for a recorded chain."""
        sched = self.schedule
        g = np.asarray(grad_action, dtype=float)
        total = [np.zeros_like(p) for p in params]
        a = self.act_dim
        # cache runs t = T .. 1; the gradient flows from x_0 back toward x_T
        for t, tape, inside in reversed(cache):
            gy = g * inside
            i = t - 1
            inv_sqrt_alpha = 1.0 / math.sqrt(sched.alphas[i])
            coef = sched.betas[i] / math.sqrt(1.0 - sched.alpha_bars[i])
            g_eps = -coef * inv_sqrt_alpha * gy
            grads, g_in = nn.backward(self.spec, params, tape, g_eps)
            for acc, gr in zip(total, grads):
                acc += gr
            g = gy * inv_sqrt_alpha + g_in[:, :a] + self._skip_coef[i] * g_eps
        return total

    def act(self, params, obs, rng: Optional[np.random.Generator], stochastic: bool):
        """Action(s) for observation(s); deterministic mode starts from x_T = 0 with no step noise."""
        obs2 = np.atleast_2d(obs)
        if stochastic:
            noise = ChainNoise.draw(rng, self.schedule, obs2.shape[0], self.act_dim)
        else:
            noise = ChainNoise.zeros(self.schedule, obs2.shape[0], self.act_dim)
        x, _ = self.sample(params, obs2, noise)
        return x[0] if np.ndim(obs) == 1 else x

    def draw_noise(self, rng, batch):
        return ChainNoise.draw(rng, self.schedule, batch, self.act_dim)


class MLPActor:
    """Plain deterministic tanh-output actor (TD3 ablation)."""

    kind = "mlp"

    def __init__(self, obs_dim: int, act_dim: int, hidden: int = 256):
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.spec = nn.DenseNetSpec((obs_dim, hidden, hidden, act_dim), ("relu", "relu", "tanh"))

    def init_params(self, rng, final_scale: float = 1.0):
        return nn.init_params(self.spec, rng, final_scale)

    def sample(self, params, obs, noise=None, record: bool = False):
        out = nn.forward(self.spec, params, np.atleast_2d(obs), record=record)
        return out if record else (out, None)

    def backward(self, params, cache, grad_action):
        grads, _ = nn.backward(self.spec, params, cache, grad_action)
        return grads

    def act(self, params, obs, rng=None, stochastic: bool = False):
        x, _ = self.sample(params, obs)
        return x[0] if np.ndim(obs) == 1 else x

    def draw_noise(self, rng, batch):
        return None
