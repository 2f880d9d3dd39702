"""Non-learning deployment strategies: random repositioning and three fixed formations."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .environment import EnvConfig, SwarmEnv, SwarmState, episode_return
from .errors import ConfigError

LAYOUT_SPACING = 0.5   # m, neighbour spacing of the line and grid formations
CIRCLE_RADIUS = 0.5    # m
ARRIVAL_TOL = 1e-6     # m; closer than this a static policy stops commanding motion

Policy = Callable[[np.ndarray, SwarmEnv], np.ndarray]


@dataclass(frozen=True)
class StaticLayout:
    positions: np.ndarray
    excitations: np.ndarray


def region_center(cfg: EnvConfig) -> np.ndarray:
    """Centre of the deployment region at the middle altitude."""
    return (cfg.box_low + cfg.box_high) / 2.0


def _place(offsets_xy, cfg: EnvConfig) -> StaticLayout:
    offsets_xy = np.asarray(offsets_xy, dtype=float)
    offsets_xy = offsets_xy - offsets_xy.mean(axis=0)
    centre = region_center(cfg)
    positions = np.column_stack([offsets_xy + centre[:2], np.full(len(offsets_xy), centre[2])])
    if np.any(positions < cfg.box_low - 1e-9) or np.any(positions > cfg.box_high + 1e-9):
        raise ConfigError(f"a {len(offsets_xy)}-UAV formation does not fit in the deployment box")
    return StaticLayout(positions, np.ones(len(offsets_xy)))


def linear_layout(cfg: EnvConfig) -> StaticLayout:
    k = cfg.n_uavs
    xs = np.arange(k) * LAYOUT_SPACING
    return _place(np.column_stack([xs, np.zeros(k)]), cfg)


def planar_layout(cfg: EnvConfig) -> StaticLayout:
    """Row-major fill of the smallest square grid that holds K points."""
    k = cfg.n_uavs
    side = math.ceil(math.sqrt(k))
    idx = np.arange(k)
    pts = np.column_stack([idx % side, idx // side]) * LAYOUT_SPACING
    return _place(pts, cfg)


def circle_radius(k: int, d_min: float) -> float:
    """Nominal radius, widened when K is large enough that neighbours would be closer than ``d_min``."""
    if k < 2:
        return CIRCLE_RADIUS
    # the tiny margin keeps the rounded chord from dipping under d_min
    return max(CIRCLE_RADIUS, d_min / (2.0 * math.sin(math.pi / k)) * (1.0 + 1e-12))


def circular_layout(cfg: EnvConfig) -> StaticLayout:
    k = cfg.n_uavs
    ang = 2.0 * math.pi * np.arange(k) / k
    pts = circle_radius(k, cfg.d_min) * np.column_stack([np.cos(ang), np.sin(ang)])
    return _place(pts, cfg)


LAYOUTS = {"laa": linear_layout, "paa": planar_layout, "caa": circular_layout}
STRATEGIES = ("random", "laa", "paa", "caa")


def displacement_action(current: SwarmState, targets, excitations, cfg: EnvConfig) -> np.ndarray:
    """Action that moves toward ``targets`` as far as the speed limit allows.

    Components within ``ARRIVAL_TOL`` of the target are commanded exactly zero
    so a settled formation hovers with no residual drift.
    """
    reach = cfg.v_max * cfg.slot_seconds
    delta = np.asarray(targets, dtype=float) - current.positions
    norms = np.linalg.norm(delta, axis=1)
    scale = np.where(norms > reach, reach / np.maximum(norms, 1e-300), 1.0)
    cmd = delta * scale[:, None] / reach
    cmd[np.abs(delta) < ARRIVAL_TOL] = 0.0
    exc_cmd = 2.0 * np.asarray(excitations, dtype=float) - 1.0
    action = np.column_stack([np.clip(cmd, -1.0, 1.0), np.clip(exc_cmd, -1.0, 1.0)])
    return action.reshape(-1)


def static_policy(layout: StaticLayout) -> Policy:
    def policy(obs, env: SwarmEnv):
        return displacement_action(env.state, layout.positions, layout.excitations, env.cfg)
    # formations are deployed before the episode starts
    policy.initial_positions = layout.positions
    return policy


def random_policy(rng: np.random.Generator) -> Policy:
    """Every slot: uniform target positions in the box and uniform excitations."""
    def policy(obs, env: SwarmEnv):
        cfg = env.cfg
        k = cfg.n_uavs
        targets = rng.uniform(cfg.box_low, cfg.box_high, size=(k, 3))
        excitations = rng.uniform(0.0, 1.0, size=k)
        return displacement_action(env.state, targets, excitations, cfg)
    return policy


def make_policy(name: str, cfg: EnvConfig, rng: np.random.Generator) -> Policy:
    if name == "random":
        return random_policy(rng)
    if name in LAYOUTS:
        return static_policy(LAYOUTS[name](cfg))
    raise ConfigError(f"unknown strategy {name!r}; valid: {', '.join(STRATEGIES)}")


@dataclass
class PolicyMetrics:
    secrecy_mean: float
    secrecy_std: float
    energy_mean: float
    energy_std: float
    reward_mean: float
    episode_rewards: list
    episode_secrecy: list
    episode_energy: list
    steps: list  # per-episode lists of (reward, secrecy, energy, violations)

    def summary(self) -> dict:
        return {"secrecy_rate_bpshz_mean": self.secrecy_mean,
                "secrecy_rate_bpshz_std": self.secrecy_std,
                "energy_j_mean": self.energy_mean,
                "energy_j_std": self.energy_std,
                "episode_reward_mean": self.reward_mean}


def rollout(env: SwarmEnv, policy: Policy, seed: int):
    obs = env.reset(seed, getattr(policy, "initial_positions", None))
    outcomes = []
    while True:
        out = env.step(policy(obs, env))
        outcomes.append(out)
        obs = out.observation
        if out.terminal:
            return outcomes


def evaluate_policy(policy: Policy, cfg: EnvConfig, episodes: int, seed: int) -> PolicyMetrics:
    """Roll out ``episodes`` episodes; std is across episodes of the per-step means.

    Episode ``i`` resets the environment from the i-th child of ``seed``.
    """
    if episodes < 1:
        raise ValueError("episodes must be at least 1")
    env = SwarmEnv(cfg)
    seeds = np.random.SeedSequence(seed).spawn(episodes)
    rewards, secrecy, energy, steps = [], [], [], []
    for ss in seeds:
        outcomes = rollout(env, policy, int(ss.generate_state(1)[0]))
        total, sec, en = episode_return(outcomes)
        rewards.append(total)
        secrecy.append(sec)
        energy.append(en)
        steps.append([(o.reward, o.info["secrecy_rate_bpshz"], o.info["energy_j"],
                       o.info["violations"]) for o in outcomes])
    return PolicyMetrics(float(np.mean(secrecy)), float(np.std(secrecy)),
                         float(np.mean(energy)), float(np.std(energy)),
                         float(np.mean(rewards)), rewards, secrecy, energy, steps)


def evaluate_strategy(name: str, cfg: EnvConfig, episodes: int, seed: int) -> PolicyMetrics:
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    return evaluate_policy(make_policy(name, cfg, rng), cfg, episodes, seed)
