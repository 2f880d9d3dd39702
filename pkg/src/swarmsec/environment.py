"""Episode dynamics of the swarm / base station / eavesdropper scenario."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .beamforming import ArrayGeometry, BeamPattern, Direction, GainQuadrature, swarm_center
from .channel import ChannelParams, average_channel_gain, link_rate, secrecy_rate
from .energy import RotorcraftParams, swarm_energy
from .errors import ConfigError


def _bounds(pair, name):
    lo, hi = (float(v) for v in pair)
    if not lo < hi:
        raise ConfigError(f"{name}: lower bound must be below upper bound, got {pair}")
    return (lo, hi)


@dataclass(frozen=True)
class GaussMarkovParams:
    mean_speed: float = 5.0
    correlation: float = 0.1
    variance: float = 1.0
    x_bounds: tuple = (50.0, 400.0)
    y_bounds: tuple = (50.0, 400.0)

    def __post_init__(self):
        if not 0.0 <= self.correlation <= 1.0:
            raise ConfigError("correlation must lie in [0, 1]")
        if self.mean_speed < 0 or self.variance < 0:
            raise ConfigError("mean_speed and variance must be non-negative")
        object.__setattr__(self, "x_bounds", _bounds(self.x_bounds, "eav.x_bounds"))
        object.__setattr__(self, "y_bounds", _bounds(self.y_bounds, "eav.y_bounds"))


@dataclass
class EavesdropperState:
    position: np.ndarray  # (x, y, 0)
    speed: float
    heading: float


def gauss_markov_step(state: EavesdropperState, params: GaussMarkovParams,
                      rng: np.random.Generator, dt: float = 1.0) -> EavesdropperState:
    """Advance the eavesdropper by one slot.

    Speed and heading are AR(1) processes.  The heading mean is the previous
    heading, so heading performs a random walk; walls reflect the position and
    mirror the heading.
    """
    zeta = params.correlation
    sigma = math.sqrt(params.variance)
    innov = math.sqrt(max(0.0, 1.0 - zeta * zeta)) * sigma
    w1, w2 = rng.standard_normal(2)
    speed = zeta * state.speed + (1.0 - zeta) * params.mean_speed + innov * w1
    speed = max(0.0, speed)
    heading = state.heading + innov * w2
    x = state.position[0] + speed * dt * math.cos(heading)
    y = state.position[1] + speed * dt * math.sin(heading)
    hx = math.cos(heading)
    hy = math.sin(heading)
    x, hx = _fold(x, hx, *params.x_bounds)
    y, hy = _fold(y, hy, *params.y_bounds)
    heading = math.atan2(hy, hx)
    return EavesdropperState(np.array([x, y, 0.0]), speed, heading)


def _fold(value, direction, lo, hi):
    # mirror repeatedly; each wall hit flips the velocity component
    while value < lo or value > hi:
        if value < lo:
            value = 2.0 * lo - value
        else:
            value = 2.0 * hi - value
        direction = -direction
    return value, direction


@dataclass(frozen=True)
class EnvConfig:
    n_uavs: int = 8
    slots_per_episode: int = 100
    slot_seconds: float = 1.0
    x_bounds: tuple = (0.0, 40.0)
    y_bounds: tuple = (0.0, 40.0)
    z_bounds: tuple = (70.0, 120.0)
    rbs_position: tuple = (600.0, 600.0, 15.0)
    v_max: float = 30.0
    d_min: float = 0.5
    w_secrecy: float = 1.0       # per bps/Hz
    w_energy: float = 1.0        # per kJ
    penalty: float = 10.0        # per violating pair
    p_elem: float = 0.1          # W per UAV at full excitation
    power_mode: str = "excitation"
    channel: ChannelParams = field(default_factory=ChannelParams)
    rotor: RotorcraftParams = field(default_factory=RotorcraftParams)
    quad: GainQuadrature = field(default_factory=GainQuadrature)
    eav: GaussMarkovParams = field(default_factory=GaussMarkovParams)

    def __post_init__(self):
        if int(self.n_uavs) < 1:
            raise ConfigError("n_uavs must be at least 1")
        if int(self.slots_per_episode) < 1:
            raise ConfigError("slots_per_episode must be at least 1")
        if not self.slot_seconds > 0:
            raise ConfigError("slot_seconds must be positive")
        if self.w_secrecy < 0 or self.w_energy < 0:
            raise ConfigError("reward weights must be non-negative")
        if self.d_min < 0 or self.v_max <= 0 or self.penalty < 0 or self.p_elem < 0:
            raise ConfigError("d_min, penalty, p_elem must be >= 0 and v_max > 0")
        if self.power_mode not in ("excitation", "fixed"):
            raise ConfigError("power_mode must be 'excitation' or 'fixed'")
        object.__setattr__(self, "n_uavs", int(self.n_uavs))
        object.__setattr__(self, "slots_per_episode", int(self.slots_per_episode))
        for name in ("x_bounds", "y_bounds", "z_bounds"):
            object.__setattr__(self, name, _bounds(getattr(self, name), name))
        rbs = tuple(float(v) for v in self.rbs_position)
        if len(rbs) != 3:
            raise ConfigError("rbs_position needs three coordinates")
        object.__setattr__(self, "rbs_position", rbs)

    @property
    def box_low(self) -> np.ndarray:
        return np.array([self.x_bounds[0], self.y_bounds[0], self.z_bounds[0]])

    @property
    def box_high(self) -> np.ndarray:
        return np.array([self.x_bounds[1], self.y_bounds[1], self.z_bounds[1]])

    @property
    def obs_dim(self) -> int:
        return 3 * self.n_uavs + 2

    @property
    def action_dim(self) -> int:
        return 4 * self.n_uavs


@dataclass
class SwarmState:
    positions: np.ndarray     # (K, 3)
    velocities: np.ndarray    # (K, 3)
    excitations: np.ndarray   # (K,)


@dataclass
class StepOutcome:
    observation: np.ndarray
    reward: float
    terminal: bool
    info: dict


def encode_positions(positions, low, high) -> np.ndarray:
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)
    return (np.asarray(positions, dtype=float) - (low + high) / 2.0) / ((high - low) / 2.0)


def decode_positions(encoded, low, high) -> np.ndarray:
    low = np.asarray(low, dtype=float)
    high = np.asarray(high, dtype=float)
    return np.asarray(encoded, dtype=float) * ((high - low) / 2.0) + (low + high) / 2.0


def decode_action(action, state: SwarmState, cfg: EnvConfig):
    """Map an agent output in [-1, 1]^(4K) to target positions and excitations.

    Per UAV the action holds a displacement command (dx, dy, dz) and an
    excitation command.  The displacement is scaled by ``v_max * slot_seconds``
    and its norm capped at that value, then the target is clipped into the
    deployment box.
    """
    a = np.clip(np.asarray(action, dtype=float).reshape(cfg.n_uavs, 4), -1.0, 1.0)
    reach = cfg.v_max * cfg.slot_seconds
    disp = a[:, :3] * reach
    norms = np.linalg.norm(disp, axis=1)
    over = norms > reach
    if np.any(over):
        disp[over] *= (reach / norms[over])[:, None]
    targets = np.clip(state.positions + disp, cfg.box_low, cfg.box_high)
    excitations = (a[:, 3] + 1.0) / 2.0
    return targets, excitations


def pair_violations(positions, d_min: float) -> int:
    """Number of UAV pairs closer than ``d_min``."""
    pts = np.asarray(positions, dtype=float)
    if pts.shape[0] < 2 or d_min <= 0:
        return 0
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    iu = np.triu_indices(pts.shape[0], k=1)
    return int(np.count_nonzero(dist[iu] < d_min))


def slot_metrics(positions, excitations, eav_position, cfg: EnvConfig) -> dict:
    """Rates, gains and secrecy for one slot of a given swarm configuration."""
    positions = np.asarray(positions, dtype=float)
    excitations = np.asarray(excitations, dtype=float)
    center = swarm_center(positions)
    rbs = np.asarray(cfg.rbs_position)
    geometry = ArrayGeometry.from_carrier(positions, excitations, cfg.channel.carrier_hz)
    steer = Direction.towards(center, rbs)
    pattern = BeamPattern(geometry, steer, cfg.quad)
    gain_rbs = pattern.gain(steer)
    gain_eav = pattern.gain(Direction.towards(center, eav_position))
    ch_rbs = average_channel_gain(center, rbs, cfg.channel)
    ch_eav = average_channel_gain(center, eav_position, cfg.channel)
    if cfg.power_mode == "excitation":
        power = cfg.p_elem * float(np.sum(excitations ** 2))
    else:
        power = cfg.p_elem * len(excitations)
    r_s = link_rate(power, ch_rbs, gain_rbs, cfg.channel)
    r_e = link_rate(power, ch_eav, gain_eav, cfg.channel)
    return {
        "rate_rbs": r_s,
        "rate_eav": r_e,
        "secrecy_rate_bpshz": secrecy_rate(r_s, r_e),
        "gain_rbs": gain_rbs,
        "gain_eav": gain_eav,
        "channel_rbs": ch_rbs,
        "channel_eav": ch_eav,
        "tx_power_w": power,
        "degenerate_beam": pattern.degenerate,
    }


class SwarmEnv:
    """One episode at a time; single-threaded, all randomness from the reset seed."""

    max_placement_attempts = 10_000

    def __init__(self, cfg: EnvConfig = EnvConfig()):
        self.cfg = cfg
        self.state: Optional[SwarmState] = None
        self.eav: Optional[EavesdropperState] = None
        self.slot = 0
        self._rng = np.random.default_rng(0)

    @property
    def obs_dim(self) -> int:
        return self.cfg.obs_dim

    @property
    def action_dim(self) -> int:
        return self.cfg.action_dim

    def _place_uavs(self):
        cfg = self.cfg
        low, high = cfg.box_low, cfg.box_high
        placed = []
        attempts = 0
        while len(placed) < cfg.n_uavs:
            attempts += 1
            if attempts > self.max_placement_attempts:
                raise ConfigError(
                    f"could not place {cfg.n_uavs} UAVs {cfg.d_min} m apart in the deployment box")
            p = self._rng.uniform(low, high)
            if all(np.linalg.norm(p - q) >= cfg.d_min for q in placed):
                placed.append(p)
        return np.array(placed)

    def reset(self, seed: Optional[int] = None, positions=None) -> np.ndarray:
        """Start an episode.  ``positions`` (K, 3) skips the random placement."""
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        cfg = self.cfg
        k = cfg.n_uavs
        if positions is None:
            positions = self._place_uavs()
        else:
            positions = np.array(positions, dtype=float).reshape(k, 3)
            if np.any(positions < cfg.box_low) or np.any(positions > cfg.box_high):
                raise ValueError("initial positions must lie inside the deployment box")
        self.state = SwarmState(positions, np.zeros((k, 3)), np.full(k, 0.5))
        e = cfg.eav
        xy = self._rng.uniform([e.x_bounds[0], e.y_bounds[0]], [e.x_bounds[1], e.y_bounds[1]])
        heading = self._rng.uniform(-math.pi, math.pi)
        self.eav = EavesdropperState(np.array([xy[0], xy[1], 0.0]), e.mean_speed, heading)
        self.slot = 0
        return self.observe()

    def observe(self) -> np.ndarray:
        cfg = self.cfg
        pos = encode_positions(self.state.positions, cfg.box_low, cfg.box_high).reshape(-1)
        e = cfg.eav
        eav = encode_positions(self.eav.position[:2], [e.x_bounds[0], e.y_bounds[0]],
                               [e.x_bounds[1], e.y_bounds[1]])
        return np.concatenate([pos, eav])

    def step(self, action) -> StepOutcome:
        cfg = self.cfg
        if self.state is None:
            raise RuntimeError("call reset() before step()")
        if self.slot >= cfg.slots_per_episode:
            raise RuntimeError("episode is over; call reset()")
        action = np.asarray(action, dtype=float).reshape(-1)
        if action.shape[0] != cfg.action_dim:
            raise ValueError(f"action must have length {cfg.action_dim}, got {action.shape[0]}")
        targets, excitations = decode_action(action, self.state, cfg)
        velocities = (targets - self.state.positions) / cfg.slot_seconds
        self.state = SwarmState(targets, velocities, excitations)

        info = slot_metrics(targets, excitations, self.eav.position, cfg)
        energy = swarm_energy(velocities, cfg.slot_seconds, cfg.rotor)
        violations = pair_violations(targets, cfg.d_min)
        r_se = cfg.w_secrecy * info["secrecy_rate_bpshz"]
        r_e = -cfg.w_energy * energy / 1000.0
        r_p = -cfg.penalty * violations
        reward = r_se + r_e + r_p
        info.update(energy_j=energy, violations=violations, reward_secrecy=r_se,
                    reward_energy=r_e, reward_penalty=r_p, slot=self.slot,
                    eav_position=self.eav.position.copy())

        self.eav = gauss_markov_step(self.eav, cfg.eav, self._rng, cfg.slot_seconds)
        self.slot += 1
        terminal = self.slot >= cfg.slots_per_episode
        return StepOutcome(self.observe(), float(reward), terminal, info)


def episode_return(outcomes):
    """(total reward, mean secrecy rate per step, mean energy per step) of one episode."""
    outcomes = list(outcomes)
    if not outcomes:
        raise ValueError("episode_return needs at least one step")
    rewards = [o.reward for o in outcomes]
    secrecy = [o.info["secrecy_rate_bpshz"] for o in outcomes]
    energy = [o.info["energy_j"] for o in outcomes]
    return float(np.sum(rewards)), float(np.mean(secrecy)), float(np.mean(energy))
