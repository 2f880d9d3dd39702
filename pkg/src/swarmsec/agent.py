"""Twin-critic delayed actor-critic learner with a diffusion (or plain MLP) actor."""
from __future__ import annotations

import dataclasses
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import nn
from .diffusion import SCHEDULES, DiffusionActor, MLPActor, build_schedule
from .errors import CheckpointError, ConfigError, TrainingError

ALIASES = {"T": "denoise_steps", "d": "policy_delay", "M": "episodes", "B": "batch_size",
           "D": "buffer_capacity"}


@dataclass(frozen=True)
class AgentConfig:
    gamma: float = 0.9
    tau: float = 0.005
    policy_delay: int = 2
    denoise_steps: int = 4
    schedule: str = "vp"
    beta_min: float = 0.1
    beta_max: float = 10.0
    actor: str = "diffusion"          # or "mlp" for the plain TD3 ablation
    expl_noise: float = 0.1
    smooth_noise: float = 0.2
    smooth_clip: float = 0.5
    episodes: int = 8000
    warmup: int = 1000
    batch_size: int = 128
    buffer_capacity: int = 2_000_000
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    hidden: int = 256
    emb_dim: int = 16
    final_scale: float = 0.1          # shrink factor of the diffusion actor's output layer
    actor_skip: bool = True           # analytic x_t term in the noise predictor

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if not 0.0 <= self.tau <= 1.0:
            raise ConfigError("tau must lie in [0, 1]")
        for name in ("policy_delay", "denoise_steps", "episodes", "batch_size", "buffer_capacity",
                     "hidden", "emb_dim"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be at least 1")
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"unknown schedule {self.schedule!r}; valid: {', '.join(SCHEDULES)}")
        if self.actor not in ("diffusion", "mlp"):
            raise ConfigError("actor must be 'diffusion' or 'mlp'")
        if self.emb_dim % 2:
            raise ConfigError("emb_dim must be even")
        if min(self.expl_noise, self.smooth_noise, self.smooth_clip) < 0:
            raise ConfigError("noise scales must be non-negative")
        if self.warmup < self.batch_size:
            raise ConfigError("warmup must be at least batch_size so the first update has a full batch")
        if self.buffer_capacity < self.batch_size:
            raise ConfigError("buffer_capacity must be at least batch_size")
        if not (self.lr_actor > 0 and self.lr_critic > 0):
            raise ConfigError("learning rates must be positive")
        # fail early on schedules that leave (0, 1)
        build_schedule(self.denoise_steps, self.beta_min, self.beta_max, self.schedule)

    @classmethod
    def from_dict(cls, values: dict) -> "AgentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        out = {}
        for key, value in values.items():
            name = ALIASES.get(key, key)
            if name not in known:
                raise ConfigError(f"unknown agent setting {key!r}")
            if name in out:
                raise ConfigError(f"agent setting {name!r} given twice")
            out[name] = value
        return cls(**out)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class ReplayBuffer:
    """Ring buffer of transitions.  Storage grows by doubling until it reaches ``capacity``."""

    def __init__(self, obs_dim: int, act_dim: int, capacity: int, initial: int = 1024):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.size = 0
        self._next = 0
        n = min(self.capacity, initial)
        self.obs = np.empty((n, obs_dim))
        self.act = np.empty((n, act_dim))
        self.rew = np.empty(n)
        self.next_obs = np.empty((n, obs_dim))
        self.done = np.empty(n)

    def __len__(self):
        return self.size

    def _grow(self):
        n = min(self.capacity, 2 * len(self.rew))
        for name in ("obs", "act", "rew", "next_obs", "done"):
            old = getattr(self, name)
            new = np.empty((n,) + old.shape[1:])
            new[:len(old)] = old
            setattr(self, name, new)

    def add(self, obs, action, reward, next_obs, terminal):
        if self._next >= len(self.rew):
            self._grow()
        i = self._next
        self.obs[i] = obs
        self.act[i] = action
        self.rew[i] = reward
        self.next_obs[i] = next_obs
        self.done[i] = float(terminal)
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int) -> dict:
        if self.size < batch_size:
            raise ValueError(f"buffer holds {self.size} transitions, fewer than the batch size {batch_size}")
        idx = rng.integers(0, self.size, size=batch_size)
        return {"obs": self.obs[idx], "act": self.act[idx], "rew": self.rew[idx],
                "next_obs": self.next_obs[idx], "done": self.done[idx]}


def critic_spec(obs_dim, act_dim, hidden):
    return nn.DenseNetSpec((obs_dim + act_dim, hidden, hidden, 1), ("relu", "relu", "linear"))


def _finite(value, what):
    if not np.isfinite(value):
        raise TrainingError(f"non-finite {what}: {value}")
    return float(value)


class Agent:
    """Parameters, targets and optimizers of one learner."""

    def __init__(self, obs_dim: int, act_dim: int, cfg: AgentConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        if cfg.actor == "diffusion":
            self.schedule = build_schedule(cfg.denoise_steps, cfg.beta_min, cfg.beta_max, cfg.schedule)
            self.actor = DiffusionActor(obs_dim, act_dim, self.schedule, cfg.hidden, cfg.emb_dim,
                                        cfg.actor_skip)
            self.actor_params = self.actor.init_params(rng, cfg.final_scale)
        else:
            self.schedule = None
            self.actor = MLPActor(obs_dim, act_dim, cfg.hidden)
            self.actor_params = self.actor.init_params(rng)
        self.critic = critic_spec(obs_dim, act_dim, cfg.hidden)
        self.critic_params = [nn.init_params(self.critic, rng), nn.init_params(self.critic, rng)]
        self.actor_target = nn.copy_params(self.actor_params)
        self.critic_targets = [nn.copy_params(p) for p in self.critic_params]
        self.actor_opt = nn.Adam(self.actor_params, lr=cfg.lr_actor)
        self.critic_opts = [nn.Adam(p, lr=cfg.lr_critic) for p in self.critic_params]
        self.critic_updates = 0
        self.actor_updates = 0

    # evaluation helpers

    def q(self, which: int, obs, act, target: bool = False):
        params = (self.critic_targets if target else self.critic_params)[which]
        return nn.forward(self.critic, params, np.concatenate([obs, act], axis=1))[:, 0]

    def act(self, obs, rng: Optional[np.random.Generator] = None, stochastic: bool = False) -> np.ndarray:
        """Policy action; stochastic mode adds the sampler noise and exploration noise."""
        a = self.actor.act(self.actor_params, obs, rng, stochastic)
        if stochastic and self.cfg.expl_noise > 0:
            a = np.clip(a + self.cfg.expl_noise * rng.standard_normal(a.shape), -1.0, 1.0)
        return a

    # updates

    def target_q(self, batch: dict, rng: np.random.Generator) -> np.ndarray:
        cfg = self.cfg
        nxt = batch["next_obs"]
        noise = self.actor.draw_noise(rng, len(nxt))
        a_next, _ = self.actor.sample(self.actor_target, nxt, noise)
        smooth = np.clip(cfg.smooth_noise * rng.standard_normal(a_next.shape), -cfg.smooth_clip, cfg.smooth_clip)
        a_next = np.clip(a_next + smooth, -1.0, 1.0)
        q1 = self.q(0, nxt, a_next, target=True)
        q2 = self.q(1, nxt, a_next, target=True)
        return bellman_target(batch["rew"], batch["done"], q1, q2, cfg.gamma)

    def critic_update(self, batch: dict, y: np.ndarray):
        """One optimizer step per critic on the mean squared error to ``y``; returns both losses."""
        x = np.concatenate([batch["obs"], batch["act"]], axis=1)
        losses = []
        for params, opt in zip(self.critic_params, self.critic_opts):
            loss, grads = critic_loss_and_grads(self.critic, params, x, y)
            _finite(loss, "critic loss")
            opt.step(params, grads)
            losses.append(loss)
        self.critic_updates += 1
        return tuple(losses)

    def actor_loss_and_grads(self, obs, noise):
        """-mean Q1(s, pi(s)) and its parameter gradients for frozen sampler noise."""
        a, cache = self.actor.sample(self.actor_params, obs, noise, record=True)
        x = np.concatenate([obs, a], axis=1)
        q, tape = nn.forward(self.critic, self.critic_params[0], x, record=True)
        loss = -float(np.mean(q))
        _, g_in = nn.backward(self.critic, self.critic_params[0], tape, np.full_like(q, -1.0 / len(q)))
        grads = self.actor.backward(self.actor_params, cache, g_in[:, self.obs_dim:])
        return loss, grads

    def actor_update(self, batch: dict, rng: np.random.Generator) -> float:
        obs = batch["obs"]
        loss, grads = self.actor_loss_and_grads(obs, self.actor.draw_noise(rng, len(obs)))
        _finite(loss, "actor loss")
        self.actor_opt.step(self.actor_params, grads)
        self.actor_updates += 1
        return loss

    def soft_update_targets(self):
        nn.soft_update(self.actor_target, self.actor_params, self.cfg.tau)
        for tgt, online in zip(self.critic_targets, self.critic_params):
            nn.soft_update(tgt, online, self.cfg.tau)

    # persistence

    _GROUPS = ("actor", "actor_target", "critic0", "critic1", "critic_target0", "critic_target1")

    def _group(self, name):
        return {"actor": self.actor_params, "actor_target": self.actor_target,
                "critic0": self.critic_params[0], "critic1": self.critic_params[1],
                "critic_target0": self.critic_targets[0], "critic_target1": self.critic_targets[1]}[name]

    def state_arrays(self) -> dict:
        out = {}
        for g in self._GROUPS:
            for i, p in enumerate(self._group(g)):
                out[f"{g}/{i}"] = p
        for name, opt in (("opt_actor", self.actor_opt), ("opt_critic0", self.critic_opts[0]),
                          ("opt_critic1", self.critic_opts[1])):
            for k, v in opt.state_arrays().items():
                out[f"{name}/{k}"] = v
        if self.schedule is not None:
            out["schedule/betas"] = self.schedule.betas
        out["counters"] = np.array([self.critic_updates, self.actor_updates])
        return out

    def save(self, path, meta: dict):
        meta = dict(meta, agent=self.cfg.to_dict(), obs_dim=self.obs_dim, act_dim=self.act_dim)
        nn.save_arrays(path, self.state_arrays(), meta)

    @classmethod
    def load(cls, path):
        arrays, meta = nn.load_arrays(path)
        try:
            cfg = AgentConfig(**meta["agent"])
            agent = cls(int(meta["obs_dim"]), int(meta["act_dim"]), cfg, np.random.default_rng(0))
            for g in cls._GROUPS:
                params = agent._group(g)
                for i in range(len(params)):
                    src = arrays[f"{g}/{i}"]
                    if src.shape != params[i].shape:
                        raise CheckpointError(f"{g}/{i}: shape {src.shape} does not fit the network")
                    params[i][...] = src
            for name, opt in (("opt_actor", agent.actor_opt), ("opt_critic0", agent.critic_opts[0]),
                              ("opt_critic1", agent.critic_opts[1])):
                prefix = name + "/"
                opt.load_state_arrays({k[len(prefix):]: v for k, v in arrays.items() if k.startswith(prefix)})
            agent.critic_updates, agent.actor_updates = (int(v) for v in arrays["counters"])
        except CheckpointError:
            raise
        except (KeyError, TypeError, ValueError, ConfigError) as exc:
            raise CheckpointError(f"checkpoint {path} does not describe a valid agent: {exc}") from exc
        return agent, meta


def critic_loss_and_grads(spec, params, x, y):
    q, tape = nn.forward(spec, params, x, record=True)
    err = q[:, 0] - y
    grads, _ = nn.backward(spec, params, tape, (2.0 / len(y)) * err[:, None])
    return float(np.mean(err * err)), grads


def bellman_target(rew, done, q1, q2, gamma):
    return rew + gamma * (1.0 - done) * np.minimum(q1, q2)


@dataclass
class TrainingLog:
    steps: list = field(default_factory=list)     # (episode, step, reward, secrecy, energy, violations)
    episodes: list = field(default_factory=list)  # dicts, one per episode
    critic_updates: int = 0
    actor_updates: int = 0
    wall_ms: list = field(default_factory=list)   # per step, measured only when timing is on

    def episode_returns(self):
        return [e["return"] for e in self.episodes]


def seed_streams(seed: int):
    """Independent generators for init, acting, replay sampling, update noise and env resets."""
    children = np.random.SeedSequence(seed).spawn(5)
    return [np.random.default_rng(c) for c in children]


def train(env, cfg: AgentConfig, seed: int, episodes: Optional[int] = None, timing: bool = False,
          callback=None, step_hook=None):
    """Run the learner on ``env`` and return ``(agent, log)``.

    Update schedule, in global environment steps: the first ``warmup`` steps
    act uniformly at random and do not update.  Every later step performs one
    critic update; every ``policy_delay``-th critic update also updates the
    actor and soft-updates all targets.

    ``callback(record)`` is called after each episode and
    ``step_hook(agent, global_step)`` after each environment step.
    """
    episodes = cfg.episodes if episodes is None else int(episodes)
    init_rng, act_rng, buf_rng, upd_rng, env_rng = seed_streams(seed)
    agent = Agent(env.obs_dim, env.action_dim, cfg, init_rng)
    buffer = ReplayBuffer(env.obs_dim, env.action_dim, cfg.buffer_capacity)
    log = TrainingLog()
    global_step = 0
    for ep in range(episodes):
        obs = env.reset(int(env_rng.integers(0, 2**63 - 1)))
        step = 0
        ep_return = 0.0
        c_losses, a_losses = [], []
        sec, en = [], []
        while True:
            t0 = time.perf_counter() if timing else 0.0
            if global_step < cfg.warmup:
                action = act_rng.uniform(-1.0, 1.0, env.action_dim)
            else:
                action = agent.act(obs, act_rng, stochastic=True)
            out = env.step(action)
            buffer.add(obs, action, out.reward, out.observation, out.terminal)
            global_step += 1
            if global_step > cfg.warmup:
                batch = buffer.sample(buf_rng, cfg.batch_size)
                y = agent.target_q(batch, upd_rng)
                c_losses.append(agent.critic_update(batch, y))
                if agent.critic_updates % cfg.policy_delay == 0:
                    a_losses.append(agent.actor_update(batch, upd_rng))
                    agent.soft_update_targets()
            if step_hook is not None:
                step_hook(agent, global_step)
            info = out.info
            s = float(info.get("secrecy_rate_bpshz", 0.0))
            e = float(info.get("energy_j", 0.0))
            log.steps.append((ep, step, float(out.reward), s, e, int(info.get("violations", 0))))
            log.wall_ms.append((time.perf_counter() - t0) * 1000.0 if timing else 0.0)
            sec.append(s)
            en.append(e)
            ep_return += out.reward
            step += 1
            obs = out.observation
            if out.terminal:
                break
        record = {"episode": ep, "return": ep_return, "steps": step,
                  "secrecy_mean": float(np.mean(sec)), "energy_mean": float(np.mean(en)),
                  "critic_loss": float(np.mean(c_losses)) if c_losses else float("nan"),
                  "actor_loss": float(np.mean(a_losses)) if a_losses else float("nan")}
        log.episodes.append(record)
        if callback is not None:
            callback(record)
    log.critic_updates = agent.critic_updates
    log.actor_updates = agent.actor_updates
    return agent, log


def evaluate_agent(agent: Agent, env, episodes: int, seed: int):
    """Deterministic-mode rollouts; returns per-episode lists of (reward, secrecy, energy, violations)."""
    if episodes < 1:
        raise ValueError("episodes must be at least 1")
    seeds = np.random.SeedSequence(seed).spawn(episodes)
    out_steps = []
    for ss in seeds:
        obs = env.reset(int(ss.generate_state(1)[0]))
        rows = []
        while True:
            out = env.step(agent.act(obs, stochastic=False))
            info = out.info
            rows.append((float(out.reward), float(info.get("secrecy_rate_bpshz", 0.0)),
                         float(info.get("energy_j", 0.0)), int(info.get("violations", 0))))
            obs = out.observation
            if out.terminal:
                break
        out_steps.append(rows)
    return out_steps
