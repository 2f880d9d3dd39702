"""Run orchestration: training, evaluation, baselines and sweeps with on-disk outputs.

Layout of one run directory (``<root>/<label>/seed_<s>/``)::

    config.toml     resolved configuration
    seeds.txt       every seed of the invocation, this run's seed first
    metrics.csv     one row per environment step
    manifest.json   config hash, counters, summary
    checkpoint.npz  trained parameters (training runs only)
"""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .agent import Agent, evaluate_agent, train
from .baselines import STRATEGIES, evaluate_strategy
from .config import ExperimentConfig, from_dict, hash_dict, load_config, write_config
from .environment import SwarmEnv
from .errors import CheckpointError, ConfigError

log = logging.getLogger(__name__)

METRICS_HEADER = ("episode", "step", "reward", "secrecy_rate_bpshz", "energy_j", "violations", "wall_ms")
SWEEP_AXES = ("seed", "schedule", "denoise_steps", "n_uavs")
SWEEP_HEADER = ("axis", "value", "label", "n_seeds", "episode_return_mean", "episode_return_std",
                "reward_mean", "secrecy_rate_bpshz_mean", "secrecy_rate_bpshz_std",
                "energy_j_mean", "energy_j_std", "violations_mean")


def write_metrics(path, rows) -> None:
    """``rows``: (episode, step, reward, secrecy, energy, violations, wall_ms) tuples."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for ep, st, rew, sec, en, vio, ms in rows:
            w.writerow((int(ep), int(st), float(rew), float(sec), float(en), int(vio), float(ms)))


def read_metrics(path) -> list:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if tuple(header) != METRICS_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [(int(a), int(b), float(c), float(d), float(e), int(f), float(g)) for a, b, c, d, e, f, g in r]


def episode_rows(per_episode) -> list:
    """Flatten per-episode (reward, secrecy, energy, violations) lists into CSV rows."""
    return [(ep, st, *row, 0.0) for ep, rows in enumerate(per_episode) for st, row in enumerate(rows)]


def summarize(per_episode) -> dict:
    """Mean and across-episode std of the per-step secrecy rate and energy."""
    if not per_episode:
        raise ValueError("nothing to summarize")
    sec = np.array([np.mean([r[1] for r in rows]) for rows in per_episode])
    en = np.array([np.mean([r[2] for r in rows]) for rows in per_episode])
    ret = np.array([np.sum([r[0] for r in rows]) for rows in per_episode])
    vio = np.array([np.mean([r[3] for r in rows]) for rows in per_episode])
    return {"episodes": len(per_episode),
            "secrecy_rate_bpshz_mean": float(sec.mean()), "secrecy_rate_bpshz_std": float(sec.std()),
            "energy_j_mean": float(en.mean()), "energy_j_std": float(en.std()),
            "episode_return_mean": float(ret.mean()), "episode_return_std": float(ret.std()),
            "reward_mean": float(np.mean([r[0] for rows in per_episode for r in rows])),
            "violations_mean": float(vio.mean())}


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _prepare(run_dir: Path, cfg: ExperimentConfig, seed: int) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    write_config(cfg, run_dir / "config.toml")
    others = [s for s in cfg.run.seeds if s != seed]
    (run_dir / "seeds.txt").write_text("".join(f"{s}\n" for s in [seed] + others))


def _manifest(command, cfg: ExperimentConfig, seed, **extra) -> dict:
    return dict(command=command, label=cfg.run.label, seed=seed, seeds=list(cfg.run.seeds),
                config_hash=cfg.config_hash(), version=__version__, **extra)


def run_dir_for(root: Path, seed: int) -> Path:
    return root / f"seed_{seed}"


# training


def save_checkpoint(agent: Agent, cfg: ExperimentConfig, path) -> None:
    agent.save(path, {"config": cfg.model_dict(), "config_hash": cfg.config_hash()})


def load_checkpoint(path, expected_hash: Optional[str] = None):
    """Load an agent and the configuration it was trained with; verifies the config hash."""
    agent, meta = Agent.load(path)
    try:
        stored = meta["config"]
        recorded = meta["config_hash"]
    except KeyError as exc:
        raise CheckpointError(f"{path}: checkpoint carries no experiment configuration") from exc
    if hash_dict(stored) != recorded:
        raise CheckpointError(f"{path}: stored configuration does not match its hash")
    if expected_hash is not None and expected_hash != recorded:
        raise CheckpointError(f"{path}: trained with config {recorded[:12]}, expected {expected_hash[:12]}")
    try:
        cfg = from_dict(stored)
    except ConfigError as exc:
        raise CheckpointError(f"{path}: stored configuration is invalid: {exc}") from exc
    if cfg.agent != agent.cfg:
        raise CheckpointError(f"{path}: agent settings disagree with the stored configuration")
    return agent, cfg


def hover_agent(cfg: ExperimentConfig) -> Agent:
    """Agent whose deterministic action is zero displacement (hover) at half excitation."""
    agent = Agent(cfg.env.obs_dim, cfg.env.action_dim, cfg.agent, np.random.default_rng(0))
    for p in agent.actor_params:
        p[...] = 0.0
    return agent


def final_window(train_log, window: int) -> list:
    """Per-episode step tuples (reward, secrecy, energy, violations) of the last ``window`` episodes."""
    by_ep = {}
    for ep, _, rew, sec, en, vio in train_log.steps:
        by_ep.setdefault(ep, []).append((rew, sec, en, vio))
    eps = sorted(by_ep)[-window:]
    return [by_ep[e] for e in eps]


def train_one(cfg: ExperimentConfig, seed: int, root: Path) -> dict:
    run_dir = run_dir_for(root, seed)
    _prepare(run_dir, cfg, seed)
    env = SwarmEnv(cfg.env)

    def progress(rec):
        if (rec["episode"] + 1) % 10 == 0:
            log.info("seed %d episode %d return %.4f secrecy %.4f energy %.1f", seed, rec["episode"] + 1,
                     rec["return"], rec["secrecy_mean"], rec["energy_mean"])

    agent, tlog = train(env, cfg.agent, seed, timing=cfg.run.timing, callback=progress)
    rows = [(*s, ms) for s, ms in zip(tlog.steps, tlog.wall_ms)]
    write_metrics(run_dir / "metrics.csv", rows)
    save_checkpoint(agent, cfg, run_dir / "checkpoint.npz")
    summary = summarize(final_window(tlog, cfg.run.final_window))
    _write_json(run_dir / "manifest.json", _manifest(
        "train", cfg, seed, critic_updates=tlog.critic_updates, actor_updates=tlog.actor_updates,
        final_window=cfg.run.final_window, summary=summary))
    return summary


def run_train(cfg: ExperimentConfig, root: Optional[Path] = None) -> dict:
    root = Path(root) if root is not None else cfg.output_root() / cfg.run.label
    return {seed: train_one(cfg, seed, root) for seed in cfg.run.seeds}


# evaluation


def run_evaluate(checkpoint, episodes: int, seed: int, out_dir=None, expected_hash=None) -> dict:
    checkpoint = Path(checkpoint)
    if expected_hash is None:
        sibling = checkpoint.parent / "config.toml"
        if sibling.exists():
            expected_hash = load_config(sibling).config_hash()
    agent, cfg = load_checkpoint(checkpoint, expected_hash)
    if episodes < 1:
        raise ConfigError("episodes must be at least 1")
    per_episode = evaluate_agent(agent, SwarmEnv(cfg.env), episodes, seed)
    out = Path(out_dir) if out_dir is not None else checkpoint.parent / f"eval_seed_{seed}"
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(out / "metrics.csv", episode_rows(per_episode))
    summary = summarize(per_episode)
    _write_json(out / "summary.json", dict(summary, checkpoint=str(checkpoint), seed=seed,
                                           config_hash=cfg.config_hash()))
    return summary


# baselines


def baseline_one(name: str, cfg: ExperimentConfig, seed: int, root: Path) -> dict:
    if name not in STRATEGIES:
        raise ConfigError(f"unknown strategy {name!r}; valid: {', '.join(STRATEGIES)}")
    run_dir = run_dir_for(root, seed)
    _prepare(run_dir, cfg, seed)
    metrics = evaluate_strategy(name, cfg.env, cfg.run.eval_episodes, seed)
    write_metrics(run_dir / "metrics.csv", episode_rows(metrics.steps))
    summary = summarize(metrics.steps)
    _write_json(run_dir / "manifest.json", _manifest("baseline", cfg, seed, strategy=name, summary=summary))
    return summary


def run_baseline(name: str, cfg: ExperimentConfig, root: Optional[Path] = None) -> dict:
    if name not in STRATEGIES:
        raise ConfigError(f"unknown strategy {name!r}; valid: {', '.join(STRATEGIES)}")
    root = Path(root) if root is not None else cfg.output_root() / cfg.run.label
    return {seed: baseline_one(name, cfg, seed, root) for seed in cfg.run.seeds}


# sweeps


def sweep_configs(axis: str, values, base: ExperimentConfig):
    """(value, config) pairs for one sweep axis; values arrive as parsed literals or strings."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; valid: {', '.join(SWEEP_AXES)}")
    values = list(values)
    if not values:
        raise ConfigError("a sweep needs at least one value")
    out = []
    for v in values:
        try:
            if axis == "seed":
                cfg = base.replace("run", seeds=(int(v),))
            elif axis == "schedule":
                cfg = base.replace("agent", schedule=str(v))
            elif axis == "denoise_steps":
                cfg = base.replace("agent", denoise_steps=int(v))
            else:
                cfg = base.replace("env", n_uavs=int(v))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value {v!r} for sweep axis {axis}: {exc}") from exc
        out.append((v, cfg))
    return out


def _aggregate(per_seed: list) -> dict:
    def col(key):
        return np.array([s[key] for s in per_seed])
    return {"n_seeds": len(per_seed),
            "episode_return_mean": float(col("episode_return_mean").mean()),
            "episode_return_std": float(col("episode_return_mean").std()),
            "reward_mean": float(col("reward_mean").mean()),
            "secrecy_rate_bpshz_mean": float(col("secrecy_rate_bpshz_mean").mean()),
            "secrecy_rate_bpshz_std": float(col("secrecy_rate_bpshz_mean").std()),
            "energy_j_mean": float(col("energy_j_mean").mean()),
            "energy_j_std": float(col("energy_j_mean").std()),
            "violations_mean": float(col("violations_mean").mean())}


def run_sweep(axis: str, values, base: ExperimentConfig, strategy: Optional[str] = None,
              root: Optional[Path] = None) -> Path:
    """Run every configuration of the sweep and write ``sweep_<axis>.csv``; returns its path."""
    if strategy is not None and strategy not in STRATEGIES:
        raise ConfigError(f"unknown strategy {strategy!r}; valid: {', '.join(STRATEGIES)}")
    root = Path(root) if root is not None else base.output_root() / base.run.label
    configs = sweep_configs(axis, values, base)
    rows = []
    for value, cfg in configs:
        label = f"{axis}-{value}"
        sub = root / label
        if strategy is None:
            results = run_train(cfg, sub)
        else:
            results = run_baseline(strategy, cfg, sub)
        agg = _aggregate([results[s] for s in cfg.run.seeds])
        rows.append({"axis": axis, "value": value, "label": label, **agg})
    path = root / f"sweep_{axis}.csv"
    root.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_HEADER, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    return path
