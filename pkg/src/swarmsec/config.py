"""Experiment configuration: TOML files, dotted overrides, hashing."""
from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import tomli
import tomli_w

from .agent import ALIASES, AgentConfig
from .beamforming import GainQuadrature
from .channel import ChannelParams
from .energy import RotorcraftParams
from .environment import EnvConfig, GaussMarkovParams
from .errors import ConfigError

OUTPUT_ROOT_VAR = "SWARMSEC_OUTPUT_ROOT"

_NESTED = {"channel": ChannelParams, "rotor": RotorcraftParams, "quad": GainQuadrature,
           "eav": GaussMarkovParams}


@dataclass(frozen=True)
class RunSettings:
    label: str = "gdmtd3"
    seeds: tuple = (0,)
    output_dir: str = ""
    eval_episodes: int = 10
    final_window: int = 50
    timing: bool = False

    def __post_init__(self):
        if not self.label or any(c in self.label for c in "/\\") or self.label in (".", ".."):
            raise ConfigError(f"run label {self.label!r} is not a valid directory name")
        seeds = tuple(int(s) for s in self.seeds)
        if not seeds:
            raise ConfigError("at least one seed is required")
        if any(s < 0 for s in seeds):
            raise ConfigError("seeds must be non-negative")
        if len(set(seeds)) != len(seeds):
            raise ConfigError("seeds must be distinct")
        object.__setattr__(self, "seeds", seeds)
        if int(self.eval_episodes) < 1 or int(self.final_window) < 1:
            raise ConfigError("eval_episodes and final_window must be at least 1")


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def output_root(self) -> Path:
        if self.run.output_dir:
            return Path(self.run.output_dir)
        return Path(os.environ.get(OUTPUT_ROOT_VAR) or "runs")

    def to_dict(self) -> dict:
        return {"run": _plain(self.run), "env": _plain(self.env), "agent": _plain(self.agent)}

    def model_dict(self) -> dict:
        """The part of the configuration a trained agent depends on."""
        d = self.to_dict()
        return {"env": d["env"], "agent": d["agent"]}

    def config_hash(self) -> str:
        return hash_dict(self.model_dict())

    def replace(self, section: str, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **changes)})


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (tuple, list)):
        return [_plain(v) for v in obj]
    return obj


def hash_dict(d: dict) -> str:
    canon = json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode()).hexdigest()


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"[{where}] must be a table")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(unknown)}")
    kwargs = {}
    for key, value in data.items():
        if cls is EnvConfig and key in _NESTED:
            value = _build(_NESTED[key], value, f"{where}.{key}")
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


def from_dict(data: dict) -> ExperimentConfig:
    unknown = sorted(set(data) - {"run", "env", "agent"})
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    agent = {ALIASES.get(k, k): v for k, v in data.get("agent", {}).items()}
    return ExperimentConfig(env=_build(EnvConfig, data.get("env", {}), "env"),
                            agent=_build(AgentConfig, agent, "agent"),
                            run=_build(RunSettings, data.get("run", {}), "run"))


def default_dict() -> dict:
    text = resources.files("swarmsec").joinpath("defaults.toml").read_text()
    return tomli.loads(text)


def read_toml(path) -> dict:
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc


def merge(base: dict, extra: dict, where: str = "") -> dict:
    """Recursive dict update; tables may only override tables."""
    out = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict):
            if key in out and not isinstance(out[key], dict):
                raise ConfigError(f"{where}{key} is a value, not a table")
            out[key] = merge(out.get(key, {}), value, f"{where}{key}.")
        else:
            if isinstance(out.get(key), dict):
                raise ConfigError(f"{where}{key} is a table, not a value")
            out[key] = value
    return out


def parse_value(text: str):
    """Interpret an override value as a TOML literal, falling back to a bare string."""
    try:
        return tomli.loads(f"v = {text}")["v"]
    except tomli.TOMLDecodeError:
        return text


def apply_overrides(data: dict, overrides) -> dict:
    """``overrides`` is a sequence of ``("agent.T", "8")`` pairs."""
    out = copy.deepcopy(data)
    for dotted, raw in overrides:
        parts = dotted.split(".")
        if len(parts) < 2 or not all(parts):
            raise ConfigError(f"override {dotted!r} must look like section.key")
        if parts[0] == "agent" and len(parts) == 2:
            parts[1] = ALIASES.get(parts[1], parts[1])
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {dotted!r} descends into a value")
        node[parts[-1]] = parse_value(raw)
    return out


def load_config(path=None, overrides=()) -> ExperimentConfig:
    data = default_dict()
    if path is not None:
        user = read_toml(path)
        if "agent" in user:
            user["agent"] = {ALIASES.get(k, k): v for k, v in user["agent"].items()}
        data = merge(data, user)
    return from_dict(apply_overrides(data, overrides))


def write_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(tomli_w.dumps(cfg.to_dict()))


def split_overrides(tokens) -> list:
    """Turn ``["--agent.T", "8", "--env.n_uavs=4"]`` into ``[("agent.T", "8"), ("env.n_uavs", "4")]``."""
    out = []
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--") or "." not in tok:
            raise ConfigError(f"unrecognised argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            value = next(it, None)
            if value is None:
                raise ConfigError(f"override {tok} needs a value")
        out.append((key, value))
    return out


def resolve_output(cfg: ExperimentConfig, label: Optional[str] = None) -> Path:
    return cfg.output_root() / (label or cfg.run.label)
