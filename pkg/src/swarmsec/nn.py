"""Small dense networks with hand-written reverse mode, Adam and soft updates.

Conventions: inputs are batch-first ``(B, in)``; layer ``i`` computes
``act_i(x @ W_i + b_i)`` with ``W_i`` of shape ``(in, out)``.  A parameter set
is a flat list ``[W_0, b_0, W_1, b_1, ...]`` so optimisers and soft updates
can treat every network alike.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .errors import CheckpointError, TrainingError

ParamSet = List[np.ndarray]

ACTIVATIONS = ("relu", "mish", "tanh", "linear")


def softplus(x):
    return np.logaddexp(0.0, x)


def sigmoid(x):
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def mish(x):
    return x * np.tanh(softplus(x))


def mish_grad(x):
    tsp = np.tanh(softplus(x))
    return tsp + x * (1.0 - tsp * tsp) * sigmoid(x)


def relu(x):
    return np.maximum(x, 0.0)


def _activate(name, z):
    if name == "relu":
        return relu(z)
    if name == "mish":
        return mish(z)
    if name == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(name, z, a):
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "mish":
        return mish_grad(z)
    if name == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


@dataclass(frozen=True)
class DenseNetSpec:
    sizes: tuple
    activations: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        acts = tuple(self.activations)
        if len(sizes) < 2 or any(s <= 0 for s in sizes):
            raise ValueError("need at least input and output widths, all positive")
        if len(acts) != len(sizes) - 1:
            raise ValueError("one activation per layer")
        bad = [a for a in acts if a not in ACTIVATIONS]
        if bad:
            raise ValueError(f"unknown activation(s) {bad}")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "activations", acts)

    @property
    def n_layers(self) -> int:
        return len(self.activations)

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    @classmethod
    def mlp(cls, in_dim, hidden: Sequence[int], out_dim, hidden_act="relu", out_act="linear"):
        sizes = (in_dim, *hidden, out_dim)
        return cls(sizes, tuple([hidden_act] * len(hidden) + [out_act]))


def init_params(spec: DenseNetSpec, rng: np.random.Generator, final_scale: float = 1.0) -> ParamSet:
    """Fan-in scaled uniform initialisation; the last layer is shrunk by ``final_scale``."""
    params = []
    for i in range(spec.n_layers):
        fan_in, fan_out = spec.sizes[i], spec.sizes[i + 1]
        bound = 1.0 / np.sqrt(fan_in)
        if i == spec.n_layers - 1:
            bound *= final_scale
        params.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        params.append(rng.uniform(-bound, bound, size=(fan_out,)))
    return params


@dataclass
class Tape:
    inputs: list = field(default_factory=list)       # layer inputs
    pre: list = field(default_factory=list)          # pre-activations
    post: list = field(default_factory=list)         # activations


def forward(spec: DenseNetSpec, params: ParamSet, x, record: bool = False):
    """Returns ``y`` or ``(y, tape)`` when ``record`` is set."""
    h = np.asarray(x, dtype=float)
    squeeze = h.ndim == 1
    if squeeze:
        h = h[None, :]
    if h.shape[-1] != spec.in_dim:
        raise ValueError(f"expected input width {spec.in_dim}, got {h.shape[-1]}")
    tape = Tape() if record else None
    for i, act in enumerate(spec.activations):
        z = h @ params[2 * i] + params[2 * i + 1]
        a = _activate(act, z)
        if record:
            tape.inputs.append(h)
            tape.pre.append(z)
            tape.post.append(a)
        h = a
    if squeeze and not record:
        h = h[0]
    return (h, tape) if record else h


def backward(spec: DenseNetSpec, params: ParamSet, tape: Tape, grad_out):
    """Reverse pass of a recorded forward; returns (parameter grads, input grad)."""
    g = np.asarray(grad_out, dtype=float)
    if g.ndim == 1:
        g = g[None, :]
    grads = [None] * len(params)
    for i in reversed(range(spec.n_layers)):
        act = spec.activations[i]
        gz = g * _activation_grad(act, tape.pre[i], tape.post[i])
        grads[2 * i] = tape.inputs[i].T @ gz
        grads[2 * i + 1] = gz.sum(axis=0)
        g = gz @ params[2 * i].T
    return grads, g


def sinusoidal_embed(t, dim: int) -> np.ndarray:
    """Interleaved sin/cos embedding of diffusion step(s) ``t``.

    Frequencies are geometric, from 1 down to 1e-4 (wavelengths 1 .. 1e4).
    """
    if dim % 2 or dim <= 0:
        raise ValueError("embedding dimension must be a positive even number")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("step index must be non-negative")
    half = dim // 2
    freqs = np.exp(-np.log(10_000.0) * np.arange(half) / max(1, half - 1)) if half > 1 else np.ones(1)
    args = t[..., None] * freqs
    out = np.empty(t.shape + (dim,))
    out[..., 0::2] = np.sin(args)
    out[..., 1::2] = np.cos(args)
    return out


class Adam:
    """Bias-corrected Adam acting in place on a parameter list."""

    def __init__(self, params: ParamSet, lr: float = 3e-4, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]

    def step(self, params: ParamSet, grads: ParamSet) -> ParamSet:
        if len(grads) != len(params):
            raise ValueError("one gradient per parameter array")
        for g, p in zip(grads, params):
            if g.shape != p.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
            if not np.all(np.isfinite(g)):
                raise TrainingError("non-finite gradient; optimizer step rejected")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return params

    def state_arrays(self) -> dict:
        out = {"t": np.array(self.t)}
        for i, (m, v) in enumerate(zip(self.m, self.v)):
            out[f"m{i}"] = m
            out[f"v{i}"] = v
        return out

    def load_state_arrays(self, arrays: dict):
        self.t = int(arrays["t"])
        self.m = [np.array(arrays[f"m{i}"]) for i in range(len(self.m))]
        self.v = [np.array(arrays[f"v{i}"]) for i in range(len(self.v))]


def soft_update(target: ParamSet, online: ParamSet, tau: float) -> ParamSet:
    """Polyak averaging in place: target <- tau * online + (1 - tau) * target."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must lie in [0, 1]")
    for t, o in zip(target, online):
        if t.shape != o.shape:
            raise ValueError("parameter shapes differ")
        t *= (1.0 - tau)
        t += tau * o
    return target


def copy_params(params: ParamSet) -> ParamSet:
    return [p.copy() for p in params]


# checkpoint files: one .npz holding named arrays plus a JSON manifest entry
# "__manifest__" = {"format": 1, "arrays": {name: [shape...]}, "meta": {...}}

CHECKPOINT_FORMAT = 1


def save_arrays(path, arrays: dict, meta: dict):
    manifest = {"format": CHECKPOINT_FORMAT,
                "arrays": {k: list(np.shape(v)) for k, v in arrays.items()},
                "meta": meta}
    payload = {k: np.asarray(v) for k, v in arrays.items()}
    payload["__manifest__"] = np.frombuffer(json.dumps(manifest, sort_keys=True).encode(), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_arrays(path):
    """Inverse of :func:`save_arrays`; raises CheckpointError on any inconsistency."""
    try:
        with np.load(path, allow_pickle=False) as data:
            manifest = json.loads(bytes(data["__manifest__"]).decode())
            arrays = {k: np.array(data[k]) for k in manifest["arrays"]}
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint not found: {path}") from exc
    except Exception as exc:
        raise CheckpointError(f"unreadable checkpoint {path}: {exc}") from exc
    if manifest.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"unsupported checkpoint format {manifest.get('format')}")
    for k, shape in manifest["arrays"].items():
        if list(arrays[k].shape) != shape:
            raise CheckpointError(f"array {k} has shape {arrays[k].shape}, manifest says {shape}")
    return arrays, manifest["meta"]
