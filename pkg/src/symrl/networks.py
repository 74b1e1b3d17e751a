"""Small numpy MLPs with hand-written backprop, Adam and target-network updates.

All parameters of a network live in one flat float64 vector (``net.params``);
per-layer weights and biases are views into it. Gradients come back in the
same flat layout, so the optimizer and Polyak updates are single vector ops.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

ACTIVATIONS = ("relu", "tanh", "linear")
CHECKPOINT_VERSION = 1


def init_kaiming(shape: tuple[int, int], rng: np.random.Generator) -> np.ndarray:
    """Uniform Kaiming init with ReLU gain: U(-sqrt(6/fan_in), sqrt(6/fan_in))."""
    fan_in = shape[0]
    if fan_in <= 0:
        raise ValueError("fan_in must be positive")
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Mlp:
    """Fully connected network ``y = act(x @ W + b)`` per layer, batch-first.

    ``out_scale`` multiplies the final activation (the actor uses tanh scaled
    by the action bound).
    """

    def __init__(self, sizes, activations, out_scale: float = 1.0):
        sizes = tuple(int(s) for s in sizes)
        activations = tuple(activations)
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        for a in activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        self.sizes = sizes
        self.activations = activations
        self.out_scale = float(out_scale)
        n = sum(i * o + o for i, o in zip(sizes[:-1], sizes[1:]))
        self.params = np.zeros(n)
        self._cache = None

    def _bind(self, flat: np.ndarray):
        ws, bs = [], []
        k = 0
        for i, o in zip(self.sizes[:-1], self.sizes[1:]):
            ws.append(flat[k:k + i * o].reshape(i, o))
            k += i * o
            bs.append(flat[k:k + o])
            k += o
        return ws, bs

    @property
    def params(self) -> np.ndarray:
        return self._params

    @params.setter
    def params(self, value: np.ndarray):
        self._params = value
        self.weights, self.biases = self._bind(value)

    def init(self, rng: np.random.Generator) -> "Mlp":
        for w, b in zip(self.weights, self.biases):
            w[...] = init_kaiming(w.shape, rng)
            b[...] = 0.0
        return self

    def copy(self) -> "Mlp":
        other = Mlp(self.sizes, self.activations, self.out_scale)
        other.params[...] = self.params
        return other

    def same_architecture(self, other: "Mlp") -> bool:
        return (self.sizes == other.sizes and self.activations == other.activations
                and self.out_scale == other.out_scale)

    def forward(self, x, cache: bool = True) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.shape[1] != self.sizes[0]:
            raise ValueError(f"input width {x.shape[1]} != {self.sizes[0]}")
        inputs, outs = [], []
        h = x
        for w, b, act in zip(self.weights, self.biases, self.activations):
            inputs.append(h)
            z = h @ w + b
            if act == "relu":
                h = np.maximum(z, 0.0)
            elif act == "tanh":
                h = np.tanh(z)
            else:
                h = z
            outs.append(h)
        y = h * self.out_scale if self.out_scale != 1.0 else h
        self._cache = (inputs, outs, single) if cache else None
        return y[0] if single else y

    def backward(self, grad_out, param_grads: bool = True):
        """Reverse-mode gradients for the last cached forward pass.

        Returns ``(flat parameter gradient or None, input gradient)``. The
        ReLU subgradient at exactly zero is 0.
        """
        if self._cache is None:
            raise RuntimeError("backward() needs a cached forward pass")
        inputs, outs, single = self._cache
        g = np.asarray(grad_out, dtype=float)
        if single:
            g = g[None, :]
        if self.out_scale != 1.0:
            g = g * self.out_scale
        grad = np.empty_like(self.params) if param_grads else None
        gw, gb = self._bind(grad) if param_grads else (None, None)
        for k in range(len(self.weights) - 1, -1, -1):
            act, out = self.activations[k], outs[k]
            if act == "relu":
                g = g * (out > 0.0)
            elif act == "tanh":
                g = g * (1.0 - out * out)
            if param_grads:
                np.matmul(inputs[k].T, g, out=gw[k])
                gb[k][...] = g.sum(axis=0)
            g = g @ self.weights[k].T
        return grad, (g[0] if single else g)


def critic_net(obs_dim: int = 4, act_dim: int = 2, hidden=(64, 64)) -> Mlp:
    return Mlp((obs_dim + act_dim, *hidden, 1), ("relu",) * len(hidden) + ("linear",))


def actor_net(obs_dim: int = 4, act_dim: int = 2, hidden=(64, 64),
              hidden_activations=("tanh", "relu"), bound: float = 1.0) -> Mlp:
    return Mlp((obs_dim, *hidden, act_dim), tuple(hidden_activations) + ("tanh",), out_scale=bound)


@dataclass
class AdamState:
    lr: float
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: np.ndarray, lr: float) -> "AdamState":
        return cls(lr=lr, m=np.zeros_like(params), v=np.zeros_like(params))


def adam_step(params: np.ndarray, grads: np.ndarray, state: AdamState) -> np.ndarray:
    """In-place bias-corrected Adam update of ``params``; returns ``params``."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("parameter, gradient and moment shapes differ")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m *= b1
    state.m += (1.0 - b1) * grads
    state.v *= b2
    state.v += (1.0 - b2) * grads * grads
    m_hat = state.m / (1.0 - b1**state.step)
    v_hat = state.v / (1.0 - b2**state.step)
    params -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def soft_update(target: Mlp, online: Mlp, tau: float) -> Mlp:
    """Polyak averaging ``target <- (1 - tau) target + tau online``."""
    if not target.same_architecture(online):
        raise ValueError("target and online architectures differ")
    if tau == 1.0:
        target.params[...] = online.params
    elif tau != 0.0:
        # written as an increment so that target == online is an exact fixed point
        target.params += tau * (online.params - target.params)
    return target


@dataclass
class OuNoise:
    """Euler-Maruyama Ornstein-Uhlenbeck process around ``mean``."""

    sigma: float = 0.015
    theta: float = 0.1
    dt: float = 0.01
    mean: float = 0.0
    size: int | tuple = 2
    state: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.sigma < 0 or self.theta < 0 or self.dt <= 0:
            raise ValueError("OU parameters must be non-negative (dt positive)")
        if self.state is None:
            self.reset()

    def reset(self) -> None:
        self.state = np.full(self.size, self.mean, dtype=float)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal(self.state.shape)
        self.state = (self.state + self.theta * (self.mean - self.state) * self.dt
                      + self.sigma * math.sqrt(self.dt) * z)
        return self.state

    def stationary_std(self) -> float:
        a = self.theta * self.dt
        return self.sigma * math.sqrt(self.dt / (2 * a - a * a))


def ou_sample(noise: OuNoise, rng: np.random.Generator) -> np.ndarray:
    return noise.sample(rng)


# Checkpoints ----------------------------------------------------------------
#
# A checkpoint is an uncompressed ``.npz``. ``__meta__`` holds a JSON document
# {"version", "meta", "networks": {name: {sizes, activations, out_scale}},
# "optimizers": {name: {lr, step, beta1, beta2, eps}}}; arrays are stored as
# "net/<name>", "adam/<name>/m" and "adam/<name>/v".

def save_checkpoint(path, networks: dict[str, Mlp], optimizers: dict[str, AdamState] | None = None,
                    meta: dict | None = None) -> Path:
    path = Path(path)
    optimizers = optimizers or {}
    header = {
        "version": CHECKPOINT_VERSION,
        "meta": meta or {},
        "networks": {k: {"sizes": list(n.sizes), "activations": list(n.activations),
                         "out_scale": n.out_scale} for k, n in networks.items()},
        "optimizers": {k: {"lr": s.lr, "step": s.step, "beta1": s.beta1, "beta2": s.beta2,
                           "eps": s.eps} for k, s in optimizers.items()},
    }
    arrays = {"__meta__": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
    for k, n in networks.items():
        arrays[f"net/{k}"] = n.params
    for k, s in optimizers.items():
        arrays[f"adam/{k}/m"] = s.m
        arrays[f"adam/{k}/v"] = s.v
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)
    return path


class CheckpointError(ValueError):
    pass


def load_checkpoint(path):
    """Returns ``(networks, optimizers, meta)``."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            header = json.loads(bytes(data["__meta__"]).decode())
            if header.get("version") != CHECKPOINT_VERSION:
                raise CheckpointError(f"{path}: unsupported checkpoint version {header.get('version')}")
            nets = {}
            for k, spec in header["networks"].items():
                net = Mlp(spec["sizes"], spec["activations"], spec["out_scale"])
                flat = data[f"net/{k}"]
                if flat.shape != net.params.shape:
                    raise CheckpointError(f"{path}: parameter count mismatch for {k}")
                net.params[...] = flat
                nets[k] = net
            opts = {}
            for k, spec in header["optimizers"].items():
                opts[k] = AdamState(lr=spec["lr"], m=data[f"adam/{k}/m"].copy(),
                                    v=data[f"adam/{k}/v"].copy(), step=spec["step"],
                                    beta1=spec["beta1"], beta2=spec["beta2"], eps=spec["eps"])
    except CheckpointError:
        raise
    except Exception as exc:  # zip/JSON/key errors from a damaged file
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
    return nets, opts, header["meta"]
