"""Seeded random streams, Glorot initialization and the Adam optimizer."""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .tensor import DEFAULT_DTYPE, ShapeError, Tensor


def make_rng(seed: int, name: str = "") -> np.random.Generator:
    """Counter-based (Philox) stream keyed by a seed and a stream name."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))])
    return np.random.Generator(np.random.Philox(ss))


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def glorot_init(fan_in: int, fan_out: int, shape, rng_seed: int, name: str = "",
                dtype=DEFAULT_DTYPE) -> Tensor:
    """Uniform samples in +-sqrt(6 / (fan_in + fan_out)) as a trainable tensor."""
    if fan_in < 1 or fan_out < 1:
        raise ValueError("fan_in and fan_out must be positive")
    bound = glorot_bound(fan_in, fan_out)
    data = make_rng(rng_seed, name).uniform(-bound, bound, size=shape)
    return Tensor(data.astype(dtype), requires_grad=True, name=name or None)


@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, param: Tensor, grad: np.ndarray, key: str | None = None) -> None:
    """One bias-corrected Adam update of a single parameter, in place; advances ``state.step``."""
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != param.shape:
        raise ShapeError(f"gradient {g.shape} does not match parameter {param.shape}")
    state.step += 1
    _apply(state, param, g, key or param.name or str(id(param)))


def _apply(state: AdamState, param: Tensor, g: np.ndarray, key: str) -> None:
    # state.step already counts the current update
    m = state.m.get(key)
    v = state.v.get(key)
    if m is None:
        m = np.zeros(param.shape)
        v = np.zeros(param.shape)
    # moments are kept in the parameter dtype so float32 checkpoints hold them exactly
    m = (state.beta1 * m + (1.0 - state.beta1) * g).astype(param.dtype)
    v = (state.beta2 * v + (1.0 - state.beta2) * g * g).astype(param.dtype)
    state.m[key], state.v[key] = m, v
    t = max(state.step, 1)
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    update = state.lr * m_hat / (np.sqrt(v_hat) + state.epsilon)
    param.data = (param.data - update).astype(param.dtype)


class Adam:
    """Adam over a dict of named parameters."""

    def __init__(self, params: dict[str, Tensor], lr: float = 2e-4, beta1: float = 0.5,
                 beta2: float = 0.999, epsilon: float = 1e-8):
        self.params = params
        self.state = AdamState(lr, beta1, beta2, epsilon)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        self.state.step += 1
        for key, p in self.params.items():
            if p.grad is None:
                continue
            g = np.asarray(p.grad, dtype=np.float64)
            if g.shape != p.shape:
                raise ShapeError(f"gradient {g.shape} does not match parameter {key} {p.shape}")
            _apply(self.state, p, g, key)

    def state_tensors(self, prefix: str) -> dict[str, np.ndarray]:
        out = {f"{prefix}/step": np.array([self.state.step], dtype=np.float32)}
        for key in self.params:
            if key in self.state.m:
                out[f"{prefix}/m/{key}"] = self.state.m[key].astype(np.float32)
                out[f"{prefix}/v/{key}"] = self.state.v[key].astype(np.float32)
        return out

    def load_state_tensors(self, prefix: str, tensors: dict[str, np.ndarray]) -> None:
        self.state.step = int(tensors[f"{prefix}/step"][0])
        for key in self.params:
            mk, vk = f"{prefix}/m/{key}", f"{prefix}/v/{key}"
            if mk in tensors:
                self.state.m[key] = tensors[mk].astype(self.params[key].dtype)
                self.state.v[key] = tensors[vk].astype(self.params[key].dtype)
