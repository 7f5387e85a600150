"""Dense kernels for layer-local training.

Matrices are plain 2-D numpy arrays. Training runs in float32; the gradient
checks switch to float64 by passing float64 arrays, every routine here keeps
the dtype it is given.

Randomness comes from ``numpy.random.Generator`` over PCG64. Callers always
pass the generator in explicitly; :func:`rng_streams` derives independent
streams from one 64-bit seed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionError

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

STREAM_NAMES = ("init", "shuffle", "negatives", "mining")


def rng_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent PCG64 generators for each stochastic part of training."""
    children = np.random.SeedSequence(int(seed)).spawn(len(STREAM_NAMES))
    return {name: np.random.Generator(np.random.PCG64(ss)) for name, ss in zip(STREAM_NAMES, children)}


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def relu(m: np.ndarray) -> np.ndarray:
    return np.maximum(m, 0)


def kaiming_init(fan_in: int, fan_out: int, rng: np.random.Generator, dtype=np.float32) -> np.ndarray:
    """He-normal weights of shape ``(fan_out, fan_in)`` with std ``sqrt(2 / fan_in)``."""
    if fan_in < 1 or fan_out < 1:
        raise DimensionError(f"fan_in and fan_out must be >= 1, got ({fan_in}, {fan_out})")
    std = np.sqrt(2.0 / fan_in)
    return (rng.standard_normal((fan_out, fan_in)) * std).astype(dtype)


@dataclass
class AdamState:
    first_moment: np.ndarray
    second_moment: np.ndarray
    step_count: int = 0

    @classmethod
    def zeros_like(cls, param: np.ndarray) -> "AdamState":
        return cls(np.zeros_like(param), np.zeros_like(param), 0)


def adam_step(
    param: np.ndarray,
    grad: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = ADAM_BETA1,
    beta2: float = ADAM_BETA2,
    eps: float = ADAM_EPS,
) -> tuple[np.ndarray, AdamState]:
    """Bias-corrected Adam update, applied to ``param`` and ``state`` in place."""
    if not (param.shape == grad.shape == state.first_moment.shape == state.second_moment.shape):
        raise DimensionError(
            f"adam shapes differ: param {param.shape}, grad {grad.shape}, "
            f"moments {state.first_moment.shape}/{state.second_moment.shape}"
        )
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    state.step_count += 1
    t = state.step_count
    m, v = state.first_moment, state.second_moment
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * np.square(grad)
    m_hat = m / (1.0 - beta1**t)
    v_hat = v / (1.0 - beta2**t)
    param -= (lr * m_hat / (np.sqrt(v_hat) + eps)).astype(param.dtype, copy=False)
    return param, state


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(np.sum(np.square(g, dtype=np.float64)) for g in grads)))


def clip_grad_norm(grads: Sequence[np.ndarray], max_norm: float) -> list[np.ndarray]:
    """Rescale ``grads`` jointly so their global L2 norm does not exceed ``max_norm``.

    The scale is ``max_norm / (norm + 1e-6)``, which leaves the clipped norm
    just under the cap so a second pass is a no-op.
    """
    if max_norm <= 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    norm = global_norm(grads)
    if norm <= max_norm:
        return list(grads)
    scale = max_norm / (norm + 1e-6)
    return [(g * scale).astype(g.dtype, copy=False) for g in grads]


def finite_diff_grad(f: Callable[[np.ndarray], float], at: np.ndarray, eps: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of a scalar function, one coordinate at a time."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.array(at, copy=True)
    grad = np.zeros(x.shape, dtype=np.float64)
    flat = x.reshape(-1)
    out = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = float(flat[i])
        hi = float(f(x))
        flat[i] = orig - eps
        down = float(flat[i])
        lo = float(f(x))
        flat[i] = orig
        # step actually taken after rounding to the array dtype
        out[i] = (hi - lo) / (up - down)
    return grad.astype(at.dtype, copy=False)
