"""Multi-scale goodness: per-neuron, grouped, and batch-level squared activity.

All three measures are means of squared activations, so the aggregate can be
written as a per-column weighted sum of ``h**2`` plus a batch-level term.
:func:`column_coefficients` exposes that form for the analytic gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

INTER_WEIGHT = 0.35
LOCAL_FIRST, LOCAL_LAST = 0.40, 0.25
GLOBAL_FIRST = 0.25
MAX_GROUPS = 8
GROUP_WIDTH = 10


@dataclass(frozen=True)
class GoodnessWeights:
    w_local: float
    w_inter: float
    w_global: float


@dataclass
class GoodnessBreakdown:
    local: np.ndarray
    inter: np.ndarray
    global_scalar: float
    aggregate: np.ndarray
    weights: GoodnessWeights


def normalized_depth(layer_index: int, num_layers: int) -> float:
    """``layer_index / (num_layers - 1)``, so the first layer sits at 0 and the last at 1."""
    if num_layers < 1 or not 0 <= layer_index < num_layers:
        raise IndexError(f"layer index {layer_index} out of range for {num_layers} layers")
    if num_layers == 1:
        return 0.0
    return layer_index / (num_layers - 1)


def depth_weights(layer_index: int, num_layers: int) -> GoodnessWeights:
    d = normalized_depth(layer_index, num_layers)
    shift = (LOCAL_FIRST - LOCAL_LAST) * d
    return GoodnessWeights(LOCAL_FIRST - shift, INTER_WEIGHT, GLOBAL_FIRST + shift)


def num_groups(d: int) -> int:
    return min(MAX_GROUPS, d // GROUP_WIDTH)


def local_goodness(h: np.ndarray) -> np.ndarray:
    local, _, _ = kernels.sq_group_means(h, kernels.group_bounds(h.shape[1], 0))
    return local


def intermediate_goodness(h: np.ndarray) -> np.ndarray:
    """Mean over contiguous neuron groups of each group's mean squared activation.

    Falls back to :func:`local_goodness` when the layer is narrower than one
    group of ten.
    """
    _, inter, _ = kernels.sq_group_means(h, kernels.group_bounds(h.shape[1], num_groups(h.shape[1])))
    return inter


def global_goodness(h: np.ndarray) -> float:
    return float(np.mean(np.square(h, dtype=np.float64)))


def aggregate_goodness(
    h: np.ndarray, layer_index: int, num_layers: int, per_sample_global: bool = False
) -> GoodnessBreakdown:
    """Depth-weighted combination of the three goodness scales, one value per row.

    With ``per_sample_global`` each row is treated as its own batch of one, so
    the global term equals that row's local goodness and the scores do not
    depend on what else is in the batch (used at inference).
    """
    w = depth_weights(layer_index, num_layers)
    b, d = h.shape
    local, inter, total = kernels.sq_group_means(h, kernels.group_bounds(d, num_groups(d)))
    glob = total / (b * d) if b else 0.0
    if per_sample_global:
        agg = (w.w_local + w.w_global) * local.astype(np.float64) + w.w_inter * inter
    else:
        agg = w.w_local * local.astype(np.float64) + w.w_inter * inter + w.w_global * glob
    return GoodnessBreakdown(local, inter, glob, agg.astype(h.dtype), w)


def column_coefficients(d: int, layer_index: int, num_layers: int) -> tuple[np.ndarray, float]:
    """Per-column weights ``c`` and global weight ``w_g`` such that
    ``g_i = sum_j c_j h_ij**2 + w_g * mean(h**2)``."""
    w = depth_weights(layer_index, num_layers)
    k = num_groups(d)
    coef = np.full(d, w.w_local / d)
    if k < 1:
        coef += w.w_inter / d
    else:
        bounds = kernels.group_bounds(d, k)
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            coef[lo:hi] += w.w_inter / (k * (hi - lo))
    return coef, w.w_global
