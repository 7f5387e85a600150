"""Forward-Forward layers, local loss and gradients, the training loop, and prediction."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import kernels
from .config import ExperimentConfig
from .curriculum import MiningResult, mine_negatives, stage_of
from .data import LabeledDataset, make_negative_candidates, make_positive, overlay_labels
from .errors import DimensionError, NumericError, StateError
from .goodness import aggregate_goodness, column_coefficients
from .numerics import AdamState, adam_step, clip_grad_norm, kaiming_init, rng_streams
from .schedules import ScheduleConfig, adaptive_threshold, learning_rate

log = logging.getLogger(__name__)

NORM_EPS = 1e-8


@dataclass
class FFLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    adam_w: AdamState
    adam_b: AdamState
    layer_index: int

    @classmethod
    def create(cls, in_dim: int, out_dim: int, layer_index: int, rng: np.random.Generator, dtype=np.float32):
        w = kaiming_init(in_dim, out_dim, rng, dtype)
        b = np.zeros(out_dim, dtype=dtype)
        return cls(w, b, AdamState.zeros_like(w), AdamState.zeros_like(b), layer_index)

    @classmethod
    def from_params(cls, weights: np.ndarray, bias: np.ndarray, layer_index: int):
        return cls(weights, bias, AdamState.zeros_like(weights), AdamState.zeros_like(bias), layer_index)

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


def build_layers(architecture, rng: np.random.Generator, dtype=np.float32) -> list[FFLayer]:
    return [
        FFLayer.create(architecture[i], architecture[i + 1], i, rng, dtype)
        for i in range(len(architecture) - 1)
    ]


def layer_forward(layer: FFLayer, x: np.ndarray) -> np.ndarray:
    """``relu(x @ W.T + b)``."""
    if x.ndim != 2 or x.shape[1] != layer.in_dim:
        raise DimensionError(f"layer {layer.layer_index} expects width {layer.in_dim}, got input {x.shape}")
    z = np.ascontiguousarray(x @ layer.weights.T)
    return kernels.bias_relu_(z, layer.bias)


def normalize(h: np.ndarray) -> np.ndarray:
    return kernels.normalize_rows(h, NORM_EPS)


def softplus(z):
    return np.logaddexp(0.0, z)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    return np.exp(-np.logaddexp(0.0, -z))


def ff_loss(g_pos: np.ndarray, g_neg: np.ndarray, theta: float) -> float:
    """Mean softplus(theta - g+) over positives plus mean softplus(g- - theta) over negatives."""
    g_pos = np.asarray(g_pos, dtype=np.float64)
    g_neg = np.asarray(g_neg, dtype=np.float64)
    if g_pos.size == 0 or g_neg.size == 0:
        raise ValueError("ff_loss needs at least one positive and one negative sample")
    return float(np.mean(softplus(theta - g_pos)) + np.mean(softplus(g_neg - theta)))


@dataclass(frozen=True)
class GoodnessFn:
    """Goodness used for the loss: multi-scale, or the plain baseline.

    ``baseline`` is ``"sum"`` (sum of squared activations) or ``"mean"``
    (mean of squared activations) and only applies when ``multiscale`` is off.
    """

    multiscale: bool = True
    baseline: str = "sum"

    def __call__(self, h, layer_index, num_layers, per_sample_global=False) -> np.ndarray:
        if self.multiscale:
            return aggregate_goodness(h, layer_index, num_layers, per_sample_global).aggregate
        sq = np.square(h, dtype=np.float64).sum(axis=1)
        if self.baseline == "mean":
            sq /= h.shape[1]
        return sq.astype(h.dtype)

    def backward(self, h, dloss_dg, layer_index, num_layers) -> np.ndarray:
        """Gradient of the loss w.r.t. the layer's pre-activations, given dL/dg per row.

        The batch-level term couples rows: every row's goodness contains
        ``w_g * mean(h**2)``, so each ``h_mj`` also receives
        ``2 h_mj * w_g * sum_i(dL/dg_i) / (B D)``.
        """
        b, d = h.shape
        if self.multiscale:
            coef, w_global = column_coefficients(d, layer_index, num_layers)
            shared = w_global * float(np.sum(dloss_dg, dtype=np.float64)) / (b * d)
        else:
            coef = np.full(d, 1.0 if self.baseline == "sum" else 1.0 / d)
            shared = 0.0
        return kernels.goodness_grad(h, dloss_dg, coef, shared)


@dataclass
class LayerGrads:
    loss: float
    d_weights: np.ndarray
    d_bias: np.ndarray
    h_pos: np.ndarray
    h_neg: np.ndarray
    g_pos: np.ndarray
    g_neg: np.ndarray


def layer_loss_and_grads(
    layer: FFLayer,
    x_pos: np.ndarray,
    x_neg: np.ndarray,
    theta: float,
    num_layers: int,
    goodness: GoodnessFn = GoodnessFn(),
    h_neg: np.ndarray | None = None,
) -> LayerGrads:
    """Local FF loss of one layer and its exact gradient w.r.t. that layer's weights and bias.

    ``h_neg`` may carry an already computed forward pass of ``x_neg``.
    """
    h_pos = layer_forward(layer, x_pos)
    if h_neg is None:
        h_neg = layer_forward(layer, x_neg)
    li = layer.layer_index
    g_pos = goodness(h_pos, li, num_layers)
    g_neg = goodness(h_neg, li, num_layers)
    loss = ff_loss(g_pos, g_neg, theta)

    # d softplus(z) / dz = sigmoid(z)
    dg_pos = -sigmoid(theta - g_pos.astype(np.float64)) / g_pos.shape[0]
    dg_neg = sigmoid(g_neg.astype(np.float64) - theta) / g_neg.shape[0]
    dz_pos = goodness.backward(h_pos, dg_pos, li, num_layers)
    dz_neg = goodness.backward(h_neg, dg_neg, li, num_layers)
    d_w = dz_pos.T @ x_pos + dz_neg.T @ x_neg
    d_b = dz_pos.sum(axis=0) + dz_neg.sum(axis=0)
    return LayerGrads(loss, d_w, d_b, h_pos, h_neg, g_pos, g_neg)


@dataclass
class StepResult:
    loss: float
    h_pos: np.ndarray
    h_neg: np.ndarray
    g_pos_mean: float
    g_neg_mean: float


def layer_train_step(
    layer: FFLayer,
    x_pos: np.ndarray,
    x_neg: np.ndarray,
    theta: float,
    lr: float,
    num_layers: int,
    goodness: GoodnessFn = GoodnessFn(),
    max_grad_norm: float = 0.3,
    h_neg: np.ndarray | None = None,
) -> StepResult:
    """One clipped Adam step on a single layer's local loss.

    Returns the activations computed before the update; they are the next
    layer's inputs and carry no dependence back into this layer.
    """
    grads = layer_loss_and_grads(layer, x_pos, x_neg, theta, num_layers, goodness, h_neg)
    if not np.isfinite(grads.loss):
        raise NumericError(
            f"non-finite loss {grads.loss} at layer {layer.layer_index} (theta={theta}, lr={lr}); "
            f"max |W|={np.max(np.abs(layer.weights)):.3g}, "
            f"g+ range [{np.min(grads.g_pos):.3g}, {np.max(grads.g_pos):.3g}], "
            f"g- range [{np.min(grads.g_neg):.3g}, {np.max(grads.g_neg):.3g}]"
        )
    d_w, d_b = clip_grad_norm([grads.d_weights, grads.d_bias], max_grad_norm)
    adam_step(layer.weights, d_w, layer.adam_w, lr)
    adam_step(layer.bias, d_b, layer.adam_b, lr)
    if not (np.isfinite(layer.weights).all() and np.isfinite(layer.bias).all()):
        raise NumericError(f"non-finite parameters after update at layer {layer.layer_index} (lr={lr})")
    return StepResult(
        grads.loss, grads.h_pos, grads.h_neg, float(np.mean(grads.g_pos)), float(np.mean(grads.g_neg))
    )


@dataclass
class Prediction:
    labels: np.ndarray  # (N,)
    scores: np.ndarray  # (N, C) goodness summed over the scoring layers
    layer_goodness: np.ndarray  # (N, C, L)
    thresholds: np.ndarray  # (L,)

    @property
    def probabilities(self) -> np.ndarray:
        """Per-layer probability that each (sample, class) pair is positive: ``sigmoid(g - theta_l)``."""
        return sigmoid(self.layer_goodness - self.thresholds)


def scoring_layers(num_layers: int, skip_first: bool) -> list[int]:
    if skip_first and num_layers > 1:
        return list(range(1, num_layers))
    return list(range(num_layers))


def predict(
    layers: list[FFLayer],
    x: np.ndarray,
    num_classes: int,
    goodness: GoodnessFn = GoodnessFn(),
    skip_first: bool = True,
    normalize_between_layers: bool = True,
    theta0: float = 2.0,
    adaptive: bool = True,
    chunk: int = 1000,
) -> Prediction:
    """Label-overlay classification: try every class, pick the one with most goodness.

    Goodness is computed per sample (the batch-level term uses only that
    sample), so a prediction does not depend on the rest of the batch. Ties
    go to the lowest class index.
    """
    if not layers:
        raise StateError("cannot predict with an empty layer list")
    if x.shape[1] != layers[0].in_dim:
        raise DimensionError(f"network expects width {layers[0].in_dim}, got input {x.shape}")
    num_layers = len(layers)
    n = x.shape[0]
    per_layer = np.zeros((n, num_classes, num_layers))
    for start in range(0, n, chunk):
        xs = x[start : start + chunk]
        m = xs.shape[0]
        # class-major stacking: rows [c*m, (c+1)*m) carry overlay c
        stacked = np.concatenate(
            [overlay_labels(xs, np.full(m, c), num_classes) for c in range(num_classes)]
        )
        h = stacked
        for layer in layers:
            h = layer_forward(layer, h)
            g = goodness(h, layer.layer_index, num_layers, per_sample_global=True)
            per_layer[start : start + m, :, layer.layer_index] = g.reshape(num_classes, m).T
            if normalize_between_layers:
                h = normalize(h)
    use = scoring_layers(num_layers, skip_first)
    scores = per_layer[:, :, use].sum(axis=2)
    thresholds = np.array(
        [adaptive_threshold(i, num_layers, 1.0, theta0) if adaptive else theta0 for i in range(num_layers)]
    )
    return Prediction(np.argmax(scores, axis=1), scores, per_layer, thresholds)


def accuracy(layers, data: LabeledDataset, config: ExperimentConfig) -> float:
    pred = predict(
        layers,
        data.images,
        data.num_classes,
        goodness_for(config),
        skip_first=config.prediction_skip_first_layer,
        normalize_between_layers=config.normalize_between_layers,
        theta0=config.theta0,
        adaptive=config.toggles.adaptive_threshold,
    )
    return float(np.mean(pred.labels == data.labels))


def goodness_for(config: ExperimentConfig) -> GoodnessFn:
    return GoodnessFn(config.toggles.multiscale, config.baseline_goodness)


@dataclass
class TrainRecord:
    epoch: int
    lr: float
    thresholds: list[float]
    losses: list[float]
    g_pos: list[float]
    g_neg: list[float]
    stage: str
    selected_fraction: float
    guarantee_applied: bool
    train_acc: float | None = None
    test_acc: float | None = None
    wall_seconds: float = 0.0


@dataclass
class TrainResult:
    layers: list[FFLayer]
    records: list[TrainRecord] = field(default_factory=list)


def _mining_scores(layers, x_cand, goodness: GoodnessFn, scope: str, normalize_between: bool):
    """Goodness of each candidate negative used for mining, plus the first layer's activations."""
    num_layers = len(layers)
    h0 = layer_forward(layers[0], x_cand)
    g = goodness(h0, 0, num_layers).astype(np.float64)
    if scope == "network_mean" and num_layers > 1:
        h = h0
        for layer in layers[1:]:
            h = layer_forward(layer, normalize(h) if normalize_between else h)
            g += goodness(h, layer.layer_index, num_layers)
        g /= num_layers
    return g, h0


def train(
    config: ExperimentConfig,
    train_data: LabeledDataset,
    test_data: LabeledDataset | None = None,
    on_epoch: Callable[[TrainRecord], None] | None = None,
    layers: list[FFLayer] | None = None,
) -> TrainResult:
    """Layer-local training over epochs and mini-batches.

    Per batch: overlay true labels (positives) and random wrong labels
    (candidate negatives), optionally mine the negatives, then sweep the
    layers in order, each one taking a single clipped Adam step on its own
    loss and handing its (length-normalized) activations to the next.
    """
    dtype = np.dtype(config.precision).type
    train_data = train_data.astype(dtype)
    if test_data is not None:
        test_data = test_data.astype(dtype)
    if train_data.images.shape[1] != config.architecture[0]:
        raise DimensionError(
            f"data width {train_data.images.shape[1]} does not match architecture input {config.architecture[0]}"
        )
    rngs = rng_streams(config.seed)
    if layers is None:
        layers = build_layers(config.architecture, rngs["init"], dtype)
    num_layers = len(layers)
    toggles = config.toggles
    goodness = goodness_for(config)
    sched = ScheduleConfig(theta0=config.theta0, eta0=config.eta0, total_epochs=config.epochs)
    n = len(train_data)
    C = train_data.num_classes
    result = TrainResult(layers)

    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        p = epoch / config.epochs
        lr = learning_rate(epoch, sched) if toggles.lr_schedule else config.eta0
        thetas = [
            adaptive_threshold(i, num_layers, p, config.theta0) if toggles.adaptive_threshold else config.theta0
            for i in range(num_layers)
        ]
        losses = np.zeros(num_layers)
        gp = np.zeros(num_layers)
        gn = np.zeros(num_layers)
        n_batches = selected = candidates = 0
        guarantee = False

        order = rngs["shuffle"].permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            x, y = train_data.images[idx], train_data.labels[idx]
            x_pos = make_positive(x, y, C)
            x_neg = make_negative_candidates(x, y, C, rngs["negatives"])
            h_neg0 = None
            if toggles.curriculum:
                scores, h_cand = _mining_scores(
                    layers, x_neg, goodness, config.mining_scope, config.normalize_between_layers
                )
                mined: MiningResult = mine_negatives(scores, p, config.theta0, config.curriculum, rngs["mining"])
                sel = mined.selected_indices
                x_neg, h_neg0 = x_neg[sel], h_cand[sel]
                guarantee |= mined.guarantee_applied
            selected += x_neg.shape[0]
            candidates += x.shape[0]

            for layer in layers:
                li = layer.layer_index
                step = layer_train_step(
                    layer, x_pos, x_neg, thetas[li], lr, num_layers, goodness, config.max_grad_norm,
                    h_neg=h_neg0 if li == 0 else None,
                )
                losses[li] += step.loss
                gp[li] += step.g_pos_mean
                gn[li] += step.g_neg_mean
                if config.normalize_between_layers:
                    x_pos, x_neg = normalize(step.h_pos), normalize(step.h_neg)
                else:
                    x_pos, x_neg = step.h_pos, step.h_neg
            n_batches += 1
        wall = time.perf_counter() - t0

        rec = TrainRecord(
            epoch=epoch,
            lr=lr,
            thresholds=thetas,
            losses=list(losses / n_batches),
            g_pos=list(gp / n_batches),
            g_neg=list(gn / n_batches),
            stage=stage_of(p, config.curriculum).value if toggles.curriculum else "none",
            selected_fraction=selected / candidates,
            guarantee_applied=guarantee,
            wall_seconds=wall,
        )
        if epoch % config.eval_every == 0 or epoch == config.epochs:
            if config.eval_train:
                rec.train_acc = accuracy(layers, train_data, config)
            if test_data is not None:
                rec.test_acc = accuracy(layers, test_data, config)
            log.info(
                "epoch %d lr %.4g loss %s train %s test %s",
                epoch, lr, [round(v, 4) for v in rec.losses], rec.train_acc, rec.test_acc,
            )
        result.records.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
    return result
