"""Per-layer threshold and the warm-up + cosine learning-rate schedule."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError, DomainError
from .goodness import normalized_depth


@dataclass(frozen=True)
class ScheduleConfig:
    theta0: float = 2.0
    eta0: float = 0.04
    total_epochs: int = 1500
    warmup_frac: float = 0.1
    eta_min_ratio: float = 0.1
    depth_gain: float = 0.15
    progress_gain: float = 0.3

    def __post_init__(self):
        if self.theta0 <= 0 or self.eta0 <= 0:
            raise ConfigError(f"theta0 and eta0 must be positive, got {self.theta0}, {self.eta0}")
        if not 0 < self.warmup_frac < 1 or not 0 < self.eta_min_ratio < 1:
            raise ConfigError("warmup_frac and eta_min_ratio must lie in (0, 1)")
        if self.total_epochs < 1:
            raise ConfigError(f"total_epochs must be >= 1, got {self.total_epochs}")


def adaptive_threshold(
    layer_index: int,
    num_layers: int,
    p: float,
    theta0: float = 2.0,
    depth_gain: float = 0.15,
    progress_gain: float = 0.3,
) -> float:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"training progress must lie in [0, 1], got {p}")
    d = normalized_depth(layer_index, num_layers)
    return theta0 * (1.0 + depth_gain * d) * (1.0 + progress_gain * p)


def learning_rate(epoch: int, cfg: ScheduleConfig) -> float:
    """Linear warm-up over epochs ``1..floor(warmup_frac * E)``, then cosine decay to ``eta_min``."""
    E = cfg.total_epochs
    if not 1 <= epoch <= E:
        raise DomainError(f"epoch must lie in [1, {E}], got {epoch}")
    warm = cfg.warmup_frac * E
    if epoch <= math.floor(warm):
        return cfg.eta0 * epoch / warm
    eta_min = cfg.eta_min_ratio * cfg.eta0
    frac = (epoch - warm) / (E - warm)
    return eta_min + 0.5 * (cfg.eta0 - eta_min) * (1.0 + math.cos(math.pi * frac))
