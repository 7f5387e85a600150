"""Three-stage curriculum selection of negative samples."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

import numpy as np

from .errors import ConfigError, DomainError


class Stage(str, Enum):
    EARLY = "early"
    MIDDLE = "middle"
    LATE = "late"


@dataclass(frozen=True)
class CurriculumConfig:
    early_end: float = 0.3
    late_start: float = 0.7
    mid_hard_rate: float = 0.4
    late_hard_rate: float = 0.5
    min_fill: float = 0.6
    hard_margin: float = 0.5

    def __post_init__(self):
        if not 0 < self.early_end <= self.late_start < 1:
            raise ConfigError(f"need 0 < early_end <= late_start < 1, got {self.early_end}, {self.late_start}")
        for name in ("mid_hard_rate", "late_hard_rate", "min_fill"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ConfigError(f"{name} must lie in (0, 1], got {v}")


@dataclass
class MiningResult:
    selected_indices: np.ndarray
    band_radius: float
    stage: Stage
    guarantee_applied: bool
    fill_count: int
    num_candidates: int

    @property
    def selected_fraction(self) -> float:
        return len(self.selected_indices) / self.num_candidates


def stage_of(p: float, cfg: CurriculumConfig = CurriculumConfig()) -> Stage:
    if p < cfg.early_end:
        return Stage.EARLY
    if p < cfg.late_start:
        return Stage.MIDDLE
    return Stage.LATE


def band_radius(p: float, cfg: CurriculumConfig = CurriculumConfig()) -> float:
    """Half-width of the goodness band around the threshold: 0.3 -> 0.5 -> 1.0 -> 1.5."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"training progress must lie in [0, 1], got {p}")
    stage = stage_of(p, cfg)
    if stage is Stage.EARLY:
        return 0.3 + 0.2 * p / cfg.early_end
    if stage is Stage.MIDDLE:
        return 0.5 + 0.5 * (p - cfg.early_end) / (cfg.late_start - cfg.early_end)
    return 1.0 + 0.5 * (p - cfg.late_start) / (1.0 - cfg.late_start)


def fill_target(n: int, min_fill: float) -> int:
    """``ceil(min_fill * n)`` without float round-up (0.6 * 15 must give 9)."""
    return math.ceil(Fraction(min_fill).limit_denominator(10**6) * n)


def mine_negatives(
    g_neg: np.ndarray,
    p: float,
    theta: float,
    cfg: CurriculumConfig,
    rng: np.random.Generator,
) -> MiningResult:
    """Pick which candidate negatives enter this batch's negative pass.

    Band members ``|g - theta| <= r(p)`` are always kept. In the middle stage
    candidates with ``g > theta + hard_margin`` are also admitted with
    probability ``mid_hard_rate``; in the late stage candidates with
    ``g > theta`` are admitted with probability ``late_hard_rate``. One
    uniform draw is consumed per hard candidate, in index order. If fewer
    than ``ceil(min_fill * N)`` are selected, the highest-goodness leftovers
    (lower index first on ties) are added up to exactly that count.
    """
    g = np.asarray(g_neg, dtype=np.float64)
    n = g.shape[0]
    if n < 1:
        raise DomainError("no candidate negatives to mine from")
    if not math.isfinite(theta):
        raise DomainError(f"threshold must be finite, got {theta}")
    r = band_radius(p, cfg)
    stage = stage_of(p, cfg)
    selected = np.abs(g - theta) <= r
    if stage is not Stage.EARLY:
        if stage is Stage.MIDDLE:
            hard, rate = g > theta + cfg.hard_margin, cfg.mid_hard_rate
        else:
            hard, rate = g > theta, cfg.late_hard_rate
        hard_idx = np.flatnonzero(hard)
        draws = rng.random(hard_idx.shape[0])
        selected[hard_idx[draws < rate]] = True

    target = fill_target(n, cfg.min_fill)
    count = int(selected.sum())
    fill = 0
    if count < target:
        rest = np.flatnonzero(~selected)
        # stable sort on -g keeps lower indices first among equal goodness
        order = rest[np.argsort(-g[rest], kind="stable")]
        fill = target - count
        selected[order[:fill]] = True
    return MiningResult(
        selected_indices=np.flatnonzero(selected),
        band_radius=r,
        stage=stage,
        guarantee_applied=fill > 0,
        fill_count=fill,
        num_candidates=n,
    )
