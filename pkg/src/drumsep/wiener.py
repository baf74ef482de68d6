"""Alpha-Wiener refinement: renormalize per-stem magnitude estimates into
competitive masks against the mixture magnitude."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import ConfigError, DomainError, ShapeError


@dataclass(frozen=True)
class WienerConfig:
    alpha: float = 1.0
    epsilon: float = 1e-7
    enabled: bool = True

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ConfigError(f"alpha must lie in (0, 2], got {self.alpha}")
        if self.epsilon <= 0.0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")


def wiener_masks(estimates: Sequence[np.ndarray], cfg: WienerConfig) -> List[np.ndarray]:
    """Masks m_i = e_i^alpha / (sum_j e_j^alpha + eps); sum_i m_i <= 1 pointwise."""
    shapes = {e.shape for e in estimates}
    if len(shapes) != 1:
        raise ShapeError(f"estimate shapes differ: {sorted(shapes)}")
    powered = []
    for i, e in enumerate(estimates):
        if np.any(e < 0):
            raise DomainError(f"estimate {i} has negative entries")
        powered.append(np.power(e, cfg.alpha))
    denom = np.sum(powered, axis=0) + cfg.epsilon
    return [p / denom for p in powered]


def wiener_combine(estimates: Sequence[np.ndarray], mixture_magnitude: np.ndarray,
                   cfg: WienerConfig) -> List[np.ndarray]:
    """Refined magnitudes m_i * mixture for every stem estimate."""
    if np.any(mixture_magnitude < 0):
        raise DomainError("mixture magnitude has negative entries")
    if estimates and estimates[0].shape != mixture_magnitude.shape:
        raise ShapeError(
            f"mixture shape {mixture_magnitude.shape} != estimate shape {estimates[0].shape}")
    return [m * mixture_magnitude for m in wiener_masks(estimates, cfg)]
