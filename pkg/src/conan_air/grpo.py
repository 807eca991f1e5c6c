"""Group-relative advantages for GRPO-style trainers."""

from __future__ import annotations

from typing import Sequence

import numpy as np

DEFAULT_EPSILON = 1e-8


def group_advantages(rewards: Sequence[float], epsilon: float = DEFAULT_EPSILON) -> list[float]:
    """Standardize rewards within one group: (r - mean) / (population std + eps)."""
    r = np.asarray(rewards, dtype=np.float64)
    if r.ndim != 1 or r.size == 0:
        raise ValueError("a reward group must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(r)):
        raise ValueError("rewards must be finite")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    centered = r - r.mean()
    std = np.sqrt(np.mean(centered**2))
    return (centered / (std + epsilon)).tolist()


def batch_advantages(groups: Sequence[Sequence[float]], epsilon: float = DEFAULT_EPSILON) -> list[list[float]]:
    return [group_advantages(g, epsilon) for g in groups]
