"""Goodness-of-fit scores for simulated against observed flows."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["objective_function", "nse", "modified_correlation"]


def _values(x) -> np.ndarray:
    return np.asarray(getattr(x, "values", x), dtype=float)


def _aligned(obs, sim, min_len: int) -> tuple[np.ndarray, np.ndarray]:
    q, s = _values(obs), _values(sim)
    if q.shape != s.shape or q.ndim != 1:
        raise ValueError(f"series lengths differ: {q.shape} vs {s.shape}")
    if q.size < min_len:
        raise ValueError(f"need at least {min_len} values")
    od, sd = getattr(obs, "dates", None), getattr(sim, "dates", None)
    if od is not None and sd is not None and not np.array_equal(od, sd):
        raise ValueError("observed and simulated dates are not aligned")
    return q, s


def objective_function(obs, sim) -> float:
    """Root of the summed squared daily residuals (m3/s)."""
    q, s = _aligned(obs, sim, 1)
    return math.sqrt(math.fsum((q - s) ** 2))


def nse(obs, sim) -> float:
    q, s = _aligned(obs, sim, 2)
    denom = math.fsum((q - q.mean()) ** 2)
    if denom == 0:
        raise ValueError("observed series is constant; NSE undefined")
    return 1.0 - math.fsum((q - s) ** 2) / denom


def modified_correlation(obs, sim) -> float:
    """Pearson r shrunk by the ratio of the smaller to the larger spread."""
    q, s = _aligned(obs, sim, 2)
    sq, ss = q.std(), s.std()
    if sq == 0 or ss == 0:
        raise ValueError("zero variance; modified correlation undefined")
    r = float(np.dot(q - q.mean(), s - s.mean()) / (q.size * sq * ss))
    r = max(-1.0, min(1.0, r))
    return r * min(sq, ss) / max(sq, ss)
