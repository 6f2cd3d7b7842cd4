"""Per-member nonstationary fits and ensemble summaries of return levels."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ..series import DailySeries
from .gpd import PriorSpec, return_level
from .mcmc import MCMCConfig, PosteriorSample, fit_mcmc
from .pot import select_exceedances

__all__ = [
    "MemberReturnLevel",
    "EnsembleReturnLevels",
    "member_seeds",
    "posterior_return_levels",
    "ensemble_return_levels",
    "write_return_level_summary",
]


def member_seeds(seed: int, n: int) -> list[int]:
    """Independent per-member seeds that do not depend on execution order."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1, dtype=np.uint32)[0]) for c in children]


@dataclass
class MemberReturnLevel:
    member: str
    levels: np.ndarray  # one return level per retained posterior draw
    threshold: float
    t_eval: float
    sample: PosteriorSample | None = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.levels))

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.levels, q))

    def summary(self) -> dict[str, float]:
        return {
            "mean": self.mean,
            "q05": self.quantile(0.05),
            "q95": self.quantile(0.95),
            "min": float(np.min(self.levels)),
            "max": float(np.max(self.levels)),
        }


@dataclass
class EnsembleReturnLevels:
    members: list[MemberReturnLevel]
    failures: dict[str, str] = field(default_factory=dict)

    @property
    def values(self) -> np.ndarray:
        return np.array([m.mean for m in self.members])

    @property
    def mean(self) -> float:
        return float(np.mean(self.values))

    @property
    def min(self) -> float:
        return float(np.min(self.values))

    @property
    def max(self) -> float:
        return float(np.max(self.values))

    @property
    def partial(self) -> bool:
        return bool(self.failures)


def posterior_return_levels(sample: PosteriorSample, period_years: float, t_eval: float) -> np.ndarray:
    levels = return_level(sample.draws, sample.threshold, period_years, t_eval)
    return levels[np.isfinite(levels)]


def ensemble_return_levels(
    members: Sequence[DailySeries],
    target_year: int,
    period_years: float = 100.0,
    config: MCMCConfig = MCMCConfig(),
    priors: PriorSpec | None = None,
    percentile: float = 95.0,
    min_separation_days: int = 3,
    window=None,
) -> EnsembleReturnLevels:
    """Fit each member separately and evaluate its return level in ``target_year``.

    Member ``i`` is sampled with the i-th seed spawned from ``config.seed``.
    A failing member is recorded in ``failures`` and skipped.
    """
    if len(members) == 0:
        raise ValueError("need at least one ensemble member")
    seeds = member_seeds(config.seed, len(members))
    out, failures = [], {}
    for i, series in enumerate(members):
        name = series.name or f"member{i}"
        try:
            data = select_exceedances(series, percentile, min_separation_days, window=window)
            t_eval = data.covariate_of_year(target_year)
            sample = fit_mcmc(data, priors, replace(config, seed=seeds[i]))
            levels = posterior_return_levels(sample, period_years, t_eval)
            if levels.size == 0:
                raise ValueError("no posterior draw gives a positive rate at the target year")
            out.append(MemberReturnLevel(name, levels, data.threshold, t_eval, sample))
        except (ValueError, RuntimeError) as exc:
            failures[name] = f"{type(exc).__name__}: {exc}"
    if not out:
        raise RuntimeError(f"every ensemble member failed: {failures}")
    return EnsembleReturnLevels(out, failures)


def write_return_level_summary(result: EnsembleReturnLevels, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["member", "mean", "q05", "q95", "min", "max"])
        for m in result.members:
            s = m.summary()
            w.writerow([m.member] + [repr(s[k]) for k in ("mean", "q05", "q95", "min", "max")])
        for name, err in result.failures.items():
            w.writerow([name, "", "", "", "", ""])
    return path
