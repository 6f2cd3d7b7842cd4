"""Stepwise line search over parameter-field multipliers."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from ..series import DailySeries
from .metrics import modified_correlation, nse, objective_function
from .model import PARAM_FIELDS, CellParams, ForcingGrid, ModelState, MultiplierVector, simulate_runoff
from .network import ChannelNetwork

__all__ = [
    "SLSConfig",
    "CalibrationResult",
    "calibrate_sls",
    "calibrate_model",
    "model_objective",
    "write_calibration_report",
]


@dataclass(frozen=True)
class SLSConfig:
    steps: tuple[float, ...] = (1.5, 1.2, 1.05)
    max_passes: int = 20
    rel_tol: float = 1e-6
    fields: tuple[str, ...] = PARAM_FIELDS

    def __post_init__(self):
        if not self.steps or any(s <= 1.0 for s in self.steps):
            raise ValueError("multiplicative steps must all exceed 1")
        if self.max_passes < 1:
            raise ValueError("max_passes must be >= 1")


@dataclass
class CalibrationResult:
    factors: MultiplierVector
    objective: float
    seed_objective: float
    improved: bool
    evaluations: int
    history: list[tuple[str, float, float]] = field(default_factory=list)


def calibrate_sls(
    objective: Callable[[MultiplierVector], float],
    seed: MultiplierVector,
    config: SLSConfig = SLSConfig(),
) -> CalibrationResult:
    """Coordinate-wise multiplicative line search with a shrinking step.

    For each step size, every factor in turn is pushed up or down by the step
    for as long as the objective keeps improving by more than ``rel_tol``
    (relative). Passes repeat until one yields no improvement, then the next
    finer step takes over. Factors never leave their bounds. If nothing ever
    improves on the seed, the seed is returned with ``improved=False``.
    """
    seed.check()
    evals = 0

    def evaluate(f: MultiplierVector) -> float:
        nonlocal evals
        evals += 1
        val = float(objective(f))
        if not math.isfinite(val):
            raise FloatingPointError(f"objective is not finite at {f.factors}")
        return val

    best = seed
    best_of = seed_of = evaluate(seed)
    history = []

    def better(val: float, ref: float) -> bool:
        return val < ref - config.rel_tol * max(abs(ref), 1e-300)

    for step in config.steps:
        for _ in range(config.max_passes):
            moved = False
            for name in config.fields:
                for direction in (step, 1.0 / step):
                    cand = best.with_factor(name, best[name] * direction)
                    if cand[name] == best[name]:
                        continue
                    val = evaluate(cand)
                    if not better(val, best_of):
                        continue
                    # keep walking while the objective improves
                    while better(val, best_of):
                        best, best_of = cand, val
                        moved = True
                        history.append((name, best[name], best_of))
                        cand = best.with_factor(name, best[name] * direction)
                        if cand[name] == best[name]:
                            break
                        val = evaluate(cand)
                    break
            if not moved:
                break
    return CalibrationResult(best, best_of, seed_of, best_of < seed_of, evals, history)


def model_objective(
    forcing: ForcingGrid,
    params: CellParams,
    network: ChannelNetwork,
    gages: Mapping[str, tuple[int, int]],
    observations: Mapping[str, DailySeries],
    spinup_days: int = 365,
    state: ModelState | None = None,
) -> Callable[[MultiplierVector], float]:
    """Objective over all gages: root of the pooled squared residuals after spin-up."""
    if not observations:
        raise ValueError("need at least one calibration gage")
    unknown = set(observations) - set(gages)
    if unknown:
        raise ValueError(f"observations for unknown gages: {sorted(unknown)}")

    def of(factors: MultiplierVector) -> float:
        sim = simulate_runoff(forcing, params, factors, network,
                              {k: gages[k] for k in observations}, state)
        total = 0.0
        for name, obs in observations.items():
            s = sim[name]
            keep = s.dates[spinup_days:]
            o = obs.window(keep[0], keep[-1]) if keep.size else obs
            s = s.window(o.dates[0], o.dates[-1])
            total += objective_function(o, s) ** 2
        return math.sqrt(total)

    return of


def calibrate_model(
    forcing: ForcingGrid,
    params: CellParams,
    network: ChannelNetwork,
    gages: Mapping[str, tuple[int, int]],
    observations: Mapping[str, DailySeries],
    seed: MultiplierVector | None = None,
    config: SLSConfig = SLSConfig(),
    spinup_days: int = 365,
) -> CalibrationResult:
    """Calibrate multipliers against observed gage flows (seed = manual factors)."""
    seed = MultiplierVector.ones() if seed is None else seed
    of = model_objective(forcing, params, network, gages, observations, spinup_days)
    return calibrate_sls(of, seed, config)


def write_calibration_report(
    factors: MultiplierVector,
    observed: Mapping[str, DailySeries],
    simulated: Mapping[str, DailySeries],
    path,
) -> Path:
    """One row per gage: factors, OF, NSE and modified correlation."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gage_id", *PARAM_FIELDS, "of", "nse", "rm"])
        for name in sorted(observed):
            o = observed[name]
            s = simulated[name].window(o.dates[0], o.dates[-1])
            o = o.window(s.dates[0], s.dates[-1])
            w.writerow([name, *(repr(factors[f]) for f in PARAM_FIELDS),
                        repr(objective_function(o, s)), repr(nse(o, s)),
                        repr(modified_correlation(o, s))])
    return path
