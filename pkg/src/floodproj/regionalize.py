"""Drainage-area scaling of 100-yr flood peaks, ``Q_p = beta * A**alpha``."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "GagePeak",
    "ScalingFit",
    "PeakRatio",
    "fit_scaling",
    "predict_peak",
    "peak_ratio",
    "read_gage_peaks",
    "write_gage_peaks",
    "write_scaling_report",
]


@dataclass(frozen=True)
class GagePeak:
    gage_id: str
    area_km2: float
    qp_m3s: float
    epoch: str = ""

    def __post_init__(self):
        if not (self.area_km2 > 0 and self.qp_m3s > 0):
            raise ValueError(f"gage {self.gage_id}: area and peak must be positive")


@dataclass(frozen=True)
class ScalingFit:
    beta: float
    alpha: float
    r: float
    epoch: str = ""
    n: int = 0


@dataclass(frozen=True)
class PeakRatio:
    """Ratio law ``Q_future / Q_base = beta_ratio * A**alpha_diff``."""

    beta_ratio: float
    alpha_diff: float

    def __call__(self, area_km2):
        return self.beta_ratio * np.power(area_km2, self.alpha_diff)

    def __str__(self) -> str:
        return f"{self.beta_ratio:.2f}A^{{{self.alpha_diff:.4f}}}"


def fit_scaling(points: Sequence[GagePeak], epoch: str | None = None) -> ScalingFit:
    """Ordinary least squares of ln(Q_p) on ln(A)."""
    if len(points) < 2:
        raise ValueError("need at least two gages")
    area = np.array([p.area_km2 for p in points], dtype=float)
    qp = np.array([p.qp_m3s for p in points], dtype=float)
    if np.any(area <= 0) or np.any(qp <= 0):
        raise ValueError("areas and peaks must be positive")
    if np.unique(area).size < 2:
        raise ValueError("need at least two distinct drainage areas")
    x, y = np.log(area), np.log(qp)
    xm, ym = x.mean(), y.mean()
    sxx = np.sum((x - xm) ** 2)
    sxy = np.sum((x - xm) * (y - ym))
    syy = np.sum((y - ym) ** 2)
    slope = sxy / sxx
    intercept = ym - slope * xm
    if syy == 0:
        r = 0.0
    else:
        r = float(np.clip(sxy / np.sqrt(sxx * syy), -1.0, 1.0))
    if epoch is None:
        epochs = {p.epoch for p in points}
        epoch = epochs.pop() if len(epochs) == 1 else ""
    return ScalingFit(float(np.exp(intercept)), float(slope), r, epoch, len(points))


def predict_peak(fit: ScalingFit, area_km2):
    a = np.asarray(area_km2, dtype=float)
    if np.any(a <= 0):
        raise ValueError("drainage area must be positive")
    out = fit.beta * np.power(a, fit.alpha)
    return float(out) if out.ndim == 0 else out


def peak_ratio(fit_future: ScalingFit, fit_base: ScalingFit) -> PeakRatio:
    return PeakRatio(fit_future.beta / fit_base.beta, fit_future.alpha - fit_base.alpha)


def read_gage_peaks(path) -> list[GagePeak]:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"gage_id", "area_km2", "qp_m3s"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header gage_id,area_km2,qp_m3s,epoch")
        return [
            GagePeak(r["gage_id"], float(r["area_km2"]), float(r["qp_m3s"]), r.get("epoch") or "")
            for r in reader
        ]


def write_gage_peaks(points: Sequence[GagePeak], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["gage_id", "area_km2", "qp_m3s", "epoch"])
        for p in points:
            w.writerow([p.gage_id, repr(p.area_km2), repr(p.qp_m3s), p.epoch])
    return path


def write_scaling_report(fits: Sequence[ScalingFit], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "beta", "alpha", "r", "n"])
        for f in fits:
            w.writerow([f.epoch, repr(f.beta), repr(f.alpha), repr(f.r), f.n])
    return path
