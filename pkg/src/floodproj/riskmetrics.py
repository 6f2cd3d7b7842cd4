"""Flood hazard and exposure per administrative unit.

Hazard is the wet share of a unit's area, exposure the share of its
population living on wet cells. Population is spread over a unit's cells
in proportion to a development-intensity weight of each developed cell.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

__all__ = [
    "DevClass",
    "NLCD_DEVELOPED",
    "DEFAULT_WEIGHTS",
    "AdminUnit",
    "RiskRecord",
    "hazard_percent",
    "disaggregate_population",
    "exposure_percent",
    "pearson",
    "spearman_rank",
    "exceedance_counts",
    "load_admin_units",
    "write_risk_records",
    "read_risk_records",
]


class DevClass(IntEnum):
    NONE = 0
    OPEN = 1
    LOW = 2
    MEDIUM = 3
    HIGH = 4


# NLCD 2011 developed classes 21-24
NLCD_DEVELOPED = {21: DevClass.OPEN, 22: DevClass.LOW, 23: DevClass.MEDIUM, 24: DevClass.HIGH}

DEFAULT_WEIGHTS = {
    DevClass.OPEN: 0.1,
    DevClass.LOW: 0.35,
    DevClass.MEDIUM: 0.65,
    DevClass.HIGH: 1.0,
}


@dataclass
class AdminUnit:
    unit_id: str
    kind: str  # "city" or "borough"
    mask: np.ndarray
    population: float
    cell_area_km2: float
    name: str = ""

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.population < 0:
            raise ValueError(f"unit {self.unit_id}: negative population")

    @property
    def n_cells(self) -> int:
        return int(self.mask.sum())

    @property
    def area_km2(self) -> float:
        return self.n_cells * self.cell_area_km2


@dataclass(frozen=True)
class RiskRecord:
    unit_id: str
    hazard: float
    exposure: float
    epoch: str
    kind: str = ""

    def __post_init__(self):
        for v in (self.hazard, self.exposure):
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"unit {self.unit_id}: percentage {v} outside [0, 100]")


def _wet(inundation) -> np.ndarray:
    # accept an InundationMap or a bare boolean mask
    return np.asarray(getattr(inundation, "wet", inundation), dtype=bool)


def _check_shapes(unit: AdminUnit, *arrays) -> None:
    for a in arrays:
        if a.shape != unit.mask.shape:
            raise ValueError(f"unit {unit.unit_id}: raster shape {a.shape} != mask {unit.mask.shape}")


def hazard_percent(inundation, unit: AdminUnit) -> float:
    wet = _wet(inundation)
    _check_shapes(unit, wet)
    n = unit.n_cells
    if n == 0:
        raise ValueError(f"unit {unit.unit_id}: empty mask")
    return 100.0 * int(np.count_nonzero(wet & unit.mask)) / n


def _largest_remainder(total: int, shares: np.ndarray) -> np.ndarray:
    floor = np.floor(shares)
    short = int(total - floor.sum())
    if short:
        rem = shares - floor
        # stable order so ties resolve by cell position
        order = np.argsort(-rem, kind="stable")
        floor[order[:short]] += 1
    return floor


def _fold_residual(shares: np.ndarray, total: float) -> None:
    """Adjust one cell so the correctly rounded sum of ``shares`` equals ``total``.

    The largest cell takes the remainder first; its ulp can equal the
    total's, in which case round-half-even may step over the total, so the
    smallest cell (finer ulp) is tried next.
    """
    for cell in (int(np.argmax(shares)), int(np.argmin(shares))):
        shares[cell] = 0.0
        shares[cell] = max(total - math.fsum(shares), 0.0)
        for _ in range(64):
            s = math.fsum(shares)
            if s == total:
                return
            shares[cell] = np.nextafter(shares[cell], np.inf if s < total else -np.inf)


def disaggregate_population(
    unit: AdminUnit,
    landcover: np.ndarray,
    weights: Mapping | None = None,
    integerize: bool = False,
) -> np.ndarray:
    """Population raster for one unit (zero outside the unit's mask).

    ``landcover`` holds :class:`DevClass` codes. With no developed cell in
    the unit, the population is spread uniformly over the unit. Cell values
    sum to the unit total exactly: a float residual is folded into the most
    populated cell, and ``integerize`` uses largest-remainder rounding.
    """
    landcover = np.asarray(landcover)
    _check_shapes(unit, landcover)
    if unit.n_cells == 0:
        raise ValueError(f"unit {unit.unit_id}: empty mask")
    weights = DEFAULT_WEIGHTS if weights is None else weights
    wmap = {int(k): float(v) for k, v in weights.items()}
    if all(v == 0 for v in wmap.values()):
        raise ValueError("all development weights are zero")
    w = np.zeros(landcover.shape)
    for cls, val in wmap.items():
        w[(landcover == cls) & unit.mask] = val
    if w.sum() == 0:
        w = unit.mask.astype(float)
    total = float(unit.population)
    out = np.zeros(landcover.shape)
    idx = np.flatnonzero(w)
    wv = w.ravel()[idx]
    shares = total * wv / math.fsum(wv)
    if integerize:
        if not float(total).is_integer():
            raise ValueError("integerized disaggregation needs an integer population total")
        shares = _largest_remainder(int(total), shares)
    else:
        _fold_residual(shares, total)
    out.ravel()[idx] = shares
    return out


def exposure_percent(inundation, unit: AdminUnit, population: np.ndarray) -> float:
    wet = _wet(inundation)
    population = np.asarray(population, dtype=float)
    _check_shapes(unit, wet, population)
    total = math.fsum(population[unit.mask])
    if total <= 0:
        raise ValueError(f"unit {unit.unit_id}: zero total population")
    exposed = math.fsum(population[unit.mask & wet])
    return min(100.0, 100.0 * exposed / total)


def _pair(xs, ys) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("need two 1-d sequences of equal length")
    if x.size < 3:
        raise ValueError("need at least 3 pairs")
    return x, y


def pearson(xs, ys) -> float:
    x, y = _pair(xs, ys)
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = np.dot(dx, dx), np.dot(dy, dy)
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance")
    return float(np.clip(np.dot(dx, dy) / math.sqrt(sxx * syy), -1.0, 1.0))


def spearman_rank(xs, ys) -> float:
    """Pearson correlation of mid-ranks (ties share their average rank)."""
    x, y = _pair(xs, ys)
    return pearson(rankdata(x, method="average"), rankdata(y, method="average"))


def exceedance_counts(
    records: Iterable[RiskRecord], threshold: float, metric: str = "hazard"
) -> dict[str, int]:
    """Number of units per epoch whose metric is strictly above ``threshold``."""
    if metric not in ("hazard", "exposure"):
        raise ValueError("metric must be 'hazard' or 'exposure'")
    counts: dict[str, int] = {}
    for rec in records:
        counts.setdefault(rec.epoch, 0)
        if getattr(rec, metric) > threshold:
            counts[rec.epoch] += 1
    return dict(sorted(counts.items()))


def load_admin_units(id_raster: np.ndarray, attributes_csv, cell_area_km2: float) -> list[AdminUnit]:
    """Build units from an integer-id raster plus ``unit_id,class,name,population``."""
    ids = np.asarray(id_raster)
    units = []
    with Path(attributes_csv).open(newline="") as fh:
        for row in csv.DictReader(fh):
            uid = row["unit_id"]
            mask = ids == int(float(uid))
            units.append(
                AdminUnit(uid, row.get("class", ""), mask, float(row["population"]),
                          cell_area_km2, row.get("name", ""))
            )
    return sorted(units, key=lambda u: u.unit_id)


_RECORD_HEADER = ["unit_id", "class", "epoch", "hazard_pct", "exposure_pct"]


def write_risk_records(records: Sequence[RiskRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_RECORD_HEADER)
        for r in sorted(records, key=lambda r: (r.epoch, r.unit_id)):
            w.writerow([r.unit_id, r.kind, r.epoch, repr(r.hazard), repr(r.exposure)])
    return path


def read_risk_records(path) -> list[RiskRecord]:
    with Path(path).open(newline="") as fh:
        return [
            RiskRecord(r["unit_id"], float(r["hazard_pct"]), float(r["exposure_pct"]),
                       r["epoch"], r.get("class", ""))
            for r in csv.DictReader(fh)
        ]
