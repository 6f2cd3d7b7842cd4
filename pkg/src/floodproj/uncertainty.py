"""Cumulative uncertainty decomposition over a full-factorial scenario tensor.

A projection tensor holds one value per combination of scenario choices,
one axis per modelling stage in chain order (e.g. climate, hydrology,
hydraulics). The cumulative uncertainty up to stage ``k`` measures the spread
obtained by varying stages ``1..k`` with later stages held fixed, averaged
over every setting of the later stages. Stage contributions are successive
differences of cumulative values, so they always add up to the total.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "ProjectionTensor",
    "DecompositionReport",
    "measure_range",
    "measure_std",
    "MEASURES",
    "conditional_cumulative",
    "marginal_cumulative",
    "stage_uncertainty",
    "decompose",
    "read_tensor_csv",
    "write_tensor_csv",
    "write_report_csv",
    "format_report",
]


def measure_range(values) -> float:
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("range of an empty set")
    return float(v.max() - v.min())


def measure_std(values) -> float:
    """Population standard deviation (divides by n)."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("standard deviation of an empty set")
    return float(np.sqrt(np.mean((v - v.mean()) ** 2)))


MEASURES: dict[str, Callable] = {"range": measure_range, "std": measure_std}


def _axis_measure(name: str, block: np.ndarray) -> np.ndarray:
    # block: (n_varied, n_suffix); measure down axis 0
    if name == "range":
        return block.max(axis=0) - block.min(axis=0)
    if name == "std":
        mean = block.mean(axis=0)
        return np.sqrt(np.mean((block - mean) ** 2, axis=0))
    raise ValueError(f"unknown measure {name!r}; expected one of {sorted(MEASURES)}")


@dataclass
class ProjectionTensor:
    stages: tuple[str, ...]
    labels: tuple[tuple[str, ...], ...]
    values: np.ndarray

    def __post_init__(self):
        self.stages = tuple(self.stages)
        self.labels = tuple(tuple(str(x) for x in ls) for ls in self.labels)
        self.values = np.asarray(self.values, dtype=float)
        if len(self.stages) != len(self.labels) or self.values.ndim != len(self.stages):
            raise ValueError("need one label list and one tensor axis per stage")
        shape = tuple(len(ls) for ls in self.labels)
        if self.values.shape != shape:
            raise ValueError(f"values shape {self.values.shape} != label counts {shape}")
        if any(len(set(ls)) != len(ls) for ls in self.labels):
            raise ValueError("scenario labels must be unique within a stage")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("tensor contains non-finite values")

    @classmethod
    def from_array(cls, values, stages: Sequence[str] | None = None) -> "ProjectionTensor":
        values = np.asarray(values, dtype=float)
        if stages is None:
            stages = tuple(f"stage{i + 1}" for i in range(values.ndim))
        labels = tuple(tuple(str(j) for j in range(n)) for n in values.shape)
        return cls(tuple(stages), labels, values)

    @property
    def n_stages(self) -> int:
        return len(self.stages)

    def index_of(self, stage: int, label) -> int:
        try:
            return self.labels[stage].index(str(label))
        except ValueError:
            raise ValueError(
                f"unknown label {label!r} for stage {self.stages[stage]!r}"
            ) from None


@dataclass
class DecompositionReport:
    measure: str
    stages: tuple[str, ...]
    stage: np.ndarray
    cumulative: np.ndarray
    total: float

    @property
    def stage_fraction(self) -> np.ndarray:
        """Percent share of each stage in the total (zeros for a zero total)."""
        if self.total == 0:
            return np.zeros_like(self.stage)
        return 100.0 * self.stage / self.total

    @property
    def cumulative_fraction(self) -> np.ndarray:
        if self.total == 0:
            return np.zeros_like(self.cumulative)
        return 100.0 * self.cumulative / self.total

    def telescoping_error(self) -> float:
        return abs(float(np.sum(self.stage)) - self.total)


def _check_k(tensor: ProjectionTensor, k: int) -> None:
    if not 1 <= k <= tensor.n_stages:
        raise ValueError(f"stage index k must be in 1..{tensor.n_stages}, got {k}")


def conditional_cumulative(tensor: ProjectionTensor, k: int, suffix=(), measure="range") -> float:
    """Spread of the values when stages 1..k vary and the rest are fixed.

    ``suffix`` gives labels for stages k+1..K in order; it is empty for k = K.
    """
    _check_k(tensor, k)
    suffix = tuple(suffix)
    if len(suffix) != tensor.n_stages - k:
        raise ValueError(f"suffix must name {tensor.n_stages - k} later-stage labels")
    idx = tuple(tensor.index_of(k + j, lab) for j, lab in enumerate(suffix))
    block = tensor.values[(Ellipsis,) + idx] if idx else tensor.values
    return MEASURES[measure](block)


def _cumulative_all(values: np.ndarray, measure: str) -> np.ndarray:
    shape = values.shape
    out = np.empty(len(shape))
    for k in range(1, len(shape) + 1):
        n_varied = int(np.prod(shape[:k]))
        block = values.reshape(n_varied, -1)
        out[k - 1] = float(np.mean(_axis_measure(measure, block)))
    return out


def marginal_cumulative(tensor: ProjectionTensor, k: int, measure="range") -> float:
    """Average of the conditional cumulative spread over all later-stage settings."""
    _check_k(tensor, k)
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    return float(_cumulative_all(tensor.values, measure)[k - 1])


def stage_uncertainty(tensor: ProjectionTensor, k: int, measure="range") -> float:
    _check_k(tensor, k)
    cum = _cumulative_all(tensor.values, measure)
    prev = cum[k - 2] if k > 1 else 0.0
    return float(cum[k - 1] - prev)


def decompose(tensor: ProjectionTensor, measure="range") -> DecompositionReport:
    if measure not in MEASURES:
        raise ValueError(f"unknown measure {measure!r}")
    cum = _cumulative_all(tensor.values, measure)
    stage = np.diff(np.concatenate([[0.0], cum]))
    return DecompositionReport(measure, tensor.stages, stage, cum, float(cum[-1]))


# -- I/O ---------------------------------------------------------------------


def read_tensor_csv(path) -> ProjectionTensor:
    """Rows ``stage1_label,...,stageK_label,value``; header names the stages."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty tensor file")
    header, body = rows[0], [r for r in rows[1:] if r]
    stages = tuple(header[:-1])
    if not stages:
        raise ValueError(f"{path}: need at least one stage column")
    labels: list[list[str]] = [[] for _ in stages]
    for r in body:
        if len(r) != len(header):
            raise ValueError(f"{path}: malformed row {r}")
        for j, lab in enumerate(r[:-1]):
            if lab not in labels[j]:
                labels[j].append(lab)
    shape = tuple(len(ls) for ls in labels)
    values = np.full(shape, np.nan)
    seen = set()
    for r in body:
        idx = tuple(labels[j].index(lab) for j, lab in enumerate(r[:-1]))
        if idx in seen:
            raise ValueError(f"{path}: duplicate combination {r[:-1]}")
        seen.add(idx)
        values[idx] = float(r[-1])
    if len(seen) != int(np.prod(shape)):
        missing = int(np.prod(shape)) - len(seen)
        raise ValueError(f"{path}: incomplete factorial, {missing} combination(s) missing")
    return ProjectionTensor(stages, tuple(tuple(ls) for ls in labels), values)


def write_tensor_csv(tensor: ProjectionTensor, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(tensor.stages) + ["value"])
        for idx in itertools.product(*(range(len(ls)) for ls in tensor.labels)):
            labs = [tensor.labels[j][i] for j, i in enumerate(idx)]
            w.writerow(labs + [repr(float(tensor.values[idx]))])
    return path


def write_report_csv(reports: Sequence[DecompositionReport], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["measure", "stage", "stage_uncertainty", "stage_percent",
             "cumulative_uncertainty", "cumulative_percent"]
        )
        for rep in reports:
            for j, name in enumerate(rep.stages):
                w.writerow([
                    rep.measure, name,
                    repr(float(rep.stage[j])), repr(float(rep.stage_fraction[j])),
                    repr(float(rep.cumulative[j])), repr(float(rep.cumulative_fraction[j])),
                ])
    return path


def format_report(report: DecompositionReport, unit: str = "km2", digits: int = 3) -> str:
    """Plain-text table: stage and cumulative uncertainty with bracketed shares."""
    head = f"Uncertainty decomposition ({report.measure})"
    lines = [head, "-" * len(head)]
    width = max(len(s) for s in report.stages + ("stage",))
    lines.append(f"{'stage':<{width}}  {'stage uncertainty':>24}  {'cumulative uncertainty':>26}")
    for j, name in enumerate(report.stages):
        s = f"{report.stage[j]:.{digits}f} {unit} ({report.stage_fraction[j]:.1f}%)"
        c = f"{report.cumulative[j]:.{digits}f} {unit} ({report.cumulative_fraction[j]:.1f}%)"
        lines.append(f"{name:<{width}}  {s:>24}  {c:>26}")
    lines.append(f"total: {report.total:.{digits}f} {unit}")
    lines.append(f"telescoping check |sum(stage) - total| = {report.telescoping_error():.3e}")
    return "\n".join(lines)
