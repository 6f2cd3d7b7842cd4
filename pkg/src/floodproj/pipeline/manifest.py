"""Run manifest: the record of one pipeline run and the source for its reports."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..uncertainty import ProjectionTensor

__all__ = ["RunManifest", "load_manifest", "STAGES", "MANIFEST_NAME"]

STAGES = ("climate", "hydrology", "hydraulic")
MANIFEST_NAME = "manifest.json"


@dataclass
class RunManifest:
    config_hash: str
    seed: int | None
    epochs: dict[str, int]
    labels: dict[str, list[str]]
    quantile_levels: list[float] = field(default_factory=list)
    inputs: dict[str, str] = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    return_levels: list[dict] = field(default_factory=list)
    gage_peaks: list[dict] = field(default_factory=list)
    scaling: list[dict] = field(default_factory=list)
    runs: list[dict] = field(default_factory=list)
    risk: list[dict] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)
    outputs: list[str] = field(default_factory=list)

    @classmethod
    def empty(cls) -> "RunManifest":
        return cls("", None, {}, {s: [] for s in STAGES})

    @property
    def status(self) -> int:
        """Process exit code: 0 when every combination succeeded, 2 otherwise."""
        return 2 if self.failures else 0

    def extent(self, epoch: str, climate: str, hydrology: str, hydraulic: str) -> float | None:
        for r in self.runs:
            if (r["epoch"], r["climate"], r["hydrology"], r["hydraulic"]) == (
                    epoch, climate, hydrology, hydraulic) and r["status"] == "ok":
                return r["area_km2"]
        return None

    def tensor(self, epoch: str) -> ProjectionTensor:
        """Extent tensor of one epoch; raises if any combination is missing."""
        shape = tuple(len(self.labels[s]) for s in STAGES)
        vals = np.full(shape, np.nan)
        for i, c in enumerate(self.labels["climate"]):
            for j, h in enumerate(self.labels["hydrology"]):
                for k, d in enumerate(self.labels["hydraulic"]):
                    v = self.extent(epoch, c, h, d)
                    if v is not None:
                        vals[i, j, k] = v
        missing = int(np.isnan(vals).sum())
        if missing:
            raise ValueError(f"epoch {epoch}: tensor incomplete, {missing} of {vals.size} "
                             "combinations failed; uncertainty decomposition skipped")
        return ProjectionTensor(STAGES, tuple(tuple(self.labels[s]) for s in STAGES), vals)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=1)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def write(self, directory) -> Path:
        path = Path(directory) / MANIFEST_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_json() + "\n")
        return path


def load_manifest(path) -> RunManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    return RunManifest(**json.loads(path.read_text()))


