"""INI configuration for the projection pipeline."""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from ..hydromodel.model import PARAM_FIELDS

__all__ = ["ConfigError", "PipelineConfig", "load_config", "config_hash", "with_overrides"]

_PATH_KEYS = ("basin_dem", "gages", "hydraulic_dem", "landcover", "admin_ids", "admin_attributes")


class ConfigError(ValueError):
    """Invalid or incomplete pipeline configuration."""


@dataclass(frozen=True)
class PipelineConfig:
    base_dir: str
    basin_dem: str
    gages: str
    hydraulic_dem: str
    landcover: str
    admin_ids: str
    admin_attributes: str
    inflow_row: int
    inflow_col: int
    inflow_area_km2: float
    members: tuple[str, ...]
    seed: int | None = None
    output_dir: str = "out"
    workers: int = 1
    forcing: str = "synthetic"
    start_year: int = 1981
    end_year: int = 2060
    precip_trend: tuple[float, ...] = ()
    warming: tuple[float, ...] = ()
    chunk_years: int = 10
    substeps: int = 1
    factors: dict[str, float] = field(default_factory=dict)
    percentile: float = 95.0
    min_separation_days: int = 3
    period_years: float = 100.0
    iterations: int = 20000
    burn_in: int = 5000
    quantiles: int = 10
    epochs: dict[str, int] = field(default_factory=lambda: {"baseline": 1995, "future": 2050})
    resolutions: tuple[int, ...] = (10, 30)
    manning: float = 0.045
    cfl: float = 0.7
    h_dry: float = 0.01
    tolerance: float = 1e-3
    window_steps: int = 1000
    max_time: float = 86400.0
    channel_min_area_km2: float | None = None
    a_w: float = 2.3
    b_w: float = 0.5
    a_d: float = 0.27
    b_d: float = 0.3
    weights: tuple[float, ...] = (0.1, 0.35, 0.65, 1.0)
    hazard_threshold: float = 60.0

    def path(self, key: str) -> Path:
        p = Path(getattr(self, key))
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def output_path(self) -> Path:
        p = Path(self.output_dir)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def quantile_levels(self) -> tuple[float, ...]:
        """Equally spaced posterior quantile levels i/(n+1), i = 1..n."""
        n = self.quantiles
        return tuple((i + 1) / (n + 1) for i in range(n))

    def forcing_dir(self, member: str) -> Path:
        p = Path(self.forcing.format(member=member))
        return p if p.is_absolute() else Path(self.base_dir) / p

    def hashable(self) -> dict:
        """Everything that determines outputs; paths as written, not resolved."""
        d = asdict(self)
        for k in ("base_dir", "workers", "output_dir"):
            d.pop(k)
        return d

    def validate(self, check_files: bool = True) -> None:
        problems = []
        if self.seed is None:
            problems.append("a seed is required (the extremes stage is stochastic)")
        if not self.members:
            problems.append("climate.members is empty")
        if len(set(self.members)) != len(self.members):
            problems.append("climate.members has duplicates")
        if self.forcing == "synthetic":
            for key in ("precip_trend", "warming"):
                if len(getattr(self, key)) not in (0, len(self.members)):
                    problems.append(f"climate.{key} needs one value per member")
        elif "{member}" not in self.forcing:
            problems.append("climate.forcing must be 'synthetic' or a path containing {member}")
        if self.end_year < self.start_year:
            problems.append("end_year precedes start_year")
        if self.quantiles < 1:
            problems.append("extremes.quantiles must be >= 1")
        if not self.resolutions or any(r <= 0 for r in self.resolutions):
            problems.append("hydraulics.resolutions must be positive")
        if len(set(self.resolutions)) != len(self.resolutions):
            problems.append("hydraulics.resolutions has duplicates")
        if not self.epochs:
            problems.append("no epochs defined")
        if self.burn_in >= self.iterations:
            problems.append("burn_in must be smaller than iterations")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if len(self.weights) != 4:
            problems.append("risk.weights needs four values (open, low, medium, high)")
        unknown = set(self.factors) - set(PARAM_FIELDS)
        if unknown:
            problems.append(f"unknown hydromodel factors {sorted(unknown)}")
        if check_files:
            for key in _PATH_KEYS:
                if not self.path(key).is_file():
                    problems.append(f"inputs.{key}: {self.path(key)} does not exist")
            if self.forcing != "synthetic":
                for m in self.members:
                    if not self.forcing_dir(m).is_dir():
                        problems.append(f"forcing directory {self.forcing_dir(m)} does not exist")
        if problems:
            raise ConfigError("; ".join(problems))


def config_hash(config: PipelineConfig) -> str:
    """SHA-256 of the canonical JSON form; independent of key order in the file."""
    text = json.dumps(config.hashable(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _floats(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.replace(",", " ").split())


def _strs(text: str) -> tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


_TYPES = {f.name: f.type for f in fields(PipelineConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    if key in ("members",):
        return _strs(raw)
    if key == "resolutions":
        return tuple(int(v) for v in _floats(raw))
    if kind.startswith("tuple[float"):
        return _floats(raw)
    if kind.startswith("int"):
        return int(raw)
    if kind.startswith("float"):
        return None if raw.strip().lower() in ("", "none") else float(raw)
    return raw.strip()


def load_config(path, **overrides) -> PipelineConfig:
    """Read an INI file; keyword ``overrides`` (e.g. ``seed=3``) win over the file.

    Sections are only for readability: every key maps to one config field,
    except ``[epochs]`` (label = year) and ``[hydromodel]`` factor names.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    values: dict = {"base_dir": str(path.parent)}
    factors = {}
    for section in cp.sections():
        for key, raw in cp.items(section):
            try:
                if section == "epochs":
                    values.setdefault("epochs", {})[key] = int(raw)
                elif section == "hydromodel" and key in PARAM_FIELDS:
                    factors[key] = float(raw)
                elif key in _TYPES and key not in ("base_dir", "epochs", "factors"):
                    values[key] = _convert(key, raw)
                else:
                    raise ConfigError(f"unknown key [{section}] {key}")
            except ValueError as exc:
                if isinstance(exc, ConfigError):
                    raise
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc
    values["factors"] = factors
    if "epochs" in values:
        values["epochs"] = dict(sorted(values["epochs"].items(), key=lambda kv: (kv[1], kv[0])))
    for k, v in overrides.items():
        if v is not None:
            values[k] = v
    try:
        return PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigError(f"incomplete configuration: {exc}") from exc


def with_overrides(config: PipelineConfig, **kw) -> PipelineConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})
