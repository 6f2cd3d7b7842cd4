"""Configuration, orchestration and reporting for the full projection chain."""

from .config import ConfigError, PipelineConfig, config_hash, load_config, with_overrides
from .manifest import MANIFEST_NAME, STAGES, RunManifest, load_manifest
from .reports import emit_reports, epoch_risk_records
from .run import run_pipeline, stage_seeds
from .synthetic import write_synthetic_inputs

__all__ = [
    "ConfigError",
    "PipelineConfig",
    "config_hash",
    "load_config",
    "with_overrides",
    "MANIFEST_NAME",
    "STAGES",
    "RunManifest",
    "load_manifest",
    "emit_reports",
    "epoch_risk_records",
    "run_pipeline",
    "stage_seeds",
    "write_synthetic_inputs",
]
