"""Subgrid-channel bathymetry and a local-inertial flood inundation solver."""

from .bathymetry import DEFAULT_GEOMETRY, ChannelGeometry, HydraulicGeometry, estimate_bathymetry
from .solver import (
    FlowState,
    InundationMap,
    NonFiniteStateError,
    RunLog,
    SolverConfig,
    adaptive_timestep,
    normal_depth,
    read_inflows_csv,
    run_to_steady,
    step_local_inertial,
)

__all__ = [
    "DEFAULT_GEOMETRY",
    "ChannelGeometry",
    "HydraulicGeometry",
    "estimate_bathymetry",
    "FlowState",
    "InundationMap",
    "NonFiniteStateError",
    "RunLog",
    "SolverConfig",
    "adaptive_timestep",
    "normal_depth",
    "read_inflows_csv",
    "run_to_steady",
    "step_local_inertial",
]
