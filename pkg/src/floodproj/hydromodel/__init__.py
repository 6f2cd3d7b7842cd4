"""Conceptual gridded runoff model, kinematic routing and calibration."""

from .calibration import (
    CalibrationResult,
    SLSConfig,
    calibrate_model,
    calibrate_sls,
    model_objective,
    write_calibration_report,
)
from .metrics import modified_correlation, nse, objective_function
from .model import (
    PARAM_FIELDS,
    CellParams,
    ForcingGrid,
    ModelState,
    MultiplierVector,
    SimulatedFlow,
    WaterBudget,
    read_forcing_dir,
    simulate_runoff,
    write_forcing_dir,
)
from .network import ChannelNetwork, CyclicNetworkError, d8_from_dem
from .routing import RoutingResult, kinematic_celerity, rating_discharge, route_kinematic

__all__ = [
    "PARAM_FIELDS",
    "CalibrationResult",
    "CellParams",
    "ChannelNetwork",
    "CyclicNetworkError",
    "ForcingGrid",
    "ModelState",
    "MultiplierVector",
    "RoutingResult",
    "SLSConfig",
    "SimulatedFlow",
    "WaterBudget",
    "calibrate_model",
    "calibrate_sls",
    "d8_from_dem",
    "kinematic_celerity",
    "model_objective",
    "modified_correlation",
    "nse",
    "objective_function",
    "rating_discharge",
    "read_forcing_dir",
    "route_kinematic",
    "simulate_runoff",
    "write_calibration_report",
    "write_forcing_dir",
]
