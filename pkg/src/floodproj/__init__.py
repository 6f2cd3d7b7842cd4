"""Riverine flood-risk projection chain.

Runoff simulation and calibration, nonstationary peaks-over-threshold
extremes, drainage-area regionalization, local-inertial inundation, hazard
and exposure metrics, and cumulative uncertainty decomposition.
"""

__version__ = "0.1.0"
