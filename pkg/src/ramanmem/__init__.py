"""Semiclassical simulator of a Doppler-broadened Raman quantum memory."""

from .core import (BeamGeometry, EnsembleState, FieldEnvelope, PhysicalConfig,
                   ProtocolTimeline, ReducedUnits, VelocityGrid, build_velocity_grid,
                   signal_bandwidth, velocity_grid_for)
from .errors import (ComparisonError, ConfigurationError, InfeasibleGeometryError,
                     RamanMemError, ResolutionError, UndefinedQuantityError, ValidityError)

__version__ = "0.1.0"

__all__ = [
    "BeamGeometry", "EnsembleState", "FieldEnvelope", "PhysicalConfig", "ProtocolTimeline",
    "ReducedUnits", "VelocityGrid", "build_velocity_grid", "signal_bandwidth",
    "velocity_grid_for", "ComparisonError", "ConfigurationError", "InfeasibleGeometryError",
    "RamanMemError", "ResolutionError", "UndefinedQuantityError", "ValidityError",
]
