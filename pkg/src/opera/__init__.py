"""Construction, analysis and simulation of rotor-based expander datacenter networks."""

from __future__ import annotations

__version__ = "0.1.0"

from .errors import (
    InfeasibleSizingError,
    InvalidParameterError,
    NoCandidateError,
    OperaError,
    TopologyInvariantError,
    ValidationError,
)

__all__ = [
    "__version__",
    "OperaError",
    "InvalidParameterError",
    "ValidationError",
    "TopologyInvariantError",
    "InfeasibleSizingError",
    "NoCandidateError",
]
