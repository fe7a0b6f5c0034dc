"""Exception types shared across the package."""

from __future__ import annotations


class OperaError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(OperaError, ValueError):
    """A size, radix or divisibility precondition does not hold."""


class ValidationError(OperaError, ValueError):
    """An input structure (factorization, topology, trace) is malformed."""


class TopologyInvariantError(OperaError):
    """A constructed object violates an invariant it should hold by design."""


class InfeasibleSizingError(InvalidParameterError):
    """Cost-equivalent sizing does not land on an integral topology.

    ``nearest`` lists nearby feasible configurations as dicts.
    """

    def __init__(self, message: str, nearest: list[dict] | None = None):
        super().__init__(message)
        self.nearest = nearest or []


class NoCandidateError(OperaError):
    """No Valiant intermediate is available; the caller should wait for a direct circuit."""
