"""Exception types shared across the package."""

from __future__ import annotations


class MpconeError(Exception):
    """Base class for all package-specific errors."""


class DimensionMismatch(MpconeError, ValueError):
    """Shapes of the supplied arrays are inconsistent."""


class NotPositiveDefinite(MpconeError, ValueError):
    """A Cholesky pivot fell below the positive-definiteness threshold."""


class NoConvergence(MpconeError, RuntimeError):
    """The eigenvalue backend exhausted its sweep budget."""


class Singular(MpconeError, ValueError):
    """Elimination broke down on a (numerically) singular system."""


class NotInterior(MpconeError, ValueError):
    """A point required to be in the cone interior is not."""


class NotAProjection(MpconeError, ValueError):
    """The supplied matrix is not a symmetric idempotent projection."""


class RankDeficient(MpconeError, ValueError):
    """A full-rank assumption on the problem data fails.

    ``which`` names the offending matrix ("A", "M" or "stacked").
    """

    def __init__(self, which: str, message: str):
        super().__init__(message)
        self.which = which


class OutsideDomain(MpconeError, ValueError):
    """The queried parameter lies outside the relevant parameter set."""


class BoundaryUndefined(MpconeError, RuntimeError):
    """The optimum is not attained, so the mapping has no witness here."""


class SolverFailure(MpconeError, RuntimeError):
    """The interior-point solver could not produce a usable iterate."""
