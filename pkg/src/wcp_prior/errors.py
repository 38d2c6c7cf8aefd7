"""Exception hierarchy -- every failure the library raises derives from WcpError."""

from __future__ import annotations


class WcpError(Exception):
    """Root of all wcp-prior errors."""


class DomainError(WcpError, ValueError):
    """A parameter lies outside the domain an operation is defined on."""


class NonPSDError(DomainError):
    """A covariance matrix has an eigenvalue below the PSD tolerance."""


class DivergentIntegralError(WcpError):
    """An integral, moment or distance is infinite."""


class UnsupportedMeasureError(WcpError):
    """A measure lacks the accessor (cdf, moment) an operation needs."""


class AssumptionViolationError(WcpError):
    """A distance map fails a structural check (monotonicity, limits, gradient)."""


class NumericalError(WcpError):
    """An iterative routine failed to converge or to bracket a root."""


class NonMonotoneFieldError(NumericalError):
    """Line search step underflowed: the distance is not monotone along the ray."""


class ResolutionError(NumericalError):
    """Level-curve subdivision exceeded its depth limit."""


class DegenerateLevelCurveError(NumericalError):
    """A level curve has (numerically) zero total arc length."""


class MeshingError(WcpError):
    """Triangulation produced no usable triangles."""


class ConfigurationError(WcpError):
    """Hyperparameters are inconsistent (e.g. an empty cutoff region)."""


class InfeasibleTargetError(WcpError):
    """No rate in the search bracket reaches the requested tail probability."""


class DegenerateOrderError(WcpError):
    """A two-step construction produced an identically zero step density."""


class DegenerateDataError(WcpError):
    """The MAP objective is -inf everywhere on the search domain."""


class AuditFailure(WcpError):
    """A normalization audit could not produce a finite integral."""

    def __init__(self, message: str, partial_sums: list[float] | None = None) -> None:
        super().__init__(message)
        self.partial_sums = partial_sums or []


class NondeterminismError(WcpError):
    """Two consecutive golden builds produced different tables."""
