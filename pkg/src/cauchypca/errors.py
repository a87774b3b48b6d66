"""Exception hierarchy.

Every numeric failure carries a stable string ``code`` so the CLI can map
it to an exit status and tests can assert on it without string matching.
"""

from __future__ import annotations


class CauchyPcaError(Exception):
    """Base class for all numeric failures raised by this package."""

    code = "ERROR"

    def __init__(self, message: str, *, component: int | None = None) -> None:
        super().__init__(message)
        self.component = component

    def __str__(self) -> str:
        msg = super().__str__()
        if self.component is not None:
            return f"[{self.code}] component {self.component}: {msg}"
        return f"[{self.code}] {msg}"


class ConvergenceError(CauchyPcaError):
    code = "FAILED_CONVERGENCE"


class ZeroVarianceError(CauchyPcaError):
    code = "ZERO_VARIANCE"


class DegenerateSampleError(CauchyPcaError):
    code = "DEGENERATE_SAMPLE"


class ZeroUpdateError(CauchyPcaError):
    code = "ZERO_UPDATE"


class UnsupportedDimensionError(CauchyPcaError):
    code = "UNSUPPORTED_DIMENSION"


class MultiplicityError(CauchyPcaError):
    code = "MULTIPLICITY"


class SingularMatrixError(CauchyPcaError):
    code = "SINGULAR_A"


class SingularFisherError(CauchyPcaError):
    code = "SINGULAR_FISHER"


class ZeroScaleError(CauchyPcaError):
    code = "ZERO_SCALE"

    def __init__(self, message: str, *, column: int) -> None:
        super().__init__(message)
        self.column = column


class SimulationAbortError(CauchyPcaError):
    code = "TOO_MANY_FAILURES"
