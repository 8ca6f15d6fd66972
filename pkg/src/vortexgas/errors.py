"""Exception hierarchy shared by every module.

Each class carries a short machine-readable ``code`` used by the CLI when
reporting failures.
"""


class VortexGasError(Exception):
    code = "E_GENERIC"


class ValidationError(VortexGasError, ValueError):
    code = "E_VALIDATION"


class GeometryError(VortexGasError, ValueError):
    code = "E_GEOMETRY"


class ResolutionError(VortexGasError, ValueError):
    code = "E_RESOLUTION"


class SingularityError(VortexGasError, ArithmeticError):
    code = "E_SINGULARITY"


class IntegrationAbort(VortexGasError, RuntimeError):
    """Raised when a trajectory has to stop early.

    ``time`` holds the simulation time at which the problem was detected.
    """

    code = "E_INTEGRATION"

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class InfeasibleError(VortexGasError, ValueError):
    code = "E_INFEASIBLE"


class DegeneracyError(VortexGasError, ArithmeticError):
    code = "E_DEGENERATE"


class RangeError(VortexGasError, OverflowError):
    code = "E_RANGE"


class ScaleRangeError(VortexGasError, ValueError):
    code = "E_SCALE_RANGE"


class LogDomainError(VortexGasError, ValueError):
    code = "E_LOG_DOMAIN"
