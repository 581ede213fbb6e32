"""Exception types raised across the package."""


class PostVarError(Exception):
    """Base class for all package errors."""


class InvalidGateError(PostVarError, ValueError):
    """A gate references qubits that do not exist or repeats a qubit."""


class DimensionError(PostVarError, ValueError):
    """Two objects disagree on qubit count, length or matrix shape."""


class RangeError(PostVarError, ValueError):
    """A value lies outside its admissible interval."""


class EstimationError(PostVarError, ValueError):
    """An estimator was asked to work without enough samples."""


class PlanMismatchError(PostVarError, ValueError):
    """A budget plan does not match the registries it is applied to."""


class DegenerateMatrixError(PostVarError, ValueError):
    """A matrix has no nonzero singular value where one is required."""


class RankMismatchError(PostVarError, ValueError):
    """Two matrices were expected to share a rank but do not."""


class IDXParseError(PostVarError, ValueError):
    """Malformed IDX container; ``offset`` is the byte position of the fault."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ConvergenceError(PostVarError, RuntimeError):
    """An iterative solver hit its iteration cap.

    The last iterate and the final stationarity measure are kept on the
    exception so callers can inspect or reuse them.
    """

    def __init__(self, message, last_iterate=None, residual=None, n_iter=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual
        self.n_iter = n_iter


class ConfigError(PostVarError, ValueError):
    """One or more run-configuration constraints are violated."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
