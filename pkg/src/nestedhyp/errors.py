"""Exception hierarchy shared by all modules."""


class HyperbolicError(Exception):
    """Base class for every error raised by nestedhyp."""


class DimensionError(HyperbolicError, ValueError):
    """Operands have incompatible shapes or dimensions."""


class InputError(HyperbolicError, ValueError):
    """Input values are malformed (non-finite, out of range, ...)."""


class InvalidPointError(InputError):
    """A vector is not a point of the hyperboloid."""


class InvalidTangentError(InputError):
    """A vector is not a valid (spacelike) tangent vector."""


class OutOfDiskError(InputError):
    """A Poincare-ball coordinate lies on or outside the unit sphere."""


class InvalidRotationError(InputError):
    """A matrix is not in SO(n)."""


class InvalidLorentzError(InputError):
    """A matrix is not in SO+(1, n)."""


class DegenerateInputError(HyperbolicError, ValueError):
    """Gram-Schmidt or a projection hit a (near) degenerate vector.

    ``step`` identifies the column index where orthonormalization failed.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class ConvergenceError(HyperbolicError, RuntimeError):
    """An iterative routine did not converge; ``last`` holds the final iterate."""

    def __init__(self, message, last=None, iterations=None):
        super().__init__(message)
        self.last = last
        self.iterations = iterations


class RetractionError(HyperbolicError, RuntimeError):
    """QR retraction encountered a rank-deficient matrix."""


class OptimizationError(HyperbolicError, RuntimeError):
    """The objective became non-finite; ``trace`` holds the history so far."""

    def __init__(self, message, trace=None, level=None):
        super().__init__(message)
        self.trace = trace
        self.level = level


class TrainingError(OptimizationError):
    """Training of the graph network failed."""


class UndefinedMetricError(HyperbolicError, ValueError):
    """A metric is undefined for the given labels (e.g. AUC with one class)."""


class TreeSpecError(HyperbolicError, ValueError):
    """A tree specification cannot be realized as a connected tree."""


class ParseError(HyperbolicError, ValueError):
    """A file could not be parsed; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, path=None):
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.line = line
        self.path = path
