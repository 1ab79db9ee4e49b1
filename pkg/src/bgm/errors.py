"""Exception and warning types shared across the package."""


class BgmError(Exception):
    """Base class for all errors raised by this package."""

    #: short tag naming the subsystem that raised the error
    origin = "bgm"


class DimensionMismatch(BgmError, ValueError):
    origin = "glm"


class ConstantColumn(BgmError, ValueError):
    origin = "glm"

    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column} has zero variance")


class SolverError(BgmError, RuntimeError):
    origin = "glm"


class SeparationDetected(SolverError):
    """Fitted probabilities saturated for every observation.

    The partially fitted model is attached as ``fit``.
    """

    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class ConvergenceWarning(UserWarning):
    """A solver hit its iteration cap; the returned fit has ``converged=False``."""


class MirrorFitError(SolverError):
    origin = "mirrors"

    def __init__(self, feature, copy, cause):
        self.feature = feature
        self.copy = copy
        self.cause = cause
        super().__init__(f"mirror fit failed for feature {feature}, copy {copy}: {cause}")


class InvalidKappa(BgmError, ValueError):
    origin = "selector"


class InvalidThreshold(BgmError, ValueError):
    origin = "selector"


class InvalidSpec(BgmError, ValueError):
    origin = "simulation"


class NotPSD(BgmError, ValueError):
    origin = "simulation"


class IndexOutOfRange(BgmError, IndexError):
    origin = "simulation"


class ConfigError(BgmError, ValueError):
    origin = "cli"


class ParseError(BgmError, ValueError):
    origin = "io"

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class RaggedRows(ParseError):
    pass


class BadResponseValues(ParseError):
    pass
