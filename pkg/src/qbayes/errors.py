"""Exception hierarchy shared by every module and mapped to CLI exit codes."""

import numpy as np


class QBayesError(Exception):
    """Base class for all errors raised by qbayes."""


class InvalidArgument(QBayesError, ValueError):
    """An argument violates an operation's precondition."""


class UnsupportedSizeError(QBayesError, ValueError):
    """The requested problem exceeds a configured dense-simulation cap."""


class ConfigError(QBayesError, ValueError):
    """An experiment or CLI configuration is missing or inconsistent."""


class FormatError(QBayesError, ValueError):
    """A data file does not follow its declared binary or text format."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalError(QBayesError, np.linalg.LinAlgError):
    """A linear-algebra step failed or lost the required accuracy."""


class SingularMatrixError(NumericalError):
    """A linear system that must be solved exactly is singular."""


class IllConditionedError(NumericalError):
    """Factorization failed even after the maximum jitter was added."""
