"""Exception hierarchy and process exit codes.

Exit code convention (used by the CLI and honoured by the service job
runner): 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


class Sg3dError(Exception):
    """Base class for all library errors."""

    exit_code = EXIT_NUMERICAL


class DataError(Sg3dError):
    """Invalid or inconsistent input data (shape mismatch, bad file, ...)."""

    exit_code = EXIT_DATA


class DimensionMismatch(DataError):
    """Operand dimensions incompatible with an operator or volume."""


class NonFiniteError(Sg3dError):
    """A NaN or Inf was produced or supplied where finite values are required."""

    exit_code = EXIT_NUMERICAL


class UnsupportedOperatorError(Sg3dError):
    """Forward operator without a usable SVD factorization.

    The exact likelihood sampler requires an (axis-separable) SVD; operators
    without one would need a gradient-based MCMC fallback which this library
    deliberately does not ship.
    """

    exit_code = EXIT_DATA


class InfeasibleCoverError(DataError):
    """Batch-cover spec cannot cover every slice the requested number of times."""


class PriorStepError(Sg3dError):
    """A prior sampler failed (non-finite output, remote failure, bad dims)."""

    exit_code = EXIT_NUMERICAL


class ChainAborted(Sg3dError):
    """A chain step failed; state was checkpointed for resume."""

    exit_code = EXIT_NUMERICAL

    def __init__(self, message: str, checkpoint_path=None, cause=None):
        super().__init__(message)
        self.checkpoint_path = checkpoint_path
        self.cause = cause
