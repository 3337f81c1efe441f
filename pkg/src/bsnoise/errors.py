"""Exception hierarchy shared by every module of the toolkit."""


class BosonNoiseError(Exception):
    """Base class for all errors raised by ``bsnoise``."""


class DimensionError(BosonNoiseError, ValueError):
    """Shapes or sizes do not satisfy an operation's contract."""


class ContractError(BosonNoiseError, ValueError):
    """An input violates a structural precondition (unitarity, Hermiticity, mode alignment...)."""


class SizeCapError(BosonNoiseError, ValueError):
    """A request exceeds a documented computational cap (factorial or exponential blowup)."""


class PatternError(BosonNoiseError, ValueError):
    """An output pattern does not hold the expected number of photons."""


class PreconditionError(BosonNoiseError, ValueError):
    """A numerical precondition failed, e.g. a matrix is too far from the identity."""


class ConvergenceError(BosonNoiseError, RuntimeError):
    """An iterative method did not converge.

    Attributes:
        last_iterate: the final iterate reached before giving up.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class ConfigError(BosonNoiseError, ValueError):
    """An experiment configuration is invalid."""
