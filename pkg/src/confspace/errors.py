"""Exception hierarchy shared by all confspace modules."""


class ConfspaceError(Exception):
    """Base class for every error raised by confspace."""


class PreconditionError(ConfspaceError, ValueError):
    """An operation was called outside its domain."""


class QuadratureError(ConfspaceError, ArithmeticError):
    """A quadrature did not reach its error tolerance."""


class ChainStuckError(ConfspaceError, RuntimeError):
    """A Markov chain rejected every proposal for too long."""


class ResourceLimitError(ConfspaceError):
    """A computation would exceed a configured budget."""


class ConfigError(ConfspaceError):
    """An experiment configuration could not be parsed or validated."""
