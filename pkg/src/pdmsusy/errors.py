"""Exception taxonomy.

Configuration problems and bad user input raise :class:`InvalidArgumentError`
(or a subclass); breakdowns of the numerics raise :class:`NumericalError`
subclasses.  The CLI maps the two families onto distinct exit codes.
"""


class PdmsusyError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(PdmsusyError, ValueError):
    """A precondition on user-supplied arguments was violated."""


class DomainError(InvalidArgumentError):
    """Evaluation was requested outside a function's domain of validity."""


class GridMismatchError(InvalidArgumentError):
    """Two sampled functions do not share a grid."""


class WrongAlgorithmError(InvalidArgumentError):
    """The requested operation is the wrong algorithm for these inputs."""


class WrongModeError(InvalidArgumentError):
    """Operation applied to a transform of the wrong kind."""


class ConfigError(InvalidArgumentError):
    """A run configuration file or override could not be validated."""


class NumericalError(PdmsusyError):
    """Base class for runtime numerical failures."""


class DegenerateFunctionError(NumericalError):
    """An operation received an (effectively) identically-zero function."""


class InvalidSeedError(NumericalError):
    """A transformation seed failed its eigen-residual validation.

    Attributes:
        residual: the offending relative residual, when available.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class DegenerateWronskianError(NumericalError):
    """Two seeds are proportional, so their Wronskian vanishes identically."""


class NoRegularSubdomainError(NumericalError):
    """Every subdomain between singularities is too small to be usable."""


class InstabilityError(NumericalError):
    """A numerical procedure blew up; the message names the failing step."""


class SolverError(NumericalError):
    """The eigensolver failed to converge; message carries diagnostics."""
