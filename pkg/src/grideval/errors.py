"""Exception hierarchy shared across the package.

Every error carries an ``exit_code`` so the CLI can map failures onto the
documented process exit codes: 2 for bad input or configuration, 3 for
numerical failures, 4 when some prompts succeeded and others did not.
"""


class GridEvalError(Exception):
    exit_code = 1


class InputError(GridEvalError):
    """Bad user-supplied data or configuration."""

    exit_code = 2


class IngestionError(InputError):
    """Malformed or mutually inconsistent input files/records."""


class InvalidInputError(InputError):
    """Arguments violate an operation's preconditions."""


class ConfigError(InputError):
    """Invalid metric or run configuration."""


class CapabilityError(InputError):
    """Request exceeds a documented implementation limit."""


class EmptySampleError(InvalidInputError):
    """A statistic was requested over zero usable observations."""


class DegenerateSampleError(InvalidInputError):
    """The sample is degenerate for the requested statistic."""


class UndefinedKappaError(DegenerateSampleError):
    """Chance agreement equals 1, leaving kappa undefined."""


class NumericalError(GridEvalError):
    """A numeric routine failed or produced non-finite values."""

    exit_code = 3


class PartialFailure(GridEvalError):
    """Some cases failed while others succeeded."""

    exit_code = 4
