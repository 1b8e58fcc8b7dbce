"""Exception types shared across the solver."""


class ConfigError(ValueError):
    """Invalid configuration: bad mesh sizes, unknown scenario, bad CLI options."""


class DomainError(ValueError):
    """A point or index lies outside the computational domain."""


class InvalidStateError(RuntimeError):
    """The discrete state is unusable: NaN coefficients, density collapse."""


class PositivityError(InvalidStateError):
    """A cell average of a nonnegative quantity went negative."""
