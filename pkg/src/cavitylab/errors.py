"""Exception types raised across the package."""


class DomainError(ValueError):
    """An argument lies outside the region where a model is defined."""


class NoSteadyStateError(DomainError):
    """Net round-trip gain: the linear cavity has no steady state."""


class ConfigurationError(ValueError):
    """A parameter combination admits no feasible operating point."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to converge or produced non-finite output."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class IntegrationError(NumericalError):
    """Stochastic integration produced a non-finite state."""
