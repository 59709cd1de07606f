"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(ValueError):
    """A configuration or discretization invariant is violated."""


class IntegrationBlowupError(RuntimeError):
    """A trajectory produced a non-finite coefficient.

    Carries enough diagnostics to reproduce: the time and step index of the
    failure and the last finite observables seen.
    """

    def __init__(self, t, step, last_observables=None):
        self.t = t
        self.step = step
        self.last_observables = dict(last_observables or {})
        super().__init__(
            f"non-finite state at t={t} (step {step}); "
            f"last finite observables: {self.last_observables}"
        )
