class DomainError(ValueError):
    """An argument lies outside the domain where a model is defined."""


class ConfigError(ValueError):
    """A scenario configuration could not be parsed or validated."""


class SimulationIntegrityError(RuntimeError):
    """The simulated protocol reached a state that indicates a bug."""
