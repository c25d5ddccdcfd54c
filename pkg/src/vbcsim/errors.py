"""Exception types shared across the package."""


class DomainError(ValueError):
    """An input lies outside the domain of an operation."""


class ConfigError(ValueError):
    """A configuration file or override could not be resolved."""


class SimulationFault(RuntimeError):
    """Non-finite state encountered while integrating.

    ``tick`` is the physics step index at which the fault was detected and
    ``partial`` carries whatever log had been produced up to that point.
    """

    def __init__(self, message, tick, partial=None):
        super().__init__(f"{message} (tick {tick})")
        self.tick = tick
        self.partial = partial
