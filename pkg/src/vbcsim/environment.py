from dataclasses import dataclass

from .errors import DomainError

#: Rated depth of the as-built vehicle (hydrostatic load on the actuators).
RATED_DEPTH_LIMIT = 12.0


@dataclass(frozen=True)
class EnvironmentParams:
    """Water and site parameters. Depth is positive down."""

    rho: float = 1000.0
    g: float = 9.81
    p_atm: float = 101325.0
    current: tuple = (0.0, 0.0, 0.0)
    depth_max: float = RATED_DEPTH_LIMIT

    def __post_init__(self):
        if not self.rho > 0 or not self.g > 0 or not self.p_atm > 0:
            raise DomainError("rho, g and p_atm must be positive")
        if not 0 < self.depth_max <= RATED_DEPTH_LIMIT:
            raise DomainError(
                f"depth_max {self.depth_max} m outside (0, {RATED_DEPTH_LIMIT}] m")
        if len(self.current) != 3:
            raise DomainError("current must be a 3-vector")
        object.__setattr__(self, "current", tuple(float(c) for c in self.current))
