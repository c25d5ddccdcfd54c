"""Rigid-body simulation of the vehicle under hydrostatic and drag loads.

Position is inertial NED (z is depth, positive down). Velocities are in the
body frame. The equations of motion are written about the body origin in
Kirchhoff form, so the rigid-body and added-mass Coriolis terms both come
out of a single generalised mass matrix.
"""
from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np

from .environment import EnvironmentParams
from .errors import DomainError, SimulationFault
from .rotation import quat_exp, quat_from_euler, quat_multiply, quat_to_euler, quat_to_matrix, skew
from . import _kernels
from .vehicle import (ACTUATOR_X_SIGN, ACTUATOR_Y_SIGN, ActuatorState, check_extensions,
                      composite, static_terms)


class RigidBodyState(NamedTuple):
    position: np.ndarray          # inertial NED, m
    attitude: np.ndarray          # unit quaternion, body -> inertial
    velocity: np.ndarray          # body, m/s
    angular_velocity: np.ndarray  # body, rad/s

    @classmethod
    def at_rest(cls, depth=0.0, roll=0.0, pitch=0.0, yaw=0.0, x=0.0, y=0.0):
        return cls(np.array([x, y, depth], float), quat_from_euler(roll, pitch, yaw),
                   np.zeros(3), np.zeros(3))

    @property
    def depth(self):
        return float(self.position[2])

    def euler(self):
        return quat_to_euler(self.attitude)


@dataclass(frozen=True)
class DragModel:
    """Quadratic drag per body axis and a diagonal added-mass matrix."""

    translational: tuple = (28.0, 84.0, 90.0)  # N s^2/m^2
    rotational: tuple = (0.1, 0.3, 0.3)        # N m s^2/rad^2
    added_mass: tuple = (1.1, 1.1, 1.1, 0.0, 0.0, 0.0)

    def __post_init__(self):
        for name in ("translational", "rotational", "added_mass"):
            vals = tuple(float(v) for v in getattr(self, name))
            if any(v < 0 for v in vals):
                raise DomainError(f"drag {name} coefficients must be non-negative")
            object.__setattr__(self, name, vals)
        if len(self.translational) != 3 or len(self.rotational) != 3 or len(self.added_mass) != 6:
            raise DomainError("drag model needs 3 + 3 coefficients and 6 added-mass terms")


@dataclass(frozen=True)
class ActuatorDynamics:
    max_speed: float = 0.008  # m/s
    deadband: float = 1e-4    # m

    def __post_init__(self):
        if not self.max_speed > 0:
            raise DomainError("actuator max_speed must be positive")
        if self.deadband < 0:
            raise DomainError("actuator deadband must be non-negative")


@dataclass(frozen=True)
class SensorNoise:
    pressure_sigma: float = 50.0              # Pa
    angle_sigma: float = math.radians(0.5)    # rad


class SensorReading(NamedTuple):
    pressure: float
    roll: float
    pitch: float
    yaw: float
    timestamp: float


class DepthFix(NamedTuple):
    depth: float
    surfaced: bool


class PlantTerms(NamedTuple):
    mass: float
    com: np.ndarray
    volume: float
    cob: np.ndarray
    M: np.ndarray
    M_inv: np.ndarray


def plant_terms(geom, ext, drag=DragModel()):
    """Mass matrix and hydrostatic data for fixed piston extensions."""
    mass, com, inertia_o, volume, cob = composite(geom, ext)
    M = np.zeros((6, 6))
    M[:3, :3] = mass * np.eye(3)
    S = skew(com)
    M[:3, 3:] = -mass * S
    M[3:, :3] = mass * S
    M[3:, 3:] = inertia_o
    M += np.diag(drag.added_mass)
    return PlantTerms(mass, com, volume, cob, M, np.linalg.inv(M))


def drag_wrench(state, drag=DragModel(), env=EnvironmentParams()):
    v = state.velocity
    if any(env.current):
        R = quat_to_matrix(state.attitude)
        v = v - R.T @ np.asarray(env.current)
    w = state.angular_velocity
    out = np.empty(6)
    out[:3] = -np.asarray(drag.translational) * v * np.abs(v)
    out[3:] = -np.asarray(drag.rotational) * w * np.abs(w)
    return out


def step(state, geom, ext, env=EnvironmentParams(), drag=DragModel(), dt=1e-3,
         terms=None, tick=0):
    """Advance one semi-implicit Euler step.

    ``terms`` may carry a precomputed :func:`plant_terms` for ``ext``; the
    caller is responsible for keeping it in sync.
    """
    if not 0 < dt <= 0.1:
        raise DomainError(f"dt {dt} outside (0, 0.1] s")
    if terms is None:
        terms = plant_terms(geom, ext, drag)
    pos, q, v, w = _kernels.rigid_step(
        np.asarray(state.position, float), np.asarray(state.attitude, float),
        np.asarray(state.velocity, float), np.asarray(state.angular_velocity, float),
        terms.mass, terms.com, terms.volume, terms.cob, terms.M, terms.M_inv,
        env.rho, env.g, env.depth_max, np.asarray(env.current, float),
        np.asarray(drag.translational), np.asarray(drag.rotational), dt)
    if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(v))
            and np.all(np.isfinite(w)) and np.all(np.isfinite(q))):
        raise SimulationFault("non-finite rigid-body state", tick)
    return RigidBodyState(pos, q, v, w)


class Plant:
    """Vehicle, water and drag parameters packed for the compiled loop."""

    def __init__(self, geom, env=EnvironmentParams(), drag=DragModel(),
                 actuator=ActuatorDynamics()):
        self.geom, self.env, self.drag, self.actuator = geom, env, drag, actuator
        m_s, mm_s, i_s, v_s, vm_s = static_terms(geom)
        a = geom.actuator
        self._plant_args = (
            float(m_s), np.array(mm_s), np.array(i_s), float(v_s), np.array(vm_s),
            a.piston_area, np.array([a.mount_x, a.mount_y, a.mount_z]),
            ACTUATOR_X_SIGN.copy(), ACTUATOR_Y_SIGN.copy(), float(a.moving_mass),
            a.piston_diameter / 2, np.array(drag.added_mass, float))
        self._env_args = (env.rho, env.g, env.depth_max, np.array(env.current, float),
                          np.array(drag.translational, float), np.array(drag.rotational, float))

    def terms(self, ext):
        e = check_extensions(self.geom, ext)
        mass, com, volume, cob, M, M_inv = _kernels.plant(e, *self._plant_args)
        return PlantTerms(mass, com, volume, cob, M, M_inv)

    def advance(self, state, ext, command, n, dt, tick=0):
        """Run ``n`` physics steps while the pistons chase ``command``.

        Returns ``(state, extensions, piston_travel)``.
        """
        if not 0 < dt <= 0.1:
            raise DomainError(f"dt {dt} outside (0, 0.1] s")
        stroke = self.geom.actuator.stroke_max
        cmd = np.clip(np.asarray(command, float), 0.0, stroke)
        pos, q, v, w, e, travel, fault = _kernels.advance(
            n, np.asarray(state.position, float), np.asarray(state.attitude, float),
            np.asarray(state.velocity, float), np.asarray(state.angular_velocity, float),
            np.asarray(ext, float), cmd, self.actuator.max_speed, self.actuator.deadband,
            *self._plant_args, *self._env_args, dt)
        if fault >= 0:
            raise SimulationFault("non-finite rigid-body state", tick + fault)
        return RigidBodyState(pos, q, v, w), ActuatorState(*e), travel


def mechanical_energy(state, terms, env=EnvironmentParams()):
    """Kinetic plus hydrostatic potential energy (J), up to a constant."""
    nu = np.concatenate((state.velocity, state.angular_velocity))
    kinetic = 0.5 * nu @ terms.M @ nu
    R = quat_to_matrix(state.attitude)
    z = state.position[2]
    z_com = z + R[2] @ terms.com
    z_cob = z + R[2] @ terms.cob
    return kinetic - terms.mass * env.g * z_com + env.rho * env.g * terms.volume * z_cob


def actuator_update(command, ext, dyn=ActuatorDynamics(), dt=1e-3, stroke_max=0.1):
    """Slew each piston toward its command at no more than ``max_speed``."""
    cmd = np.clip(np.asarray(command, float), 0.0, stroke_max)
    cur = np.asarray(ext, float)
    delta = cmd - cur
    max_move = dyn.max_speed * dt
    moved = cur + np.clip(delta, -max_move, max_move)
    out = np.where(np.abs(delta) <= max(dyn.deadband, 0.0), cmd, moved)
    # completing a move within the last step (up to rounding) lands exactly on the command
    out = np.where(np.abs(delta) <= max_move * (1 + 1e-9), cmd, out)
    return ActuatorState(*np.clip(out, 0.0, stroke_max))


def sensor_sample(state, env=EnvironmentParams(), noise=SensorNoise(), rng=None, timestamp=0.0):
    """Bar30-style pressure and IMU Euler angles, with optional gaussian noise.

    ``rng`` is a ``numpy.random.Generator`` or an int seed; ``None`` samples
    without noise.
    """
    roll, pitch, yaw = quat_to_euler(state.attitude)
    pressure = env.p_atm + env.rho * env.g * float(state.position[2])
    if rng is not None:
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        n = rng.standard_normal(4)
        pressure += noise.pressure_sigma * n[0]
        roll += noise.angle_sigma * n[1]
        pitch += noise.angle_sigma * n[2]
        yaw += noise.angle_sigma * n[3]
    return SensorReading(pressure, roll, pitch, yaw, timestamp)


def depth_to_pressure(depth, env=EnvironmentParams()):
    return env.p_atm + env.rho * env.g * depth


def pressure_to_depth(p, env=EnvironmentParams()):
    if p < 0:
        raise DomainError(f"negative absolute pressure {p}")
    depth = (p - env.p_atm) / (env.rho * env.g)
    if depth < 0:
        return DepthFix(0.0, True)
    return DepthFix(depth, False)


def simulate(state, geom, ext, env=EnvironmentParams(), drag=DragModel(), dt=1e-3, duration=1.0):
    """Integrate with fixed pistons; returns the final state."""
    terms = plant_terms(geom, ext, drag)
    n = int(round(duration / dt))
    for k in range(n):
        state = step(state, geom, ext, env, drag, dt, terms=terms, tick=k)
    return state
