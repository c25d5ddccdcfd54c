"""Composite-primitive vehicle model.

The vehicle is a flat plate, two static buoyancy-engine cylinders, a
control-housing cylinder and four dynamic cylinders whose lengths are the
piston extensions. Every primitive has its centre of mass and centre of
buoyancy at its own centroid. All offsets are in the body frame
(x forward, y right, z down) with the origin at the plate centroid.

Actuators are always ordered FL, BL, BR, FR.
"""
from dataclasses import dataclass, field, replace
from functools import lru_cache
import math
from typing import NamedTuple

import numpy as np

from .environment import EnvironmentParams
from .errors import DomainError
from .rotation import quat_to_matrix

ACTUATOR_NAMES = ("FL", "BL", "BR", "FR")
# FRD body frame: front is +x, left is -y
ACTUATOR_X_SIGN = np.array([1.0, -1.0, -1.0, 1.0])
ACTUATOR_Y_SIGN = np.array([-1.0, -1.0, 1.0, 1.0])

_EXT_TOL = 1e-12


@dataclass(frozen=True)
class BodyPrimitive:
    """A box or cylinder of uniform density.

    Box dimensions are ``(width, length, thickness)`` along (y, x, z).
    Cylinder dimensions are ``(diameter, length)`` with the length along
    ``axis``.
    """

    kind: str
    dimensions: tuple
    mass: float
    com_offset: tuple = (0.0, 0.0, 0.0)
    axis: str = "x"

    def __post_init__(self):
        if self.kind not in ("box", "cylinder"):
            raise DomainError(f"unknown primitive kind {self.kind!r}")
        expected = 3 if self.kind == "box" else 2
        if len(self.dimensions) != expected:
            raise DomainError(f"{self.kind} needs {expected} dimensions")
        if any(not d > 0 for d in self.dimensions):
            raise DomainError(f"{self.kind} dimensions must be positive: {self.dimensions}")
        if self.mass < 0:
            raise DomainError("primitive mass must be non-negative")
        if self.axis not in ("x", "y", "z"):
            raise DomainError(f"bad cylinder axis {self.axis!r}")
        object.__setattr__(self, "dimensions", tuple(float(d) for d in self.dimensions))
        object.__setattr__(self, "com_offset", tuple(float(c) for c in self.com_offset))

    @property
    def volume(self):
        if self.kind == "box":
            w, l, t = self.dimensions
            return w * l * t
        d, length = self.dimensions
        return math.pi * (d / 2) ** 2 * length

    def local_inertia(self):
        """Principal moments (Ixx, Iyy, Izz) about the centroid."""
        m = self.mass
        if self.kind == "box":
            w, l, t = self.dimensions
            return np.array([m * (w * w + t * t), m * (l * l + t * t), m * (l * l + w * w)]) / 12.0
        d, length = self.dimensions
        return _cylinder_inertia(m, d / 2, length, self.axis)


def _cylinder_inertia(m, r, length, axis="x"):
    axial = 0.5 * m * r * r
    transverse = m * (3 * r * r + length * length) / 12.0
    out = np.full(3, transverse)
    out["xyz".index(axis)] = axial
    return out


@dataclass(frozen=True)
class ActuatorGeometry:
    piston_diameter: float = 0.05715
    stroke_max: float = 0.100
    mount_x: float = 0.127
    mount_y: float = 0.124
    mount_z: float = 0.044
    moving_mass: float = 0.05

    def __post_init__(self):
        if not self.piston_diameter > 0 or not self.stroke_max > 0:
            raise DomainError("piston diameter and stroke must be positive")
        if self.moving_mass < 0 or self.mount_x < 0 or self.mount_y < 0:
            raise DomainError("actuator mount offsets and moving mass must be non-negative")

    @property
    def piston_area(self):
        return math.pi * (self.piston_diameter / 2) ** 2


@dataclass(frozen=True)
class PassiveTrim:
    """Unmodelled flotation or ballast lumped at a point."""

    added_mass: float = 0.0
    added_volume: float = 0.0
    location: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.added_mass < 0 or self.added_volume < 0:
            raise DomainError("passive trim mass and volume must be non-negative")
        object.__setattr__(self, "location", tuple(float(c) for c in self.location))


def _plate():
    return BodyPrimitive("box", (0.330, 0.457, 0.006), 0.945, (0.0, 0.0, 0.0))


def _be_static():
    return (
        BodyPrimitive("cylinder", (0.064, 0.257), 1.505, (0.0, -0.124, 0.044)),
        BodyPrimitive("cylinder", (0.064, 0.257), 1.505, (0.0, 0.124, 0.044)),
    )


def _housing():
    return BodyPrimitive("cylinder", (0.089, 0.245), 1.348, (-0.02, 0.0, 0.025))


@dataclass(frozen=True)
class VehicleGeometry:
    plate: BodyPrimitive = field(default_factory=_plate)
    be_static: tuple = field(default_factory=_be_static)
    housing: BodyPrimitive = field(default_factory=_housing)
    actuator: ActuatorGeometry = field(default_factory=ActuatorGeometry)
    passive_trim: PassiveTrim = field(default_factory=PassiveTrim)

    def __post_init__(self):
        object.__setattr__(self, "be_static", tuple(self.be_static))
        if len(self.be_static) != 2:
            raise DomainError("expected two static buoyancy-engine cylinders")
        if static_terms(self)[0] + 4 * self.actuator.moving_mass <= 0:
            raise DomainError("total vehicle mass must be positive")

    @property
    def primitives(self):
        return (self.plate, *self.be_static, self.housing)

    def mid_stroke(self):
        return ActuatorState(*([self.actuator.stroke_max / 2] * 4))


class ActuatorState(NamedTuple):
    """Piston extensions in metres."""

    fl: float = 0.0
    bl: float = 0.0
    br: float = 0.0
    fr: float = 0.0


class MassProperties(NamedTuple):
    mass: float
    com: np.ndarray
    inertia: np.ndarray  # about the centre of mass


class BuoyancyState(NamedTuple):
    displaced_volume: float
    cob: np.ndarray
    f_buoy: float


def check_extensions(geom, ext):
    """Return extensions as an array, raising if any is outside the stroke."""
    e = np.asarray(ext, dtype=float)
    if e.shape != (4,):
        raise DomainError(f"expected 4 extensions, got shape {e.shape}")
    stroke = geom.actuator.stroke_max
    for name, value in zip(ACTUATOR_NAMES, e):
        if not (-_EXT_TOL <= value <= stroke + _EXT_TOL):
            raise DomainError(f"actuator {name} extension {value!r} outside [0, {stroke}] m")
    return e


@lru_cache(maxsize=64)
def static_terms(geom):
    """Mass/volume sums of everything that does not move with the pistons.

    Returns ``(mass, mass_moment, inertia_about_origin, volume, volume_moment)``.
    """
    mass = 0.0
    mass_moment = np.zeros(3)
    inertia = np.zeros((3, 3))
    volume = 0.0
    volume_moment = np.zeros(3)
    for p in geom.primitives:
        c = np.array(p.com_offset)
        mass += p.mass
        mass_moment += p.mass * c
        inertia += np.diag(p.local_inertia()) + p.mass * _parallel_axis(c)
        volume += p.volume
        volume_moment += p.volume * c
    t = geom.passive_trim
    loc = np.array(t.location)
    mass += t.added_mass
    mass_moment += t.added_mass * loc
    inertia += t.added_mass * _parallel_axis(loc)
    volume += t.added_volume
    volume_moment += t.added_volume * loc
    for arr in (mass_moment, inertia, volume_moment):
        arr.setflags(write=False)
    return mass, mass_moment, inertia, volume, volume_moment


def _parallel_axis(c):
    return np.dot(c, c) * np.eye(3) - np.outer(c, c)


def dynamic_centroids(geom, e):
    """Centroids (4x3) of the dynamic cylinders for extensions ``e``."""
    a = geom.actuator
    out = np.empty((4, 3))
    out[:, 0] = ACTUATOR_X_SIGN * (a.mount_x + 0.5 * e)
    out[:, 1] = ACTUATOR_Y_SIGN * a.mount_y
    out[:, 2] = a.mount_z
    return out


def composite(geom, ext):
    """Everything the rigid-body integrator needs, about the body origin.

    Returns ``(mass, com, inertia_origin, volume, cob)``.
    """
    e = check_extensions(geom, ext)
    m_s, mm_s, i_s, v_s, vm_s = static_terms(geom)
    a = geom.actuator
    c = dynamic_centroids(geom, e)

    vols = a.piston_area * e
    volume = v_s + vols.sum()
    cob = (vm_s + vols @ c) / volume

    mp = a.moving_mass
    mass = m_s + 4 * mp
    if not mass > 0:
        raise DomainError("total vehicle mass must be positive")
    com = (mm_s + mp * c.sum(axis=0)) / mass
    inertia = i_s.copy()
    if mp > 0:
        r = a.piston_diameter / 2
        for k in range(4):
            inertia += np.diag(_cylinder_inertia(mp, r, e[k])) + mp * _parallel_axis(c[k])
    return mass, com, inertia, volume, cob


def displaced_volume(geom, ext):
    e = check_extensions(geom, ext)
    return static_terms(geom)[3] + geom.actuator.piston_area * e.sum()


def mass_properties(geom, ext):
    mass, com, inertia_o, _, _ = composite(geom, ext)
    return MassProperties(mass, com, inertia_o - mass * _parallel_axis(com))


def center_of_buoyancy(geom, ext, env=EnvironmentParams()):
    if not env.rho > 0:
        raise DomainError("rho must be positive")
    _, _, _, volume, cob = composite(geom, ext)
    return BuoyancyState(volume, cob, env.rho * env.g * volume)


def hydrostatic_wrench(geom, ext, attitude, env=EnvironmentParams()):
    """Gravity plus buoyancy as a body-frame wrench about the body origin.

    ``attitude`` is a unit quaternion (body to inertial). With the z axis
    pointing down, the heave component at level attitude equals
    ``g*m - F_buoy``.
    """
    q = np.asarray(attitude, dtype=float)
    if abs(np.linalg.norm(q) - 1.0) > 1e-6:
        raise DomainError(f"attitude quaternion is not unit norm: |q| = {np.linalg.norm(q)}")
    mass, com, _, volume, cob = composite(geom, ext)
    return _hydrostatic(quat_to_matrix(q), mass, com, volume, cob, env)


def _hydrostatic(R, mass, com, volume, cob, env):
    down = R[2]  # inertial +z expressed in body axes
    weight = env.g * mass * down
    buoy = -env.rho * env.g * volume * down
    out = np.empty(6)
    out[:3] = weight + buoy
    out[3:] = np.cross(com, weight) + np.cross(cob, buoy)
    return out


def neutral_trim(geom, env=EnvironmentParams(), ext=None, righting_arm=0.008):
    """Passive trim that makes the vehicle neutral at ``ext`` (mid-stroke by default).

    The added volume is placed so that the centre of buoyancy sits directly
    above the centre of mass by ``righting_arm`` metres.
    """
    if geom.passive_trim.added_mass > 0:
        raise DomainError("neutral_trim expects a trim without added mass")
    if ext is None:
        ext = geom.mid_stroke()
    mass, com, _, volume, cob = composite(replace(geom, passive_trim=PassiveTrim()), ext)
    v_add = mass / env.rho - volume
    if v_add <= 0:
        raise DomainError(f"vehicle is already {-v_add * env.rho:.4f} kg buoyant; "
                          "neutral trim would need negative volume")
    target = com - np.array([0.0, 0.0, righting_arm])
    loc = (target * (volume + v_add) - cob * volume) / v_add
    return replace(geom, passive_trim=PassiveTrim(0.0, float(v_add), tuple(loc)))
