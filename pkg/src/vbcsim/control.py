"""Open-loop allocation, per-channel PID and the actuator mixer.

Allocation wrenches live in the hover frame: forces and torques along the
body axes at level attitude, except that heave is counted positive *up*
(net buoyancy minus weight). Torques keep the body forward-right-down sense,
so a positive pitch torque raises the bow and a positive roll torque lowers
the right side.
"""
from dataclasses import dataclass, field
import math
from typing import NamedTuple

import numpy as np

from .environment import EnvironmentParams
from .errors import DomainError
from .vehicle import ACTUATOR_X_SIGN, ACTUATOR_Y_SIGN, center_of_buoyancy, mass_properties

B_VARIANTS = ("geometric", "printed")

# Direction of each mixer channel relative to a positive tracking error in
# the FRD frame: more buoyancy lowers pressure, and the mixer's roll column
# lifts the right side (negative roll).
CHANNEL_SIGNS = {"pressure": -1.0, "roll": -1.0, "pitch": 1.0}

MIXER = np.array([
    [1.0, -1.0, 1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [1.0, 1.0, 1.0],
])


class WrenchTarget(NamedTuple):
    f_x: float = 0.0
    f_y: float = 0.0
    f_z: float = 0.0
    tau_x: float = 0.0
    tau_y: float = 0.0
    tau_z: float = 0.0


class ControlCommand(NamedTuple):
    """Piston extensions (or offsets) in the fixed FL, BL, BR, FR order."""

    x_fl: float = 0.0
    x_bl: float = 0.0
    x_br: float = 0.0
    x_fr: float = 0.0


class Allocation(NamedTuple):
    offsets: np.ndarray        # unclamped B+ (tau_des - g0)
    residual: np.ndarray       # B u - (tau_des - g0)
    saturated: np.ndarray      # offsets clamped to +-stroke/2
    is_saturated: bool


class TrimState(NamedTuple):
    g0_z: float
    u_trim: ControlCommand
    residual: np.ndarray
    is_saturated: bool


def to_hover_frame(wrench):
    """Convert a body FRD wrench to the hover-frame convention (heave up)."""
    w = np.array(wrench, dtype=float)
    w[2] = -w[2]
    return w


def piston_gain(geom, env=EnvironmentParams()):
    """Buoyancy change per metre of piston extension (N/m)."""
    return env.rho * env.g * geom.actuator.piston_area


def build_B(geom, env=EnvironmentParams(), variant="geometric"):
    """Linearised 6x4 map from piston offsets to hover-frame wrench."""
    if variant not in B_VARIANTS:
        raise DomainError(f"unknown B variant {variant!r}; expected one of {B_VARIANTS}")
    a = geom.actuator
    alpha = piston_gain(geom, env)
    B = np.zeros((6, 4))
    B[2] = 1.0
    B[3] = -ACTUATOR_Y_SIGN * a.mount_y
    if variant == "geometric":
        B[4] = ACTUATOR_X_SIGN * a.mount_x
    else:  # "printed": pitch row with the roll sign pattern, kept for comparison
        B[4] = np.array([1.0, 1.0, -1.0, -1.0]) * a.mount_x
    return alpha * B


def pseudo_inverse(B, rtol=1e-10):
    """Moore-Penrose inverse via SVD, dropping singular values below rtol*s_max."""
    U, s, Vt = np.linalg.svd(B, full_matrices=False)
    keep = s > rtol * s[0] if s.size else s.astype(bool)
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (Vt.T * s_inv) @ U.T


def allocate_open_loop(B, tau_des, g0, stroke_max=0.1):
    B = np.asarray(B, dtype=float)
    tau = np.asarray(tau_des, dtype=float)
    g0 = np.asarray(g0, dtype=float)
    if tau.shape != (6,) or g0.shape != (6,):
        raise DomainError("tau_des and g0 must be 6-vectors")
    if not (np.all(np.isfinite(tau)) and np.all(np.isfinite(g0)) and np.all(np.isfinite(B))):
        raise DomainError("non-finite input to allocation")
    b = tau - g0
    u = pseudo_inverse(B) @ b
    residual = B @ u - b
    half = stroke_max / 2
    sat = np.clip(u, -half, half)
    return Allocation(u, residual, sat, bool(np.any(sat != u)))


def hover_g0(geom, env=EnvironmentParams(), reference=None):
    """Restoring term of the allocation: only net buoyancy at level attitude."""
    if reference is None:
        reference = geom.mid_stroke()
    f_buoy = center_of_buoyancy(geom, reference, env).f_buoy
    m = mass_properties(geom, reference).mass
    g0 = np.zeros(6)
    g0[2] = f_buoy - env.g * m
    return g0


def compute_trim(geom, env=EnvironmentParams(), variant="geometric", reference=None):
    """Static ballast offsets: the allocation with zero desired wrench."""
    g0 = hover_g0(geom, env, reference)
    alloc = allocate_open_loop(build_B(geom, env, variant), np.zeros(6), g0,
                               geom.actuator.stroke_max)
    return TrimState(float(g0[2]), ControlCommand(*alloc.saturated), alloc.residual,
                     alloc.is_saturated)


@dataclass(frozen=True)
class PidGains:
    kp: float = 0.0
    ki: float = 0.0
    kd: float = 0.0
    integrator_limit: float = math.inf
    output_limit: float = math.inf
    derivative_tau: float = 0.0  # first-order filter on the derivative, 0 disables


# Shipped gains from scripts/tune_gains.py. Pressure gains act on Pa and give
# metres of common piston offset; attitude gains act on rad.
DEFAULT_PRESSURE_GAINS = PidGains(kp=4e-6, ki=1e-8, kd=0.0, integrator_limit=0.002,
                                  output_limit=0.005, derivative_tau=0.5)
DEFAULT_ATTITUDE_GAINS = PidGains(kp=0.004, ki=0.004, kd=0.002, integrator_limit=0.04,
                                  output_limit=0.04, derivative_tau=0.1)


@dataclass
class PidState:
    integrator: float = 0.0
    prev_error: float | None = None
    derivative: float = 0.0
    # last split, kept for logging
    p_term: float = 0.0
    i_term: float = 0.0
    d_term: float = 0.0


def pid_step(gains, state, setpoint, measurement, dt):
    """Positional PID with a clamped integrator, derivative on error."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    error = setpoint - measurement
    lim = gains.integrator_limit
    state.integrator = min(lim, max(-lim, state.integrator + gains.ki * error * dt))
    raw = 0.0 if state.prev_error is None else (error - state.prev_error) / dt
    if gains.derivative_tau > 0:
        state.derivative += dt / (gains.derivative_tau + dt) * (raw - state.derivative)
    else:
        state.derivative = raw
    state.prev_error = error
    state.p_term = gains.kp * error
    state.i_term = state.integrator
    state.d_term = gains.kd * state.derivative
    out = state.p_term + state.i_term + state.d_term
    return min(gains.output_limit, max(-gains.output_limit, out))


def mix(pid_pressure, pid_roll, pid_pitch):
    p, r, q = float(pid_pressure), float(pid_roll), float(pid_pitch)
    if not (math.isfinite(p) and math.isfinite(r) and math.isfinite(q)):
        raise DomainError("non-finite mixer input")
    return np.array([p - r + q, p - r - q, p + r - q, p + r + q])


def total_command(u_ol, u_mixer, reference, stroke_max=0.1):
    """Sum reference, open-loop and mixer terms and clamp to the stroke.

    Returns ``(ControlCommand, flags)`` with one saturation flag per channel.
    """
    raw = np.asarray(reference, float) + np.asarray(u_ol, float) + np.asarray(u_mixer, float)
    cmd = np.clip(raw, 0.0, stroke_max)
    return ControlCommand(*cmd), tuple(bool(f) for f in cmd != raw)


@dataclass(frozen=True)
class ControllerConfig:
    pressure: PidGains = field(default_factory=lambda: DEFAULT_PRESSURE_GAINS)
    roll: PidGains = field(default_factory=lambda: DEFAULT_ATTITUDE_GAINS)
    pitch: PidGains = field(default_factory=lambda: DEFAULT_ATTITUDE_GAINS)
    b_matrix: str = "geometric"
    rate_hz: float = 20.0


class VbcController:
    """PID-plus-mixer feedback around the static trim allocation.

    One instance per vehicle; holds mutable PID state.
    """

    CHANNELS = ("pressure", "roll", "pitch")

    def __init__(self, geom, env=EnvironmentParams(), config=None):
        self.geom = geom
        self.env = env
        self.config = config or ControllerConfig()
        self.reference = np.array(geom.mid_stroke(), dtype=float)
        self.B = build_B(geom, env, self.config.b_matrix)
        self.trim = compute_trim(geom, env, self.config.b_matrix)
        self.u_ol = np.array(self.trim.u_trim)
        self.states = {c: PidState() for c in self.CHANNELS}
        self.dt = 1.0 / self.config.rate_hz

    def update(self, setpoint, reading):
        """One control tick.

        ``setpoint`` is ``(pressure_pa, roll, pitch)``; ``reading`` is a
        ``SensorReading``. Returns ``(command, flags, outputs, u_mixer)``.
        """
        measured = {"pressure": reading.pressure, "roll": reading.roll, "pitch": reading.pitch}
        outputs = {}
        for name, sp in zip(self.CHANNELS, setpoint):
            gains = getattr(self.config, name)
            raw = pid_step(gains, self.states[name], sp, measured[name], self.dt)
            outputs[name] = CHANNEL_SIGNS[name] * raw
        u_mix = mix(outputs["pressure"], outputs["roll"], outputs["pitch"])
        cmd, flags = total_command(self.u_ol, u_mix, self.reference,
                                   self.geom.actuator.stroke_max)
        return cmd, flags, outputs, u_mix
