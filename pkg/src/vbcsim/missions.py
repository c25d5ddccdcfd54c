"""Pre-programmed setpoint schedules and the closed-loop mission runner."""
from dataclasses import asdict, dataclass, field
import math
from typing import NamedTuple

import numpy as np

from .control import ControllerConfig, VbcController
from .environment import EnvironmentParams, RATED_DEPTH_LIMIT
from .errors import DomainError, SimulationFault
from .rotation import matrix_yaw, quat_to_euler, rot_x, rot_y
from .sim import (ActuatorDynamics, DragModel, Plant, RigidBodyState, SensorNoise,
                  depth_to_pressure, sensor_sample)
from .telemetry import TickLog

MAX_SETPOINT_ANGLE = math.radians(80.0)

# Settling detection
ANGLE_BAND = math.radians(2.0)
DEPTH_BAND_FRACTION = 0.05
DEPTH_BAND_FLOOR = 0.02
SETTLE_HOLD = 5.0

# Nominal worst settling times of the shipped configuration, from
# measure_settling (see scripts/measure_settling.py). Builders size segments at
# SEGMENT_FACTOR times these when no duration is given; the config layer
# re-measures for the configuration actually in use.
DEPTH_SETTLING_TIME = 18.0
ATTITUDE_SETTLING_TIME = 32.0
SEGMENT_FACTOR = 3.0
PROBE_SEGMENT = 120.0


class Setpoint(NamedTuple):
    t_start: float
    depth: float
    roll: float
    pitch: float


@dataclass(frozen=True)
class SetpointSchedule:
    segments: tuple
    duration: float
    name: str = "custom"

    def __post_init__(self):
        segs = tuple(Setpoint(*map(float, s)) for s in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs:
            raise DomainError("schedule has no segments")
        if segs[0].t_start != 0.0:
            raise DomainError("first segment must start at t = 0")
        for a, b in zip(segs, segs[1:]):
            if not b.t_start > a.t_start:
                raise DomainError(f"segment start times not strictly increasing at t={b.t_start}")
        if not self.duration > segs[-1].t_start:
            raise DomainError("duration must extend past the last segment start")
        for s in segs:
            if abs(s.roll) > MAX_SETPOINT_ANGLE or abs(s.pitch) > MAX_SETPOINT_ANGLE:
                raise DomainError(f"angle setpoint beyond 80 deg at t={s.t_start}")
            if s.depth < 0:
                raise DomainError(f"negative depth setpoint at t={s.t_start}")
            if s.depth > RATED_DEPTH_LIMIT:
                raise DomainError(f"depth setpoint {s.depth} m exceeds the "
                                  f"{RATED_DEPTH_LIMIT} m rated depth")

    @classmethod
    def from_pressures(cls, rows, duration, env=EnvironmentParams(), name="custom"):
        """Build from ``(t_start, pressure_pa, roll, pitch)`` rows."""
        segs = [(t, (p - env.p_atm) / (env.rho * env.g), r, q) for t, p, r, q in rows]
        return cls(tuple(segs), duration, name)

    def validate(self, env):
        for s in self.segments:
            if s.depth > env.depth_max:
                raise DomainError(f"depth setpoint {s.depth} m exceeds depth_max {env.depth_max} m")
        return self

    def segment_end(self, i):
        return self.segments[i + 1].t_start if i + 1 < len(self.segments) else self.duration

    def then(self, other):
        """Concatenate ``other`` after this schedule."""
        shifted = [Setpoint(s.t_start + self.duration, *s[1:]) for s in other.segments]
        return SetpointSchedule(self.segments + tuple(shifted), self.duration + other.duration,
                                f"{self.name}+{other.name}")

    def reversed(self):
        """Same segment durations with the setpoints in reverse order."""
        ends = [self.segment_end(i) for i in range(len(self.segments))]
        lengths = [e - s.t_start for e, s in zip(ends, self.segments)][::-1]
        starts = np.concatenate(([0.0], np.cumsum(lengths)[:-1]))
        segs = [Setpoint(t, *s[1:]) for t, s in zip(starts, self.segments[::-1])]
        return SetpointSchedule(tuple(segs), self.duration, f"{self.name}-reversed")


def _uniform(rows, seg_len, name):
    segs = [(i * seg_len, *r) for i, r in enumerate(rows)]
    return SetpointSchedule(tuple(segs), len(segs) * seg_len, name)


def depth_hold_mission(depths=(0.17, 0.58, 0.17, 0.58), segment_duration=None):
    """Level hover stepping between the tank depths."""
    seg = SEGMENT_FACTOR * DEPTH_SETTLING_TIME if segment_duration is None else segment_duration
    return _uniform([(d, 0.0, 0.0) for d in depths], seg, "depth_hold")


def sawtooth_mission(axis="pitch", n_cycles=4, angle_amplitude=math.radians(30.0),
                     depth_band=(0.17, 0.58), leg_duration=None):
    """Glide transect: tilt by +amplitude and sink, then -amplitude and rise.

    Each leg is two segments: the new angle is set while holding the current
    depth, then the depth changes with that angle held. The vehicle starts
    at the top of the band. ``leg_duration`` is the length of each segment.
    """
    if axis not in ("pitch", "roll"):
        raise DomainError(f"sawtooth axis must be 'pitch' or 'roll', not {axis!r}")
    if abs(angle_amplitude) >= MAX_SETPOINT_ANGLE:
        raise DomainError("sawtooth amplitude must be below 80 deg")
    top, bottom = depth_band
    if not 0 < top < bottom < RATED_DEPTH_LIMIT:
        raise DomainError(f"invalid depth band {depth_band}")
    seg = SEGMENT_FACTOR * DEPTH_SETTLING_TIME if leg_duration is None else leg_duration
    rows = []
    for _ in range(n_cycles):
        for start, end, angle in ((top, bottom, angle_amplitude), (bottom, top, -angle_amplitude)):
            for depth in (start, end):
                rows.append((depth, angle, 0.0) if axis == "roll" else (depth, 0.0, angle))
    return _uniform(rows, seg, f"sawtooth_{axis}")


def prp_block_yaw(pitch_angle, roll_angle):
    """Yaw of one pitch-roll-pitch-roll block as a pure rotation composition."""
    R = rot_y(-pitch_angle) @ rot_x(-roll_angle) @ rot_y(pitch_angle) @ rot_x(roll_angle)
    return matrix_yaw(R)


def yaw_prp_mission(target_yaw=math.radians(45.0), step_angle=math.radians(30.0),
                    roll_angle=None, depth=0.4, segment_duration=None, n_blocks=None):
    """Blocks of (pitch +a), (roll +b), (pitch back), (roll back) at constant depth.

    The roll direction is picked so each block turns toward ``target_yaw``;
    blocks repeat until the composed yaw reaches the target. ``n_blocks``
    overrides the count (needed when the step angle is zero).
    """
    if not 0 <= step_angle < MAX_SETPOINT_ANGLE:
        raise DomainError("step_angle must be in [0, 80) deg")
    phi = step_angle if roll_angle is None else roll_angle
    theta = step_angle
    inc = prp_block_yaw(theta, phi)
    if inc != 0 and math.copysign(1, inc) != math.copysign(1, target_yaw):
        phi = -phi
        inc = -inc
    if n_blocks is None:
        n_blocks = 1 if inc == 0 else max(1, math.ceil(abs(target_yaw) / abs(inc) - 1e-9))
    seg = SEGMENT_FACTOR * ATTITUDE_SETTLING_TIME if segment_duration is None else segment_duration
    block = [(depth, 0.0, theta), (depth, phi, theta), (depth, phi, 0.0), (depth, 0.0, 0.0)]
    return _uniform(block * n_blocks, seg, "yaw_prp")


@dataclass(frozen=True)
class SimSettings:
    dt: float = 1e-3
    drag: DragModel = field(default_factory=DragModel)
    actuator: ActuatorDynamics = field(default_factory=ActuatorDynamics)
    noise: SensorNoise = field(default_factory=SensorNoise)


@dataclass
class SegmentMetrics:
    index: int
    t_start: float
    t_end: float
    depth_setpoint: float
    roll_setpoint_deg: float
    pitch_setpoint_deg: float
    depth_error: float         # mean over the final hold window, m
    roll_error_deg: float
    pitch_error_deg: float
    settling_time: float | None
    settled: bool


@dataclass
class MissionMetrics:
    segments: list
    net_displacement: tuple
    net_yaw_deg: float
    horizontal_drift: float    # largest horizontal distance from the start, m
    max_depth_error: float     # largest |depth - setpoint| over the run, m
    actuator_duty: float       # total piston travel, m

    @property
    def all_settled(self):
        return all(s.settled for s in self.segments)

    def to_dict(self):
        d = asdict(self)
        d["all_settled"] = self.all_settled
        return d


class MissionResult(NamedTuple):
    log: TickLog
    metrics: MissionMetrics
    final_state: RigidBodyState
    final_extensions: tuple


def run_mission(schedule, geom, env=EnvironmentParams(), control=None, sim=SimSettings(),
                seed=0, initial_state=None, initial_extensions=None):
    """Fly ``schedule`` closed loop and return the tick log and metrics.

    The vehicle starts at rest, level, at the first setpoint depth with the
    pistons at the trim command unless told otherwise. Sensor noise is
    drawn from ``numpy.random.default_rng(seed)``.
    """
    schedule.validate(env)
    control = control or ControllerConfig()
    ctrl = VbcController(geom, env, control)
    plant = Plant(geom, env, sim.drag, sim.actuator)
    rng = np.random.default_rng(seed)
    noisy = sim.noise.pressure_sigma > 0 or sim.noise.angle_sigma > 0

    tick_dt = 1.0 / control.rate_hz
    n_sub = int(round(tick_dt / sim.dt))
    if n_sub < 1 or abs(n_sub * sim.dt - tick_dt) > 1e-9:
        raise DomainError(f"control period {tick_dt} s is not a multiple of dt {sim.dt} s")
    n_ticks = int(round(schedule.duration * control.rate_hz))

    first = schedule.segments[0]
    state = initial_state or RigidBodyState.at_rest(first.depth)
    if initial_extensions is None:
        initial_extensions = np.clip(ctrl.reference + ctrl.u_ol, 0, geom.actuator.stroke_max)
    ext = tuple(float(e) for e in initial_extensions)
    starts = np.array([s.t_start for s in schedule.segments])

    log = TickLog()
    travel = 0.0
    for k in range(n_ticks):
        t = k * tick_dt
        seg_i = int(np.searchsorted(starts, t + 1e-9, side="right") - 1)
        sp = schedule.segments[seg_i]
        sp_pressure = depth_to_pressure(sp.depth, env)
        reading = sensor_sample(state, env, sim.noise, rng if noisy else None, t)
        cmd, flags, outputs, u_mix = ctrl.update((sp_pressure, sp.roll, sp.pitch), reading)

        roll, pitch, yaw = quat_to_euler(state.attitude)
        pid_cols = []
        for ch in ctrl.CHANNELS:
            st = ctrl.states[ch]
            pid_cols += [st.p_term, st.i_term, st.d_term, outputs[ch]]
        log.append([t, seg_i, *state.position, roll, pitch, yaw, *state.velocity,
                    *state.angular_velocity, *ext, *cmd, reading.pressure, reading.roll,
                    reading.pitch, reading.yaw, sp.depth, sp_pressure, sp.roll, sp.pitch,
                    *pid_cols, *ctrl.u_ol, *u_mix, *map(float, flags), travel])
        try:
            state, ext, moved = plant.advance(state, ext, cmd, n_sub, sim.dt, tick=k * n_sub)
        except SimulationFault as exc:
            exc.partial = log
            raise
        travel += moved

    metrics = compute_metrics(log, schedule, final_travel=travel)
    return MissionResult(log, metrics, state, ext)


class SettlingEstimate(NamedTuple):
    depth: float      # worst depth-step settling time, s
    attitude: float   # worst attitude-step settling time, s

    def durations(self, factor=SEGMENT_FACTOR):
        """Segment lengths: depth hold, sawtooth leg, attitude block segment."""
        return (factor * self.depth, factor * max(self.depth, self.attitude),
                factor * self.attitude)


def measure_settling(geom, env=EnvironmentParams(), control=None, sim=SimSettings(), seed=0,
                     depths=(0.17, 0.58), angle=math.radians(30.0), probe=PROBE_SEGMENT):
    """Worst settling times of long depth steps and attitude steps.

    The depth probe steps down and back up through ``depths``; the attitude
    probe is one pitch-roll-pitch-roll block of ``angle`` at mid depth. An
    unsettled probe segment counts as the whole probe length.
    """
    def worst(schedule, first):
        m = run_mission(schedule, geom, env, control, sim, seed).metrics
        return max(s.settling_time if s.settled else probe for s in m.segments[first:])

    top, bottom = depths
    d = worst(depth_hold_mission((top, bottom, top), probe), 1)
    a = worst(yaw_prp_mission(step_angle=angle, depth=0.5 * (top + bottom),
                              segment_duration=probe, n_blocks=1), 0)
    return SettlingEstimate(d, a)


def _unwrap_deg(a):
    return np.degrees(np.unwrap(a))


def settling_time(t, ok, t_end, hold=SETTLE_HOLD):
    """Earliest time after which ``ok`` holds to the end, if that lasts ``hold`` s."""
    if len(ok) == 0 or not ok[-1]:
        return None
    bad = np.flatnonzero(~ok)
    t_s = t[0] if bad.size == 0 else t[bad[-1] + 1]
    return t_s if t_end - t_s >= hold else None


def compute_metrics(log, schedule, final_travel=None):
    t = log["t"]
    z = log["z"]
    roll, pitch = log["roll"], log["pitch"]
    segments = []
    prev_depth = z[0] if len(z) else schedule.segments[0].depth
    for i, sp in enumerate(schedule.segments):
        t0, t1 = sp.t_start, schedule.segment_end(i)
        m = (t >= t0 - 1e-9) & (t < t1 - 1e-9)
        tail = m & (t >= t1 - SETTLE_HOLD - 1e-9)
        band = max(DEPTH_BAND_FRACTION * abs(sp.depth - prev_depth), DEPTH_BAND_FLOOR)
        ok = ((np.abs(z[m] - sp.depth) <= band)
              & (np.abs(roll[m] - sp.roll) <= ANGLE_BAND)
              & (np.abs(pitch[m] - sp.pitch) <= ANGLE_BAND))
        ts = settling_time(t[m], ok, t1)
        segments.append(SegmentMetrics(
            index=i, t_start=t0, t_end=t1, depth_setpoint=sp.depth,
            roll_setpoint_deg=math.degrees(sp.roll), pitch_setpoint_deg=math.degrees(sp.pitch),
            depth_error=float(np.mean(sp.depth - z[tail])) if tail.any() else math.nan,
            roll_error_deg=float(np.degrees(np.mean(sp.roll - roll[tail]))) if tail.any() else math.nan,
            pitch_error_deg=float(np.degrees(np.mean(sp.pitch - pitch[tail]))) if tail.any() else math.nan,
            settling_time=None if ts is None else float(ts - t0),
            settled=ts is not None,
        ))
        prev_depth = sp.depth

    pos = np.column_stack((log["x"], log["y"], z))
    yaw = _unwrap_deg(log["yaw"])
    horiz = np.hypot(pos[:, 0] - pos[0, 0], pos[:, 1] - pos[0, 1])
    travel = log["travel"]
    duty = float(final_travel if final_travel is not None else travel[-1]) - float(travel[0])
    return MissionMetrics(
        segments=segments,
        net_displacement=tuple(float(v) for v in pos[-1] - pos[0]),
        net_yaw_deg=float(yaw[-1] - yaw[0]),
        horizontal_drift=float(horiz.max()),
        max_depth_error=float(np.max(np.abs(z - log["sp_depth"]))),
        actuator_duty=duty,
    )


def schedule_from_log(log, name="from_log"):
    """Rebuild the setpoint schedule recorded in a tick log."""
    t, seg = log["t"], log["segment"].astype(int)
    if len(t) == 0:
        raise DomainError("log has no rows")
    starts = np.flatnonzero(np.r_[True, np.diff(seg) != 0])
    rows = [(t[i], log["sp_depth"][i], log["sp_roll"][i], log["sp_pitch"][i]) for i in starts]
    dt = t[1] - t[0] if len(t) > 1 else 0.0
    return SetpointSchedule(tuple(rows), round(float(t[-1] + dt), 9), name)
