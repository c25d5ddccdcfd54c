"""Run configuration: strict YAML loading, overrides and object construction.

The packaged ``data/defaults.yaml`` defines every accepted key. User files and
``--set`` overrides are merged into it; a key the defaults do not define is an
error naming the dotted path. Only two environment variables are honoured,
``VBCSIM_OUTPUT_DIR`` and ``VBCSIM_SEED``.
"""
import copy
import math
import os
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from pathlib import Path

import yaml

from .control import ControllerConfig, PidGains
from .environment import RATED_DEPTH_LIMIT, EnvironmentParams
from .errors import ConfigError, DomainError
from .missions import (SimSettings, depth_hold_mission, measure_settling, sawtooth_mission,
                       yaw_prp_mission)
from .sim import ActuatorDynamics, DragModel, SensorNoise
from .vehicle import (ActuatorGeometry, BodyPrimitive, PassiveTrim, VehicleGeometry,
                      neutral_trim)

MISSIONS = ("depth_hold", "sawtooth_pitch", "sawtooth_roll", "yaw_prp")
ENV_OUTPUT_DIR = "VBCSIM_OUTPUT_DIR"
ENV_SEED = "VBCSIM_SEED"


def load_defaults():
    text = resources.files("vbcsim").joinpath("data/defaults.yaml").read_text()
    return yaml.safe_load(text)


def _merge(base, update, path=""):
    for key, value in update.items():
        dotted = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key '{dotted}'")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key '{dotted}' must be a mapping")
            _merge(base[key], value, dotted + ".")
        else:
            if isinstance(value, dict):
                raise ConfigError(f"config key '{dotted}' is not a section")
            base[key] = value
    return base


def parse_override(text):
    """``a.b.c=value`` -> nested dict; the value is parsed as YAML."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override '{text}' is not of the form key=value")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ConfigError(f"override '{text}': {exc}") from exc
    out = value
    for part in reversed(key.strip().split(".")):
        out = {part: out}
    return out


def load_config(path=None, overrides=(), environ=None):
    """Defaults, then the file at ``path``, then env vars, then overrides."""
    raw = load_defaults()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        try:
            user = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        _merge(raw, user)
    environ = os.environ if environ is None else environ
    if environ.get(ENV_OUTPUT_DIR):
        raw["output"]["dir"] = environ[ENV_OUTPUT_DIR]
    if environ.get(ENV_SEED):
        raw["sim"]["seed"] = environ[ENV_SEED]
    for ov in overrides:
        _merge(raw, parse_override(ov))
    return RunConfig.from_dict(raw)


def _num(section, key, path, integer=False, optional=False):
    v = section[key]
    if v is None and optional:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ConfigError(f"config key '{path}.{key}' must be a number")
    try:
        out = int(v) if integer else float(v)
    except ValueError:
        raise ConfigError(f"config key '{path}.{key}' must be a number, got {v!r}") from None
    if integer and float(v) != out:
        raise ConfigError(f"config key '{path}.{key}' must be an integer")
    if not math.isfinite(out):
        raise ConfigError(f"config key '{path}.{key}' must be finite")
    return out


def _vec(section, key, path, n):
    v = section[key]
    if not isinstance(v, (list, tuple)) or len(v) != n:
        raise ConfigError(f"config key '{path}.{key}' must be a list of {n} numbers")
    return tuple(_num({"x": x}, "x", f"{path}.{key}") for x in v)


@dataclass(frozen=True)
class RunConfig:
    raw: dict
    geometry: VehicleGeometry
    environment: EnvironmentParams
    controller: ControllerConfig
    sim: SimSettings
    seed: int
    output_dir: Path

    @classmethod
    def from_dict(cls, raw):
        raw = copy.deepcopy(raw)
        try:
            env = _environment(raw["environment"])
            geom = _geometry(raw["vehicle"], env)
            ctrl = _controller(raw["controller"])
            sim = _sim(raw["sim"])
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
        seed = _num(raw["sim"], "seed", "sim", integer=True)
        cfg = cls(raw, geom, env, ctrl, sim, seed, Path(str(raw["output"]["dir"])))
        for name in MISSIONS:
            cfg.schedule(name, sized=False)  # depth limits and shape are checked up front
        return cfg

    def _depth_hold_depths(self):
        depths = self.raw["mission"]["depth_hold"]["depths"]
        if not isinstance(depths, (list, tuple)) or not depths:
            raise ConfigError("config key 'mission.depth_hold.depths' must be a list")
        return [_num({"d": d}, "d", "mission.depth_hold.depths") for d in depths]

    @cached_property
    def settling(self):
        """Settling of this configuration, measured once with the probe runs.

        The depth probe steps between the shallowest and deepest depth-hold
        setpoints; the attitude probe uses the largest attitude step any
        mission commands, so a zero-amplitude run keeps the nominal timing.
        """
        m = self.raw["mission"]
        depths = self._depth_hold_depths()
        probe = (min(depths), max(depths)) if max(depths) > min(depths) else (0.17, 0.58)
        angles = [_num(m["yaw_prp"], "step_angle_deg", "mission.yaw_prp"),
                  _num(m["sawtooth"], "amplitude_deg", "mission.sawtooth")]
        roll = _num(m["yaw_prp"], "roll_angle_deg", "mission.yaw_prp", optional=True)
        if roll is not None:
            angles.append(roll)
        angle = math.radians(max(abs(a) for a in angles))
        if angle == 0.0:
            angle = math.radians(30.0)
        return measure_settling(self.geometry, self.environment, self.controller, self.sim,
                                self.seed, depths=probe, angle=angle)

    def schedule(self, name, sized=True):
        """The configured setpoint schedule for mission ``name``.

        A null segment length is taken from the settling probe when ``sized``
        and from the nominal settling constants otherwise.
        """
        if name not in MISSIONS:
            raise ConfigError(f"unknown mission '{name}'; expected one of {', '.join(MISSIONS)}")
        m = self.raw["mission"]

        def length(sec, key, path, which):
            v = _num(sec, key, path, optional=True)
            if v is None and sized:
                v = self.settling.durations()[which]
            return v

        try:
            if name == "depth_hold":
                sec = m["depth_hold"]
                depths = self._depth_hold_depths()
                _check_depths(depths, self.environment, "mission.depth_hold.depths")
                sched = depth_hold_mission(
                    depths, length(sec, "segment_duration", "mission.depth_hold", 0))
            elif name.startswith("sawtooth"):
                sec = m["sawtooth"]
                band = _vec(sec, "depth_band", "mission.sawtooth", 2)
                _check_depths(band, self.environment, "mission.sawtooth.depth_band")
                sched = sawtooth_mission(
                    name.split("_")[1],
                    n_cycles=_num(sec, "n_cycles", "mission.sawtooth", integer=True),
                    angle_amplitude=math.radians(_num(sec, "amplitude_deg", "mission.sawtooth")),
                    depth_band=band,
                    leg_duration=length(sec, "leg_duration", "mission.sawtooth", 1))
            else:
                sec = m["yaw_prp"]
                depth = _num(sec, "depth", "mission.yaw_prp")
                _check_depths([depth], self.environment, "mission.yaw_prp.depth")
                roll = _num(sec, "roll_angle_deg", "mission.yaw_prp", optional=True)
                sched = yaw_prp_mission(
                    target_yaw=math.radians(_num(sec, "target_yaw_deg", "mission.yaw_prp")),
                    step_angle=math.radians(_num(sec, "step_angle_deg", "mission.yaw_prp")),
                    roll_angle=None if roll is None else math.radians(roll),
                    depth=depth,
                    segment_duration=length(sec, "segment_duration", "mission.yaw_prp", 2),
                    n_blocks=_num(sec, "n_blocks", "mission.yaw_prp", integer=True,
                                  optional=True))
            return sched.validate(self.environment)
        except DomainError as exc:
            raise ConfigError(f"mission {name}: {exc}") from exc

    def output_paths(self, mission):
        out = self.raw["output"]
        return (self.output_dir / str(out["csv"]).format(mission=mission),
                self.output_dir / str(out["report"]).format(mission=mission))


def _check_depths(depths, env, key):
    for d in depths:
        if d > RATED_DEPTH_LIMIT:
            raise ConfigError(f"config key '{key}': depth {d} m exceeds the "
                              f"{RATED_DEPTH_LIMIT} m rated depth")
        if d > env.depth_max:
            raise ConfigError(f"config key '{key}': depth {d} m exceeds "
                              f"environment.depth_max {env.depth_max} m")
        if d < 0:
            raise ConfigError(f"config key '{key}': negative depth {d} m")


def _environment(sec):
    p = "environment"
    return EnvironmentParams(rho=_num(sec, "rho", p), g=_num(sec, "g", p),
                             p_atm=_num(sec, "p_atm", p), current=_vec(sec, "current", p, 3),
                             depth_max=_num(sec, "depth_max", p))


def _geometry(sec, env):
    p = "vehicle"
    pl, bs, hs, ac, tr = (sec[k] for k in ("plate", "be_static", "housing", "actuator", "trim"))
    plate = BodyPrimitive("box", _vec(pl, "dimensions", p + ".plate", 3),
                          _num(pl, "mass", p + ".plate"), _vec(pl, "offset", p + ".plate", 3))
    bsd = (_num(bs, "diameter", p + ".be_static"), _num(bs, "length", p + ".be_static"))
    bsm = _num(bs, "mass", p + ".be_static")
    y, z = _num(bs, "offset_y", p + ".be_static"), _num(bs, "offset_z", p + ".be_static")
    be = (BodyPrimitive("cylinder", bsd, bsm, (0.0, -y, z)),
          BodyPrimitive("cylinder", bsd, bsm, (0.0, y, z)))
    housing = BodyPrimitive("cylinder", (_num(hs, "diameter", p + ".housing"),
                                         _num(hs, "length", p + ".housing")),
                            _num(hs, "mass", p + ".housing"), _vec(hs, "offset", p + ".housing", 3))
    act = ActuatorGeometry(**{k: _num(ac, k, p + ".actuator") for k in ac})
    geom = VehicleGeometry(plate, be, housing, act)
    mode = tr["mode"]
    if mode == "neutral":
        geom = neutral_trim(geom, env, righting_arm=_num(tr, "righting_arm", p + ".trim"))
        ballast = _num(tr, "ballast_mass", p + ".trim")
        if ballast:
            t = geom.passive_trim
            geom = VehicleGeometry(plate, be, housing, act,
                                   PassiveTrim(ballast, t.added_volume, t.location))
        return geom
    if mode == "explicit":
        return VehicleGeometry(plate, be, housing, act, PassiveTrim(
            _num(tr, "added_mass", p + ".trim"), _num(tr, "added_volume", p + ".trim"),
            _vec(tr, "location", p + ".trim", 3)))
    raise ConfigError(f"config key 'vehicle.trim.mode' must be 'neutral' or 'explicit', "
                      f"got {mode!r}")


def _pid(sec, path):
    return PidGains(**{k: _num(sec, k, path) for k in sec})


def _controller(sec):
    variant = sec["b_matrix"]
    if variant not in ("geometric", "printed"):
        raise ConfigError(f"config key 'controller.b_matrix' must be 'geometric' or 'printed', "
                          f"got {variant!r}")
    rate = _num(sec, "rate_hz", "controller")
    if not rate > 0:
        raise ConfigError("config key 'controller.rate_hz' must be positive")
    return ControllerConfig(pressure=_pid(sec["pressure"], "controller.pressure"),
                            roll=_pid(sec["roll"], "controller.roll"),
                            pitch=_pid(sec["pitch"], "controller.pitch"),
                            b_matrix=variant, rate_hz=rate)


def _sim(sec):
    d, a, n = sec["drag"], sec["actuator"], sec["noise"]
    drag = DragModel(_vec(d, "translational", "sim.drag", 3), _vec(d, "rotational", "sim.drag", 3),
                     _vec(d, "added_mass", "sim.drag", 6))
    act = ActuatorDynamics(_num(a, "max_speed", "sim.actuator"), _num(a, "deadband", "sim.actuator"))
    ps, asd = _num(n, "pressure_sigma", "sim.noise"), _num(n, "angle_sigma_deg", "sim.noise")
    if ps < 0 or asd < 0:
        raise ConfigError("sensor noise sigmas must be non-negative")
    dt = _num(sec, "dt", "sim")
    if not 0 < dt <= 0.1:
        raise ConfigError(f"config key 'sim.dt' must be in (0, 0.1] s, got {dt}")
    return SimSettings(dt=dt, drag=drag, actuator=act, noise=SensorNoise(ps, math.radians(asd)))
