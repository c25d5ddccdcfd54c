import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vbcsim.environment import EnvironmentParams
from vbcsim.errors import DomainError, SimulationFault
from vbcsim.rotation import quat_from_euler, quat_to_euler, quat_to_matrix
from vbcsim.sim import (ActuatorDynamics, DragModel, Plant, RigidBodyState, SensorNoise,
                        actuator_update, depth_to_pressure, drag_wrench, mechanical_energy,
                        plant_terms, pressure_to_depth, sensor_sample, simulate, step)
from vbcsim.vehicle import ActuatorState, VehicleGeometry, mass_properties, neutral_trim

ENV = EnvironmentParams()
GEOM = neutral_trim(VehicleGeometry())
MID = GEOM.mid_stroke()
NO_DRAG = DragModel((0, 0, 0), (0, 0, 0), (0, 0, 0, 0, 0, 0))

angle = st.floats(-1.2, 1.2)


def _state(depth=1.0, roll=0.0, pitch=0.0, yaw=0.0, v=(0, 0, 0), w=(0, 0, 0)):
    s = RigidBodyState.at_rest(depth, roll, pitch, yaw)
    return s._replace(velocity=np.array(v, float), angular_velocity=np.array(w, float))


# --- rigid body -------------------------------------------------------------

def test_neutral_vehicle_at_rest_stays_put():
    s0 = _state()
    s = s0
    terms = plant_terms(GEOM, MID)
    for k in range(1000):
        s = step(s, GEOM, MID, terms=terms, tick=k)
    np.testing.assert_allclose(s.position, s0.position, atol=1e-9)
    np.testing.assert_allclose(s.attitude, s0.attitude, atol=1e-9)
    np.testing.assert_allclose(s.velocity, 0.0, atol=1e-9)


def test_buoyant_vehicle_rises_with_constant_acceleration():
    ext = ActuatorState(0.06, 0.06, 0.06, 0.06)
    mp = mass_properties(GEOM, ext)
    volume = plant_terms(GEOM, ext).volume
    a_up = (ENV.rho * volume - mp.mass) * ENV.g / mp.mass
    s = simulate(_state(depth=5.0), GEOM, ext, drag=NO_DRAG, dt=1e-3, duration=2.0)
    rise = 5.0 - s.depth
    assert rise == pytest.approx(0.5 * a_up * 2.0 ** 2, rel=0.01)


def test_small_pitch_oscillation_has_pendulum_period():
    mp = mass_properties(GEOM, MID)
    f_b = ENV.rho * ENV.g * plant_terms(GEOM, MID).volume
    period = 2 * math.pi * math.sqrt(mp.inertia[1, 1] / (f_b * 0.008))
    plant = Plant(GEOM, ENV, NO_DRAG)
    s, ext = _state(pitch=math.radians(2)), tuple(MID)
    pitches = []
    dt = 1e-3
    for _ in range(int(3 * period / 0.01)):
        s, ext, _ = plant.advance(s, ext, MID, 10, dt)
        pitches.append(quat_to_euler(s.attitude)[1])
    p = np.array(pitches)
    up = np.flatnonzero((p[:-1] < 0) & (p[1:] >= 0))
    measured = np.mean(np.diff(up)) * 0.01
    assert measured == pytest.approx(period, rel=0.05)


def test_forward_buoyancy_pitches_bow_up():
    ext = ActuatorState(0.07, 0.03, 0.03, 0.07)
    s = simulate(_state(), GEOM, ext, dt=1e-3, duration=1.0)
    assert quat_to_euler(s.attitude)[1] > 0.01


def test_quaternion_norm_stays_unit_over_long_run():
    plant = Plant(GEOM, ENV, NO_DRAG)
    s = _state(roll=0.3, pitch=-0.2, w=(0.5, -0.3, 0.8))
    s, _, _ = plant.advance(s, tuple(MID), MID, 100_000, 1e-3)
    assert abs(np.linalg.norm(s.attitude) - 1.0) < 1e-6


def test_vertical_angular_momentum_conserved_without_drag():
    plant = Plant(GEOM, ENV, NO_DRAG)
    s, ext = _state(pitch=0.3, w=(0.2, 0.0, 0.4)), tuple(MID)

    def lz(state):
        terms = plant.terms(ext)
        nu = np.concatenate((state.velocity, state.angular_velocity))
        h = terms.M @ nu
        # angular momentum about the body origin, shifted to inertial axes
        R = quat_to_matrix(state.attitude)
        return (R @ h[3:])[2] + np.cross(state.position, R @ h[:3])[2]

    l0 = lz(s)
    s, _, _ = plant.advance(s, ext, MID, 10_000, 1e-3)
    assert lz(s) == pytest.approx(l0, abs=1e-4)


def test_energy_never_increases_with_drag():
    terms = plant_terms(GEOM, MID)
    s = _state(roll=0.2, pitch=-0.3, v=(0.1, -0.05, 0.02), w=(0.3, 0.2, -0.1))
    e_prev = mechanical_energy(s, terms)
    for k in range(3000):
        s = step(s, GEOM, MID, terms=terms, tick=k)
        e = mechanical_energy(s, terms)
        assert e <= e_prev + 1e-12
        e_prev = e


def test_surface_clamp_zeroes_vertical_motion():
    ext = ActuatorState(0.1, 0.1, 0.1, 0.1)
    s = simulate(_state(depth=0.05), GEOM, ext, dt=1e-3, duration=3.0)
    assert s.depth == 0.0
    assert abs((quat_to_matrix(s.attitude) @ s.velocity)[2]) < 1e-12


def test_floor_clamp():
    env = EnvironmentParams(depth_max=1.0)
    s = simulate(_state(depth=0.95), GEOM, ActuatorState(), env, dt=1e-3, duration=3.0)
    assert s.depth == 1.0


def test_nan_state_raises_fault_with_tick():
    bad = _state()._replace(velocity=np.array([math.nan, 0.0, 0.0]))
    with pytest.raises(SimulationFault) as info:
        step(bad, GEOM, MID, tick=42)
    assert info.value.tick == 42


def test_step_rejects_bad_dt():
    with pytest.raises(DomainError):
        step(_state(), GEOM, MID, dt=0.2)


def test_fixed_piston_runs_are_deterministic():
    s0 = _state(roll=0.1, w=(0.1, 0.2, 0.0))
    a = simulate(s0, GEOM, ActuatorState(0.02, 0.08, 0.05, 0.05), duration=2.0)
    b = simulate(s0, GEOM, ActuatorState(0.02, 0.08, 0.05, 0.05), duration=2.0)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)


def test_plant_advance_matches_python_step():
    s0 = _state(roll=0.1, pitch=0.05, v=(0.05, 0, 0.01), w=(0.1, 0.0, 0.05))
    ext = ActuatorState(0.03, 0.06, 0.05, 0.04)
    ref = simulate(s0, GEOM, ext, duration=0.5)
    got, _, _ = Plant(GEOM).advance(s0, tuple(ext), ext, 500, 1e-3)
    for x, y in zip(ref, got):
        np.testing.assert_allclose(x, y, atol=1e-12)


# --- drag ---------------------------------------------------------------------

def test_no_motion_no_drag():
    np.testing.assert_array_equal(drag_wrench(_state()), 0.0)


def test_heave_drag_is_quadratic_on_its_axis():
    d = DragModel((1.0, 2.0, 3.0), (0.1, 0.2, 0.3))
    w = drag_wrench(_state(v=(0, 0, 0.4)), d)
    np.testing.assert_allclose(w, [0, 0, -3.0 * 0.16, 0, 0, 0])


def test_sway_drag_exceeds_surge_drag_by_default():
    d = DragModel()
    fx = drag_wrench(_state(v=(0.2, 0, 0)), d)[0]
    fy = drag_wrench(_state(v=(0, 0.2, 0)), d)[1]
    assert abs(fy) > abs(fx)
    assert d.translational[1] == 3 * d.translational[0]


def test_current_acts_on_relative_velocity():
    env = EnvironmentParams(current=(0.1, 0.0, 0.0))
    w = drag_wrench(_state(v=(0.1, 0, 0)), DragModel(), env)
    np.testing.assert_allclose(w, 0.0, atol=1e-15)


def test_drag_rejects_negative_coefficients():
    with pytest.raises(DomainError):
        DragModel((-1.0, 0, 0))


def test_default_added_mass_is_a_fifth_of_body_mass():
    m = mass_properties(GEOM, MID).mass
    np.testing.assert_allclose(DragModel().added_mass[:3], 0.2 * m, rtol=0.01)
    assert DragModel().added_mass[3:] == (0.0, 0.0, 0.0)


# --- actuators ------------------------------------------------------------------

def test_actuator_rate_limit():
    out = actuator_update([0.1] * 4, [0.0] * 4, ActuatorDynamics(0.01, 0.0), dt=1.0)
    np.testing.assert_allclose(out, 0.01)


def test_actuator_at_command_is_unchanged():
    out = actuator_update([0.05] * 4, [0.05] * 4, ActuatorDynamics(0.01), dt=1.0)
    assert tuple(out) == (0.05,) * 4


def test_actuator_completes_move_exactly():
    ext = [0.0] * 4
    for _ in range(10):
        ext = actuator_update([0.1] * 4, ext, ActuatorDynamics(0.01, 0.0), dt=1.0)
    assert tuple(ext) == (0.1,) * 4


def test_actuator_deadband_snaps():
    out = actuator_update([0.05005] * 4, [0.05] * 4, ActuatorDynamics(1e-6, 1e-4), dt=1e-3)
    assert tuple(out) == (0.05005,) * 4


@given(st.lists(st.floats(-0.5, 0.5), min_size=4, max_size=4),
       st.lists(st.floats(0.0, 0.1), min_size=4, max_size=4))
def test_actuator_output_in_stroke_and_rate_bounded(cmd, ext):
    dyn = ActuatorDynamics(0.008, 0.0)
    out = np.array(actuator_update(cmd, ext, dyn, dt=0.05))
    assert np.all((out >= 0) & (out <= 0.1))
    assert np.all(np.abs(out - ext) <= 0.008 * 0.05 + 1e-15)


# --- sensors ------------------------------------------------------------------

@pytest.mark.parametrize("depth, expected", [(0.17, 102992.7), (0.58, 107014.8)])
def test_pressure_at_tank_depths(depth, expected):
    r = sensor_sample(_state(depth=depth), ENV)
    assert r.pressure == pytest.approx(expected, abs=0.05)
    assert r.pressure == pytest.approx(103000 if depth < 0.3 else 107000, abs=20)


def test_level_attitude_reads_zero_angles():
    r = sensor_sample(_state(), ENV)
    assert (r.roll, r.pitch, r.yaw) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("p, depth", [(103000, 0.1707), (101325, 0.0), (107000, 0.5785)])
def test_pressure_to_depth(p, depth):
    fix = pressure_to_depth(p, ENV)
    assert fix.depth == pytest.approx(depth, abs=1e-4)
    assert not fix.surfaced


def test_pressure_below_atmospheric_reports_surface():
    fix = pressure_to_depth(100000, ENV)
    assert fix.depth == 0.0 and fix.surfaced


@given(st.floats(0.0, 12.0))
def test_pressure_round_trip(depth):
    r = sensor_sample(_state(depth=depth), ENV)
    assert pressure_to_depth(r.pressure, ENV).depth == pytest.approx(depth, abs=1e-9)
    assert depth_to_pressure(depth, ENV) == r.pressure


def test_noise_is_seeded():
    s = _state(depth=0.4, roll=0.1)
    a = sensor_sample(s, ENV, SensorNoise(), rng=5)
    b = sensor_sample(s, ENV, SensorNoise(), rng=5)
    c = sensor_sample(s, ENV, SensorNoise(), rng=6)
    assert a == b and a != c


def test_noise_defaults():
    n = SensorNoise()
    assert n.pressure_sigma == 50.0
    assert n.angle_sigma == pytest.approx(math.radians(0.5))


@given(angle, angle, st.floats(-3.1, 3.1))
def test_euler_round_trip(roll, pitch, yaw):
    q = quat_from_euler(roll, pitch, yaw)
    back = quat_from_euler(*quat_to_euler(q))
    assert min(np.abs(q - back).max(), np.abs(q + back).max()) < 1e-9


def test_negative_pressure_rejected():
    with pytest.raises(DomainError):
        pressure_to_depth(-1.0, ENV)
