import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vbcsim.control import (MIXER, ControllerConfig, PidGains, PidState, VbcController,
                            WrenchTarget, allocate_open_loop, build_B, compute_trim, mix,
                            pid_step, pseudo_inverse, total_command)
from vbcsim.environment import EnvironmentParams
from vbcsim.errors import DomainError
from vbcsim.sim import SensorReading, depth_to_pressure
from vbcsim.vehicle import ActuatorGeometry, PassiveTrim, VehicleGeometry, neutral_trim

GEOM = VehicleGeometry()
ENV = EnvironmentParams()
ALPHA = 1000 * 9.81 * math.pi * (0.05715 / 2) ** 2
B = build_B(GEOM)

finite = st.floats(-1e3, 1e3, allow_nan=False)


def grid_offsets(half=0.05, n=21):
    axis = np.linspace(-half, half, n)
    return np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"), -1).reshape(-1, 4)


GRID = grid_offsets()


# --- B matrix ---------------------------------------------------------------

def test_alpha_from_piston_diameter():
    assert B[2, 0] == pytest.approx(ALPHA, rel=1e-12)
    assert ALPHA == pytest.approx(25.2, abs=0.05)


def test_b_rows_and_sign_patterns():
    np.testing.assert_array_equal(B[[0, 1, 5]], 0.0)
    np.testing.assert_allclose(B[2], ALPHA)
    np.testing.assert_allclose(B[3], ALPHA * 0.124 * np.array([1, 1, -1, -1]))
    np.testing.assert_allclose(B[4], ALPHA * 0.127 * np.array([1, -1, -1, 1]))


def test_printed_variant_repeats_the_roll_sign_pattern():
    Bp = build_B(GEOM, variant="printed")
    np.testing.assert_allclose(Bp[4], ALPHA * 0.127 * np.array([1, 1, -1, -1]))
    np.testing.assert_allclose(np.delete(Bp, 4, 0), np.delete(B, 4, 0))


def test_no_lateral_arm_means_no_roll_row():
    g = VehicleGeometry(actuator=ActuatorGeometry(mount_y=0.0))
    np.testing.assert_array_equal(build_B(g)[3], 0.0)


def test_unknown_variant_rejected():
    with pytest.raises(DomainError):
        build_B(GEOM, variant="transposed")


def test_pitch_mixer_column_gives_pure_pitch_torque():
    w = B @ MIXER[:, 2]
    assert w[4] == pytest.approx(4 * ALPHA * 0.127)
    np.testing.assert_allclose(np.delete(w, 4), 0.0, atol=1e-12)


def test_roll_mixer_column_gives_pure_roll_torque():
    w = B @ MIXER[:, 1]
    assert abs(w[3]) == pytest.approx(4 * ALPHA * 0.124)
    np.testing.assert_allclose(np.delete(w, 3), 0.0, atol=1e-12)


# --- open-loop allocation ---------------------------------------------------

def test_tau_equal_g0_gives_zero_offsets():
    g0 = np.array([0, 0, -3.0, 0.1, -0.2, 0])
    alloc = allocate_open_loop(B, g0, g0)
    np.testing.assert_array_equal(alloc.offsets, 0.0)


def test_pure_heave_gives_equal_offsets():
    g0 = np.array([0, 0, -1.0, 0, 0, 0])
    delta = 0.015  # on the grid, so the two-stage grid search can hit it exactly
    tau = g0 + np.array([0, 0, 4 * ALPHA * delta, 0, 0, 0])
    alloc = allocate_open_loop(B, tau, g0)
    np.testing.assert_allclose(alloc.offsets, delta, rtol=1e-12)
    # grid oracle: minimise the residual, then the norm among the ties
    res = np.linalg.norm(GRID @ B.T - (tau - g0), axis=1)
    ties = GRID[res <= res.min() + 1e-9]
    best = ties[np.argmin(np.linalg.norm(ties, axis=1))]
    np.testing.assert_allclose(best, delta, atol=1e-12)


def test_surge_request_is_unreachable():
    alloc = allocate_open_loop(B, WrenchTarget(f_x=2.5), np.zeros(6))
    assert alloc.residual[0] == pytest.approx(-2.5)
    np.testing.assert_allclose(alloc.offsets, 0.0, atol=1e-12)


@pytest.mark.parametrize("bad", [[math.nan, 0, 0, 0, 0, 0], [0, 0, math.inf, 0, 0, 0]])
def test_non_finite_wrench_rejected(bad):
    with pytest.raises(DomainError):
        allocate_open_loop(B, bad, np.zeros(6))


def test_saturated_copy_is_clamped_to_half_stroke():
    alloc = allocate_open_loop(B, WrenchTarget(f_z=4 * ALPHA * 0.08), np.zeros(6), 0.1)
    np.testing.assert_allclose(alloc.offsets, 0.08)
    np.testing.assert_allclose(alloc.saturated, 0.05)
    assert alloc.is_saturated


def test_pseudo_inverse_matches_numpy():
    np.testing.assert_allclose(pseudo_inverse(B), np.linalg.pinv(B), atol=1e-12)


@given(st.floats(1e-3, 1e3), st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_allocation_is_linear_in_the_request(c, b):
    b = np.array(b)
    u1 = allocate_open_loop(B, b, np.zeros(6)).offsets
    u2 = allocate_open_loop(B, c * b, np.zeros(6)).offsets
    np.testing.assert_allclose(u2, c * u1, rtol=1e-9, atol=1e-15)


NULL = np.array([1.0, -1.0, 1.0, -1.0]) / 2  # unit null vector of B


def test_null_vector():
    np.testing.assert_allclose(B @ NULL, 0.0, atol=1e-12)


def _check_against_grid(b, alloc):
    # residual lies outside the span of B, up to rounding
    P = B @ pseudo_inverse(B)
    assert np.linalg.norm(P @ alloc.residual) < 1e-9
    # no grid point fits better
    res = np.linalg.norm(GRID @ B.T - b, axis=1)
    assert res.min() >= np.linalg.norm(alloc.residual) - 1e-9
    # every minimiser is offsets + t * NULL; the shortest has t = 0
    assert abs(alloc.offsets @ NULL) < 1e-12


def test_allocation_oracle_on_random_feasible_targets():
    rng = np.random.default_rng(7)
    for _ in range(100):
        g0 = np.zeros(6)
        g0[2] = rng.uniform(-1, 1)
        u_true = rng.uniform(-0.04, 0.04, 4)
        tau = g0 + B @ u_true
        alloc = allocate_open_loop(B, tau, g0)
        assert np.linalg.norm(alloc.residual) < 1e-9
        _check_against_grid(tau - g0, alloc)


def test_allocation_oracle_on_random_infeasible_targets():
    rng = np.random.default_rng(11)
    for _ in range(20):
        b = B @ rng.uniform(-0.03, 0.03, 4) + rng.normal(0, 0.5, 6)
        alloc = allocate_open_loop(B, b, np.zeros(6))
        _check_against_grid(b, alloc)


# --- trim -------------------------------------------------------------------

def test_neutral_vehicle_needs_no_trim():
    trim = compute_trim(neutral_trim(GEOM), ENV)
    assert abs(trim.g0_z) < 1e-9
    np.testing.assert_allclose(trim.u_trim, 0.0, atol=1e-12)
    assert not trim.is_saturated


def _heavy(newtons):
    g = neutral_trim(GEOM)
    t = g.passive_trim
    return VehicleGeometry(g.plate, g.be_static, g.housing, g.actuator,
                           PassiveTrim(newtons / ENV.g, t.added_volume, t.location))


def test_slightly_heavy_vehicle_trims_all_pistons_equally():
    trim = compute_trim(_heavy(0.1), ENV)
    assert trim.g0_z == pytest.approx(-0.1, rel=1e-9)
    np.testing.assert_allclose(trim.u_trim, 0.1 / (4 * ALPHA), rtol=1e-9)
    assert 0.1 / (4 * ALPHA) == pytest.approx(0.99e-3, abs=0.01e-3)
    # applying the trim cancels the vertical imbalance
    assert trim.g0_z + B[2] @ np.array(trim.u_trim) == pytest.approx(0.0, abs=1e-12)


def test_too_heavy_vehicle_saturates():
    limit = 4 * ALPHA * 0.05
    trim = compute_trim(_heavy(1.05 * limit), ENV)
    assert trim.is_saturated
    np.testing.assert_allclose(trim.u_trim, 0.05)


# --- PID ---------------------------------------------------------------------

def test_proportional_only():
    out = pid_step(PidGains(kp=1.0, integrator_limit=10, output_limit=10), PidState(), 0.2, 0.0,
                   0.05)
    assert out == pytest.approx(0.2)


def test_integrator_clamps():
    gains = PidGains(ki=1.0, integrator_limit=2.0, output_limit=10.0)
    state = PidState()
    for _ in range(3):
        pid_step(gains, state, 1.0, 0.0, 1.0)
    assert state.integrator == 2.0


def test_derivative_of_error_step():
    gains = PidGains(kd=1.0, integrator_limit=10, output_limit=10, derivative_tau=0.0)
    state = PidState()
    pid_step(gains, state, 0.0, 0.0, 0.5)
    assert pid_step(gains, state, 1.0, 0.0, 0.5) == pytest.approx(2.0)
    assert state.d_term == pytest.approx(2.0)


def test_pid_rejects_non_positive_dt():
    with pytest.raises(DomainError):
        pid_step(PidGains(kp=1.0), PidState(), 1.0, 0.0, 0.0)


@given(st.lists(st.tuples(finite, finite), min_size=1, max_size=50))
def test_pid_respects_limits(seq):
    gains = PidGains(kp=2.0, ki=5.0, kd=0.3, integrator_limit=0.7, output_limit=1.5)
    state = PidState()
    for sp, meas in seq:
        out = pid_step(gains, state, sp, meas, 0.05)
        assert abs(out) <= 1.5
        assert abs(state.integrator) <= 0.7


def test_shipped_gains_match_packaged_defaults():
    from vbcsim.config import load_defaults
    raw = load_defaults()["controller"]
    cfg = ControllerConfig()
    for ch in ("pressure", "roll", "pitch"):
        assert PidGains(**raw[ch]) == getattr(cfg, ch)
    assert raw["rate_hz"] == cfg.rate_hz and raw["b_matrix"] == cfg.b_matrix


# --- mixer and total command ---------------------------------------------------

def test_mixer_columns_exact():
    p, r, q = 0.0123, -0.0456, 0.0789
    assert mix(p, 0, 0).tolist() == [p, p, p, p]
    assert mix(0, r, 0).tolist() == [-r, -r, r, r]
    assert mix(0, 0, q).tolist() == [q, -q, -q, q]


def test_mixer_matrix_as_printed():
    np.testing.assert_array_equal(MIXER, [[1, -1, 1], [1, -1, -1], [1, 1, -1], [1, 1, 1]])


def test_mixer_linear_and_orthogonal_on_random_inputs():
    rng = np.random.default_rng(3)
    for a, b in zip(rng.normal(size=(1000, 3)), rng.normal(size=(1000, 3))):
        np.testing.assert_allclose(mix(*(a + b)), mix(*a) + mix(*b), rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(mix(*a), MIXER @ a, rtol=1e-12, atol=1e-15)
    G = MIXER.T @ MIXER
    np.testing.assert_array_equal(G, 4 * np.eye(3))


@given(st.floats(-1, 1).filter(lambda v: v != 0))
def test_pure_channels_have_expected_symmetry(v):
    assert len(set(mix(v, 0, 0))) == 1
    fl, bl, br, fr = mix(0, v, 0)
    assert fl == bl == -br == -fr  # left/right antisymmetric
    fl, bl, br, fr = mix(0, 0, v)
    assert fl == fr == -bl == -br  # front/back antisymmetric


def test_mixer_rejects_non_finite():
    with pytest.raises(DomainError):
        mix(math.nan, 0, 0)


def test_zero_inputs_command_mid_stroke():
    ref = GEOM.mid_stroke()
    cmd, flags = total_command(np.zeros(4), np.zeros(4), ref)
    assert cmd == tuple(ref)
    assert not any(flags)


def test_overflow_clamps_and_flags():
    cmd, flags = total_command([0.03, 0, 0, 0], [0.04, 0, 0, 0], GEOM.mid_stroke(), 0.1)
    assert cmd[0] == 0.1
    assert flags == (True, False, False, False)


def test_pressure_only_mix_adds_no_torque():
    ref = np.array(GEOM.mid_stroke())
    cmd, _ = total_command(np.zeros(4), mix(0.004, 0, 0), ref)
    w = B @ (np.array(cmd) - ref)
    assert abs(w[3]) < 1e-12 and abs(w[4]) < 1e-12
    assert w[2] == pytest.approx(4 * ALPHA * 0.004)


# --- controller sign conventions --------------------------------------------

def _controller_wrench(setpoint, reading):
    g = neutral_trim(GEOM)
    p = PidGains(kp=1e-5, integrator_limit=1.0, output_limit=1.0)
    a = PidGains(kp=0.01, integrator_limit=1.0, output_limit=1.0)
    ctrl = VbcController(g, ENV, ControllerConfig(pressure=p, roll=a, pitch=a))
    cmd, _, _, _ = ctrl.update(setpoint, reading)
    return build_B(g) @ (np.array(cmd) - ctrl.reference - ctrl.u_ol)


def test_deeper_setpoint_reduces_buoyancy():
    p0 = depth_to_pressure(0.3)
    w = _controller_wrench((depth_to_pressure(0.5), 0, 0), SensorReading(p0, 0, 0, 0, 0))
    assert w[2] < 0  # hover-frame heave is positive up


def test_roll_error_drives_positive_roll_torque():
    p0 = depth_to_pressure(0.3)
    w = _controller_wrench((p0, 0.1, 0), SensorReading(p0, 0, 0, 0, 0))
    assert w[3] > 0 and abs(w[4]) < 1e-12


def test_pitch_error_drives_bow_up_torque():
    p0 = depth_to_pressure(0.3)
    w = _controller_wrench((p0, 0, 0.1), SensorReading(p0, 0, 0, 0, 0))
    assert w[4] > 0 and abs(w[3]) < 1e-12
