import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from tiltlink._rot import rot_z
from tiltlink.control import (ANGLE_ROWS, RATE_ROWS, AttitudeGains, ControlState, Controller,
                              ControllerConfig, PositionGains, Reference, aggregate,
                              attitude_step, c_upper_bound, desired_tilt, gain_check,
                              gyro_torque, input_weight, lqi_synthesize, position_step)
from tiltlink.errors import DegenerateForce
from tiltlink.model import RobotSpec, allocation, inertia

from conftest import NOMINAL

BETA10 = math.radians(10)


@pytest.fixture(scope="module")
def plant():
    spec = RobotSpec(tilt_angle=BETA10)
    alloc = allocation(spec, NOMINAL)
    inert = inertia(spec, NOMINAL, alloc)
    return spec, alloc, inert, lqi_synthesize(alloc, inert)


# ----------------------------------------------------------------- synthesis


def test_default_gains_synthesize(plant):
    _, _, _, lqi = plant
    assert lqi.residual < 1e-8
    assert lqi.spectral_abscissa < 0
    assert lqi.K_x.shape == (4, 9) and lqi.K_x_I.shape == (4, 3)


def test_default_weights():
    g = AttitudeGains()
    assert np.array_equal(np.diag(g.M), [1100, 80, 1100, 80, 100, 50, 10, 10, 0.5])
    assert np.array_equal(np.diag(g.W1), np.ones(4))
    assert np.array_equal(np.diag(g.W2), [100, 100, 100])


def test_zero_force_weight_reduces_input_weight(plant):
    _, alloc, _, _ = plant
    g = AttitudeGains(W2=np.zeros((3, 3)))
    assert np.array_equal(input_weight(alloc, g), g.W1)


@given(st.floats(0.2, math.pi / 2), st.floats(0.2, math.pi / 2))
def test_synthesis_hurwitz_over_forms(q1, q2):
    spec = RobotSpec()
    alloc = allocation(spec, (q1, q2))
    lqi = lqi_synthesize(alloc, inertia(spec, (q1, q2), alloc))
    assert lqi.spectral_abscissa < 0
    assert lqi.residual < 1e-8 * max(1.0, np.linalg.norm(lqi.P))


# ------------------------------------------------------------------- attitude


def test_attitude_zero_error_zero_rate(plant):
    _, alloc, inert, lqi = plant
    u = attitude_step(ControlState(), np.zeros(9), np.zeros(3), inert, alloc, lqi.K_x)
    assert np.array_equal(u, np.zeros(4))


def test_attitude_gyro_feedforward(plant):
    _, alloc, inert, lqi = plant
    w = np.array([0.3, -0.2, 0.5])
    u = attitude_step(ControlState(), np.zeros(9), w, inert, alloc, lqi.K_x)
    assert np.allclose(alloc.Q_rot @ u, np.cross(w, inert.I @ w), atol=1e-9)


def test_attitude_integral_advances(plant):
    _, alloc, inert, lqi = plant
    st_ = ControlState()
    xbar = np.zeros(9)
    xbar[list(ANGLE_ROWS)] = [0.1, -0.2, 0.3]
    attitude_step(st_, xbar, np.zeros(3), inert, alloc, lqi.K_x, dt=0.01)
    assert np.allclose(st_.e_I_alpha, [0.001, -0.002, 0.003])
    attitude_step(st_, 1e6 * xbar, np.zeros(3), inert, alloc, lqi.K_x, dt=0.01, i_limit=2.0)
    assert np.all(np.abs(st_.e_I_alpha) <= 2.0)


def test_integral_rejects_constant_torque(plant):
    # linear closed loop with a constant disturbance torque entering the rate rows
    _, alloc, inert, lqi = plant
    Acl = lqi.Abar + lqi.Bbar @ lqi.K_x
    delta = np.array([0.2, -0.1, 0.05])
    d = np.zeros(9)
    d[list(RATE_ROWS)] = -np.linalg.solve(inert.I, delta)
    aug = np.zeros((10, 10))
    aug[:9, :9] = Acl
    aug[:9, 9] = d
    x = (expm(aug * 400.0) @ np.r_[np.zeros(9), 1.0])[:9]
    assert np.abs(x[:6]).max() < 1e-6
    assert np.linalg.norm(alloc.Q_rot @ lqi.K_x @ x + delta) < 1e-3


# ------------------------------------------------------------------- position


def _hover_cmd(spec, alloc, inert, **kw):
    args = dict(r=np.zeros(3), v=np.zeros(3), r_des=np.zeros(3), v_des=np.zeros(3),
                a_des=np.zeros(3), R=np.eye(3), omega=np.zeros(3), yaw_des=0.0)
    args.update(kw)
    return position_step(ControlState(), alloc=alloc, inert=inert, gains=PositionGains(),
                         spec=spec, **args)


def test_position_hover_fixed_point(plant):
    spec, alloc, inert, _ = plant
    cmd = _hover_cmd(spec, alloc, inert)
    assert np.allclose(cmd.f_des, [0, 0, spec.weight], atol=1e-12)
    assert np.allclose(cmd.alpha_des[:2], 0.0)
    assert cmd.f_T == pytest.approx(spec.weight)
    assert np.allclose(cmd.u_pos, alloc.u_s, atol=1e-12)


def test_position_step_pitches_toward_target(plant):
    spec, alloc, inert, _ = plant
    cmd = _hover_cmd(spec, alloc, inert, r_des=np.array([1.0, 0, 0]))
    assert cmd.f_des[0] > 0 and cmd.alpha_des[1] > 0


def test_position_vertical_force_any_yaw():
    roll, pitch = desired_tilt([0, 0, 33.354], math.pi / 2)
    assert roll == 0.0 and pitch == 0.0


@given(st.floats(-math.pi, math.pi), st.lists(st.floats(-5, 5), min_size=2, max_size=2),
       st.floats(5, 50))
def test_desired_tilt_yaw_equivariant(yaw, fxy, fz):
    f = np.array([fxy[0], fxy[1], fz])
    base = desired_tilt(f, 0.0)
    turned = desired_tilt(rot_z(yaw) @ f, yaw)
    assert np.allclose(base, turned, atol=1e-9)


def test_position_integral_uses_c(plant):
    spec, alloc, inert, _ = plant
    st_ = ControlState()
    position_step(st_, np.zeros(3), np.zeros(3), [1.0, 0, 0], [0.5, 0, 0], np.zeros(3),
                  np.eye(3), np.zeros(3), 0.0, alloc, inert, PositionGains(), spec, dt=0.1)
    assert np.allclose(st_.e_I_r, [0.1 * (0.5 + 0.3 * 1.0), 0, 0])


def test_position_degenerate_force(plant):
    spec, alloc, inert, _ = plant
    with pytest.raises(DegenerateForce):
        _hover_cmd(spec, alloc, inert, a_des=np.array([0, 0, -spec.gravity]))


def test_position_gravity_feedforward_toggle(plant):
    spec, alloc, inert, _ = plant
    cmd = position_step(ControlState(), np.zeros(3), np.zeros(3), [0, 0, 1.0], np.zeros(3),
                        np.zeros(3), np.eye(3), np.zeros(3), 0.0, alloc, inert, PositionGains(),
                        spec, gravity_feedforward=False)
    assert cmd.f_des[2] == pytest.approx(spec.mass * 3.6)


def test_position_gains_validation():
    with pytest.raises(ValueError):
        PositionGains(K_I=np.zeros((3, 3)))
    with pytest.raises(ValueError):
        PositionGains(c=0.0)


# ------------------------------------------------------------------ aggregate


def test_aggregate_passthrough():
    u, sat = aggregate(np.zeros(4), [1, 2, 3, 4], 16)
    assert np.array_equal(u, [1, 2, 3, 4]) and not sat.any()


def test_aggregate_clips_both_ends():
    u, sat = aggregate([10, -5, 0, 0], [10, 1, 1, 1], 16)
    assert np.array_equal(u, [16, 0, 1, 1])
    assert sat.tolist() == [True, True, False, False]


@given(st.lists(st.floats(-50, 50), min_size=8, max_size=8))
def test_aggregate_bounds(vals):
    u, sat = aggregate(vals[:4], vals[4:], 16.0)
    assert np.all((u >= 0) & (u <= 16))
    raw = np.add(vals[:4], vals[4:])
    assert np.array_equal(sat, (raw < 0) | (raw > 16))


# ---------------------------------------------------------------- gain checks


def test_gain_check_ratio_boundary(plant):
    spec, alloc, _, lqi = plant
    unit = PositionGains(K_P=np.eye(3), K_D=np.eye(3))
    assert gain_check(unit, lqi, alloc, 0.99, 1, 1, spec.mass).kp_margin > 0
    assert gain_check(unit, lqi, alloc, 1.0, 1, 1, spec.mass).kp_margin == 0
    assert not gain_check(unit, lqi, alloc, 1.0, 1, 1, spec.mass).satisfied


def test_gain_check_reports_all_margins(plant):
    spec, alloc, _, lqi = plant
    d = gain_check(PositionGains(), lqi, alloc, 0.1, 1.0, 1.0, spec.mass).as_dict()
    for key in ("kp_margin", "kp_ratio_margin", "c_bound", "c_margin", "w1_min_eig",
                "w2_min_eig", "w12_norm", "coupling_lhs", "coupling_rhs", "coupling_margin",
                "satisfied"):
        assert key in d
    assert all(np.isfinite(v) for k, v in d.items() if k != "satisfied")


def test_c_bound_default_gains():
    # kp: 2.3 - 0.1*3.6 = 1.94; kd: 1.55 - 0.1*4.0 = 1.15
    first = 4 * 1.94 * 1.15 / (16.0 * 1.21 + 4 * 1.94)
    expect = min(first, 1.15, math.sqrt(2.3))
    assert c_upper_bound(PositionGains(), 0.1) == pytest.approx(expect, rel=1e-12)


def test_gain_check_input_validation(plant):
    spec, alloc, _, lqi = plant
    with pytest.raises(ValueError):
        gain_check(PositionGains(), lqi, alloc, 0.0, 1, 1, spec.mass)


# ----------------------------------------------------------------- controller


def test_controller_hover_outputs_hover_thrust(plant):
    spec, alloc, _, _ = plant
    ctrl = Controller(spec)
    out = ctrl.step(np.zeros(3), np.zeros(3), np.eye(3), np.zeros(3), NOMINAL,
                    Reference(np.zeros(3), np.zeros(3), np.zeros(3)), 0.01)
    assert np.abs(out.u_des - alloc.u_s).max() < 1e-9
    assert not out.saturated.any()


def test_controller_resynthesis_threshold():
    ctrl = Controller(RobotSpec())
    ctrl.schedule(NOMINAL)
    K = ctrl.lqi
    ctrl.schedule((NOMINAL[0] - 0.01, NOMINAL[1]))
    assert ctrl.lqi is K
    ctrl.schedule((NOMINAL[0] - 0.05, NOMINAL[1]))
    assert ctrl.lqi is not K


def test_controller_config_from_file(tmp_path):
    p = tmp_path / "gains.cfg"
    p.write_text("K_P = 1 1 2\nc = 0.2\ngravity_feedforward = false\n")
    cfg = ControllerConfig.from_file(p)
    assert np.array_equal(np.diag(cfg.position.K_P), [1, 1, 2])
    assert cfg.position.c == 0.2 and not cfg.gravity_feedforward
    p.write_text("K_Q = 1\n")
    with pytest.raises(ValueError):
        ControllerConfig.from_file(p)


def test_gyro_torque():
    I = np.diag([1.0, 2.0, 3.0])

    class Inert:
        pass
    inert = Inert()
    inert.I = I
    w = np.array([1.0, 1.0, 0.0])
    assert np.allclose(gyro_torque(inert, w), np.cross(w, I @ w))
