import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiltlink._rot import quat_to_rot, rot_to_quat, so3_exp
from tiltlink.errors import NonFiniteState
from tiltlink.model import RobotSpec, allocation, inertia
from tiltlink.sim.plant import (Disturbance, Impulse, Payload, Plant, WrenchProfile,
                                mass_properties, plant_step)
from tiltlink.state import RigidBodyState

from conftest import NOMINAL


def _state(q=NOMINAL, **kw):
    s = RigidBodyState(q_joints=np.array(q, float))
    for k, v in kw.items():
        setattr(s, k, np.array(v, float))
    return s


def test_hover_equilibrium(spec):
    u_s = allocation(spec, NOMINAL).u_s
    p = Plant(spec, _state(r=[0, 0, 1]))
    acc, dw = p.nominal_accelerations(u_s)
    assert np.abs(acc).max() < 1e-9 and np.abs(dw).max() < 1e-9
    s = plant_step(_state(r=[0, 0, 1]), u_s, None, spec, 0.001)
    assert np.allclose(s.r, [0, 0, 1], atol=1e-12) and np.allclose(s.v, 0, atol=1e-12)


def test_free_fall(spec):
    p = Plant(spec, _state())
    for _ in range(1000):
        p.step(np.zeros(4), 0.001)
    st_ = p.nominal_state()
    assert st_.v[2] == pytest.approx(-spec.gravity * 1.0, abs=1e-9)
    assert st_.r[2] == pytest.approx(-0.5 * spec.gravity, abs=1e-9)


def test_angular_momentum_conserved(spec):
    I = inertia(spec, NOMINAL).I
    p = Plant(spec, _state(omega=[0.4, -0.3, 0.8]))
    L0 = p.true_state().R @ I @ p.true_state().omega
    for _ in range(10_000):
        p.step(np.zeros(4), 0.001)
    s = p.true_state()
    assert np.allclose(s.R @ I @ s.omega, L0, atol=1e-6)
    assert abs(np.linalg.norm(s.quat) - 1.0) < 1e-9


def test_step_rejects_bad_dt(spec):
    p = Plant(spec, _state())
    with pytest.raises(ValueError):
        p.step(np.zeros(4), 0.02)


def test_divergence_raises(spec):
    d = Disturbance(impulses=[Impulse(0.0, 1.0, (0.0, 0.0, 0.0), (1e300, 1e300, 0.0))])
    p = Plant(spec, _state(), d)
    with pytest.raises(NonFiniteState) as err:
        for _ in range(10):
            p.step(np.zeros(4), 0.001)
    assert err.value.t is not None


def test_constant_force_acceleration(spec):
    u_s = allocation(spec, NOMINAL).u_s
    d = Disturbance(delta_tran=np.array([spec.mass * 0.5, 0.0, 0.0]))
    p = Plant(spec, _state(), d)
    for _ in range(1000):
        p.step(u_s, 0.001)
    assert p.nominal_state().v[0] == pytest.approx(0.5, abs=1e-9)


def test_impulse_window():
    imp = Impulse(1.0, 0.1, (1, 0, 0))
    assert not imp.active(0.999) and imp.active(1.0) and imp.active(1.099)
    assert not imp.active(1.1 + 1e-9)
    with pytest.raises(ValueError):
        Impulse(0.0, 0.0)


def test_payload_validation_and_window():
    with pytest.raises(ValueError):
        Payload(-1.0)
    p = Payload(1.0, attach=5, release=30)
    assert not p.attached(4.9) and p.attached(5.0) and not p.attached(30.0)


def test_profile_interpolates():
    prof = WrenchProfile(((0, 0, 0, 0, 0, 0, 0), (2, 2, 0, -2, 0, 0, 1)))
    f, tau = prof(1.0)
    assert np.allclose(f, [1, 0, -1]) and np.allclose(tau, [0, 0, 0.5])
    f, _ = prof(5.0)
    assert np.allclose(f, [2, 0, -2])


def test_payload_mass_properties(spec):
    base = mass_properties(spec, NOMINAL)
    pay = mass_properties(spec, NOMINAL, Payload(1.0, (0, 0, -0.1)))
    assert pay.mass == pytest.approx(spec.mass + 1.0)
    assert np.allclose(pay.offset, [0, 0, -0.1 / 4.4])
    assert np.all(np.linalg.eigvalsh(pay.I - base.I) >= -1e-12)


def test_payload_center_of_mass_falls_with_hover_thrust(spec):
    u_s = allocation(spec, NOMINAL).u_s
    pay = Payload(1.0, (0, 0, -0.1))
    p = Plant(spec, _state(), Disturbance(payload=pay))
    acc, _ = p.nominal_accelerations(u_s)
    assert acc[2] == pytest.approx(spec.weight / (spec.mass + 1.0) - spec.gravity, abs=1e-9)


def test_joint_change_keeps_c_frame_attitude(spec):
    p = Plant(spec, _state())
    a0 = allocation(spec, NOMINAL)
    R_C0 = p.true_state().R @ a0.R_CoG_C
    q1 = (-math.pi / 4, math.pi / 2)
    p.set_joints(q1)
    a1 = allocation(spec, q1)
    assert np.allclose(p.true_state().R @ a1.R_CoG_C, R_C0, atol=1e-12)


def test_freeze_and_resume_reproduces_suffix(spec):
    u = allocation(spec, NOMINAL).u_s * np.array([1.01, 0.99, 1.0, 1.0])
    p = Plant(spec, _state(omega=[0.1, 0.0, 0.2]))
    for _ in range(300):
        p.step(u, 0.001)
    snap = p.nominal_state()
    for _ in range(300):
        p.step(u, 0.001)
    q = Plant(spec, snap)
    for _ in range(300):
        q.step(u, 0.001)
    assert np.array_equal(p.y, q.y)


@settings(max_examples=20)
@given(st.lists(st.floats(-1, 1), min_size=3, max_size=3),
       st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_quaternion_stays_normalized(phi, w):
    spec = RobotSpec()
    s = RigidBodyState(quat=rot_to_quat(so3_exp(phi)), omega=np.array(w),
                       q_joints=np.array(NOMINAL))
    p = Plant(spec, s)
    for _ in range(200):
        p.step(np.full(4, 8.0), 0.001)
    assert abs(np.linalg.norm(p.y[6:10]) - 1.0) < 1e-9
    assert np.allclose(quat_to_rot(p.y[6:10]).T @ quat_to_rot(p.y[6:10]), np.eye(3), atol=1e-9)
