import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tiltlink.errors import ScenarioConfigError
from tiltlink.sim.scenario import (BUILTINS, CircleReference, HoldReference, JointPath, Scenario,
                                   WaypointReference, load_builtin, load_scenario,
                                   parse_scenario)


def test_joint_path_interpolates_and_holds():
    jp = JointPath(((0, 0.0, 0.0), (10, 1.0, -1.0)))
    assert np.allclose(jp(5), [0.5, -0.5])
    assert np.allclose(jp(-1), [0, 0]) and np.allclose(jp(20), [1, -1])


def test_joint_path_validation():
    with pytest.raises(ScenarioConfigError):
        JointPath(((0, 0, 0), (0, 1, 1)))
    with pytest.raises(ScenarioConfigError):
        JointPath(((0, 2.0, 0),))


def test_hold_reference():
    ref = HoldReference((1, 2, 3), 0.5)(7.0)
    assert np.array_equal(ref.r, [1, 2, 3]) and ref.yaw == 0.5 and not ref.v.any()


def test_circle_geometry():
    c = CircleReference()
    assert c.ramp_time == pytest.approx(3 * 2 * math.pi * 8 / 1.75)
    assert c.speed(0.01) == pytest.approx(0.5, abs=1e-3)
    assert c.speed(c.ramp_time + 1) == 3.0
    assert c.speed(c.end_time + 1) == 0.0
    ref = c(c.ramp_time)
    assert np.linalg.norm(ref.r[:2]) == pytest.approx(8.0) and ref.r[2] == 4.0
    # after an integer number of laps the reference is back at the start
    assert np.allclose(ref.r[:2], [8.0, 0.0], atol=1e-9)
    assert np.linalg.norm(ref.v) == pytest.approx(3.0)


@given(st.floats(0.01, 90.0))
def test_circle_derivatives_consistent(t):
    c = CircleReference()
    h = 1e-5
    ref = c(t)
    fd = (c(t + h).r - c(t - h).r) / (2 * h)
    assert np.allclose(fd, ref.v, atol=1e-4)
    fa = (c(t + h).v - c(t - h).v) / (2 * h)
    assert np.allclose(fa, ref.a, atol=1e-3)


def test_circle_validation():
    with pytest.raises(ScenarioConfigError):
        CircleReference(radius=0)


def test_waypoints():
    w = WaypointReference(((0, 0, 0, 1, 0), (10, 10, 0, 1, 1)))
    ref = w(5)
    assert np.allclose(ref.r, [5, 0, 1]) and np.allclose(ref.v, [1, 0, 0]) and ref.yaw == 0.5
    assert not w(20).v.any()


def test_builtins_load():
    for name in BUILTINS:
        sc = load_builtin(name)
        assert sc.name == name and sc.duration > 0


def test_circle_builtin_matches_reference_length():
    sc = load_builtin("circle")
    assert sc.duration == pytest.approx(sc.reference.end_time, abs=0.01)
    assert sc.feedback == "estimator"


def test_deform_path_visits_forms():
    jp = load_builtin("deform").joints
    assert np.allclose(jp(0), [math.pi / 2] * 2)
    assert np.allclose(jp(15), [-math.pi / 4, math.pi / 2])
    assert np.allclose(jp(30), [math.pi / 4] * 2)


def test_grasp_payload():
    p = load_builtin("grasp").disturbance.payload
    assert p.mass == 1.0 and p.attach == 5.0


def test_unknown_builtin():
    with pytest.raises(ScenarioConfigError):
        load_builtin("loop")


def test_scenario_validation():
    with pytest.raises(ScenarioConfigError):
        Scenario(duration=0)
    with pytest.raises(ScenarioConfigError):
        Scenario(control_dt=0.0015)
    with pytest.raises(ScenarioConfigError):
        Scenario(feedback="oracle")
    with pytest.raises(ScenarioConfigError):
        Scenario(duration=1.0, steady_window=2.0)


def test_parse_overrides_builtin():
    sc = parse_scenario("""
        base = kick
        name = kick2
        duration = 8
        impulses = 2 0.2 0 10 0 0 0 0 ; 4 0.1 5 0 0 0 0 0
        gps_pos.sigma = 0.5
    """)
    assert sc.name == "kick2" and sc.duration == 8.0
    assert len(sc.disturbance.impulses) == 2 and sc.disturbance.impulses[1].force == (5, 0, 0)
    assert sc.sensors.gps_pos.sigma == 0.5


def test_parse_references():
    assert isinstance(parse_scenario("ref.position = 1 2 3").reference, HoldReference)
    assert parse_scenario("circle.radius = 4\nduration = 30").reference.radius == 4.0
    w = parse_scenario("waypoints = 0 0 0 1 0; 5 1 0 1 0")
    assert isinstance(w.reference, WaypointReference)


def test_parse_payload_and_flags():
    sc = parse_scenario("payload.mass = 0.5\npayload.offset = 0 0 -0.2\npayload.attach = 2\n"
                        "velocity_mode = on\nfeedback = estimator\nestimator.attitude = truth")
    assert sc.disturbance.payload.mass == 0.5 and sc.velocity_mode
    assert sc.feedback == "estimator" and sc.estimator_attitude == "truth"


@pytest.mark.parametrize("text", [
    "colour = red",
    "joints = 0 1",
    "joints = 0 a b",
    "reference = spiral",
    "velocity_mode = maybe",
    "duration = -1",
    "dt = 0.5",
    "reference = waypoints",
    "feedback = oracle",
    "payload.mass = -1",
])
def test_parse_errors(text):
    with pytest.raises(ScenarioConfigError):
        parse_scenario(text)


def test_load_scenario_file(tmp_path):
    p = tmp_path / "s.cfg"
    p.write_text("base = hover\nduration = 3\nsteady_window = 1\n")
    assert load_scenario(str(p)).duration == 3.0
    with pytest.raises(ScenarioConfigError):
        load_scenario(str(tmp_path / "missing.cfg"))
