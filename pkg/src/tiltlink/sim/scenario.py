"""Scenario definitions: joint paths, reference trajectories, disturbances, sensors.

Scenarios are built in by name or read from ``key = value`` files. Tables
(joint waypoints, impulses, wrench profiles, position waypoints) are written
as rows separated by ``;``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from tiltlink.config import as_float, as_floats, check_known, load_kv, parse_kv
from tiltlink.control import Reference
from tiltlink.errors import ScenarioConfigError
from tiltlink.sim.plant import Disturbance, Impulse, Payload, WrenchProfile
from tiltlink.sim.sensors import SensorSuite, suite_from_dict

NOMINAL_Q = (math.pi / 2, math.pi / 2)


@dataclass(frozen=True)
class JointPath:
    """Piecewise-linear ``q(t)`` through rows ``(t, q1, q2)``; held outside the table."""

    table: tuple = ((0.0,) + NOMINAL_Q,)

    def __post_init__(self):
        arr = np.asarray(self.table, float).reshape(-1, 3)
        if np.any(np.diff(arr[:, 0]) <= 0):
            raise ScenarioConfigError("joint waypoint times must be strictly increasing")
        if np.any(np.abs(arr[:, 1:]) > math.pi / 2 + 1e-9):
            raise ScenarioConfigError("joint angles must lie in [-pi/2, pi/2]")

    def __call__(self, t: float) -> NDArray[np.float64]:
        arr = np.asarray(self.table, float).reshape(-1, 3)
        return np.array([np.interp(t, arr[:, 0], arr[:, 1]), np.interp(t, arr[:, 0], arr[:, 2])])


@dataclass(frozen=True)
class HoldReference:
    position: tuple = (0.0, 0.0, 1.0)
    yaw: float = 0.0

    def __call__(self, t: float) -> Reference:
        return Reference(np.array(self.position, float), np.zeros(3), np.zeros(3), self.yaw)


@dataclass(frozen=True)
class CircleReference:
    """Counter-clockwise circle starting at ``center + (radius, 0)``.

    Speed ramps linearly in time from ``v0`` to ``v1`` over ``laps`` laps,
    then stays at ``v1`` for ``hold_laps`` more laps, then the reference
    stops at the point reached.
    """

    radius: float = 8.0
    height: float = 4.0
    v0: float = 0.5
    v1: float = 3.0
    laps: float = 3.0
    hold_laps: float = 1.0
    center: tuple = (0.0, 0.0)
    yaw: float = 0.0

    def __post_init__(self):
        if not (self.radius > 0 and self.v0 > 0 and self.v1 > 0 and self.laps > 0):
            raise ScenarioConfigError("circle radius, speeds and laps must be positive")

    @property
    def ramp_time(self) -> float:
        return 2.0 * self.laps * 2 * math.pi * self.radius / (self.v0 + self.v1)

    @property
    def end_time(self) -> float:
        return self.ramp_time + self.hold_laps * 2 * math.pi * self.radius / self.v1

    def speed(self, t: float) -> float:
        T = self.ramp_time
        if t <= 0:
            return 0.0
        if t < T:
            return self.v0 + (self.v1 - self.v0) * t / T
        return self.v1 if t < self.end_time else 0.0

    def _arc(self, t: float) -> tuple[float, float, float]:
        """Arc length, speed and tangential acceleration."""
        T = self.ramp_time
        k = (self.v1 - self.v0) / T
        t = min(max(t, 0.0), self.end_time)
        if t < T:
            return self.v0 * t + 0.5 * k * t * t, self.v0 + k * t, k
        s_T = self.v0 * T + 0.5 * k * T * T
        return s_T + self.v1 * (t - T), self.v1, 0.0

    def __call__(self, t: float) -> Reference:
        s, v, at = self._arc(t)
        if t <= 0 or t > self.end_time:
            v, at = 0.0, 0.0
        th = s / self.radius
        c, sn = math.cos(th), math.sin(th)
        r = np.array([self.center[0] + self.radius * c, self.center[1] + self.radius * sn,
                      self.height])
        tan = np.array([-sn, c, 0.0])
        nrm = np.array([-c, -sn, 0.0])
        return Reference(r, v * tan, at * tan + v * v / self.radius * nrm, self.yaw)


@dataclass(frozen=True)
class WaypointReference:
    """Piecewise-linear position and yaw through rows ``(t, x, y, z, yaw)``."""

    table: tuple

    def __call__(self, t: float) -> Reference:
        arr = np.asarray(self.table, float).reshape(-1, 5)
        ts = arr[:, 0]
        r = np.array([np.interp(t, ts, arr[:, j]) for j in (1, 2, 3)])
        i = int(np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2)) if len(ts) > 1 else 0
        v = np.zeros(3)
        if len(ts) > 1 and ts[0] <= t < ts[-1]:
            v = (arr[i + 1, 1:4] - arr[i, 1:4]) / (ts[i + 1] - ts[i])
        return Reference(r, v, np.zeros(3), float(np.interp(t, ts, arr[:, 4])))


@dataclass
class Scenario:
    name: str = "hover"
    duration: float = 15.0
    dt: float = 0.001
    control_dt: float = 0.01
    joints: JointPath = field(default_factory=JointPath)
    reference: object = field(default_factory=HoldReference)
    disturbance: Disturbance = field(default_factory=Disturbance)
    sensors: SensorSuite = field(default_factory=SensorSuite)
    feedback: str = "truth"             # "truth" or "estimator"
    estimator_attitude: str = "filter"  # "filter" or "truth" attitude fed to the EKF
    velocity_mode: bool = False
    steady_window: float = 2.0
    initial_position: tuple | None = None

    def __post_init__(self):
        if not self.duration > 0:
            raise ScenarioConfigError("duration must be positive")
        if not 0 < self.dt <= 0.01:
            raise ScenarioConfigError("dt must lie in (0, 0.01]")
        ratio = self.control_dt / self.dt
        if self.control_dt < self.dt or abs(ratio - round(ratio)) > 1e-9:
            raise ScenarioConfigError("control_dt must be a whole multiple of dt")
        if self.feedback not in ("truth", "estimator"):
            raise ScenarioConfigError(f"feedback must be truth or estimator, not {self.feedback!r}")
        if self.estimator_attitude not in ("filter", "truth"):
            raise ScenarioConfigError("estimator_attitude must be filter or truth")
        if not 0 < self.steady_window <= self.duration:
            raise ScenarioConfigError("steady_window must lie in (0, duration]")

    @property
    def control_every(self) -> int:
        return int(round(self.control_dt / self.dt))

    def start_position(self) -> NDArray[np.float64]:
        if self.initial_position is not None:
            return np.array(self.initial_position, float)
        return self.reference(0.0).r.copy()


# ------------------------------------------------------------------- builtins


def _hover() -> Scenario:
    return Scenario("hover", duration=15.0, steady_window=5.0)


def _deform() -> Scenario:
    q_a, q_b, q_c = NOMINAL_Q, (-math.pi / 4, math.pi / 2), (math.pi / 4, math.pi / 4)
    table = ((0.0,) + q_a, (3.0,) + q_a, (13.0,) + q_b, (17.0,) + q_b, (27.0,) + q_c,
             (30.0,) + q_c)
    return Scenario("deform", duration=30.0, joints=JointPath(table), steady_window=3.0)


def _grasp() -> Scenario:
    # object held between the end links, centered below the body
    pay = Payload(1.0, (0.0, 0.0, -0.1), attach=5.0, release=30.0)
    q = (math.pi / 4, math.pi / 4)
    return Scenario("grasp", duration=50.0, joints=JointPath(((0.0,) + q,)),
                    disturbance=Disturbance(payload=pay), steady_window=2.0)


def _kick() -> Scenario:
    imp = Impulse(5.0, 0.1, (20.0, 0.0, 0.0))
    return Scenario("kick", duration=15.0, disturbance=Disturbance(impulses=[imp]),
                    steady_window=3.0)


def _circle() -> Scenario:
    ref = CircleReference()
    return Scenario("circle", duration=round(ref.end_time, 2), reference=ref,
                    feedback="estimator", initial_position=None, steady_window=2.0)


def _sheet() -> Scenario:
    # airflow pressing on a held sheet: slow force and torque swell, then release
    prof = WrenchProfile(((0.0, 0, 0, 0, 0, 0, 0), (3.0, 0, 0, 0, 0, 0, 0),
                          (6.0, 3.0, 1.0, -2.0, 0.2, -0.1, 0.05),
                          (12.0, 3.0, 1.0, -2.0, 0.2, -0.1, 0.05),
                          (15.0, 0, 0, 0, 0, 0, 0)))
    return Scenario("sheet", duration=25.0, disturbance=Disturbance(profile=prof),
                    steady_window=3.0)


BUILTINS = {"hover": _hover, "deform": _deform, "grasp": _grasp, "kick": _kick,
            "circle": _circle, "sheet": _sheet}


# -------------------------------------------------------------------- parsing

_KEYS = {
    "name", "base", "duration", "dt", "control_dt", "joints", "reference", "ref.position",
    "ref.yaw", "waypoints", "circle.radius", "circle.height", "circle.v0", "circle.v1",
    "circle.laps", "circle.hold_laps", "circle.center", "feedback", "estimator.attitude",
    "velocity_mode", "steady_window", "initial.position", "dist.force", "dist.torque",
    "impulses", "profile", "payload.mass", "payload.offset", "payload.attach",
    "payload.release", "sensors.noiseless",
}


def _table(d, key, width) -> tuple | None:
    if key not in d:
        return None
    rows = []
    for chunk in d[key].split(";"):
        if not chunk.strip():
            continue
        try:
            row = tuple(float(t) for t in chunk.replace(",", " ").split())
        except ValueError as exc:
            raise ScenarioConfigError(f"{key}: bad number in {chunk!r}") from exc
        if len(row) != width:
            raise ScenarioConfigError(f"{key}: rows need {width} values, got {len(row)}")
        rows.append(row)
    if not rows:
        raise ScenarioConfigError(f"{key}: empty table")
    return tuple(rows)


def _flag(d, key, default: bool) -> bool:
    if key not in d:
        return default
    v = d[key].strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ScenarioConfigError(f"{key}: expected a boolean, got {d[key]!r}")


def scenario_from_dict(d: dict[str, str], source: str = "<scenario>") -> Scenario:
    """Build a scenario; ``base = <builtin>`` starts from a built-in and overrides it."""
    sensor_keys = {k for k in d if k.split(".", 1)[0] in ("imu", "gps_pos", "gps_vel",
                                                          "vio_vel", "lidar")}
    check_known({k: v for k, v in d.items() if k not in sensor_keys}, _KEYS, source)
    base = load_builtin(d.get("base", "hover"))
    try:
        joints = JointPath(_table(d, "joints", 3)) if "joints" in d else base.joints
        kind = d.get("reference")
        ref = base.reference
        if kind == "hold" or (kind is None and ("ref.position" in d or "ref.yaw" in d)):
            ref = HoldReference(tuple(as_floats(d, "ref.position", (0, 0, 1), 3)),
                                as_float(d, "ref.yaw", 0.0))
        elif kind == "circle" or (kind is None and any(k.startswith("circle.") for k in d)):
            c = CircleReference()
            ref = CircleReference(
                as_float(d, "circle.radius", c.radius), as_float(d, "circle.height", c.height),
                as_float(d, "circle.v0", c.v0), as_float(d, "circle.v1", c.v1),
                as_float(d, "circle.laps", c.laps), as_float(d, "circle.hold_laps", c.hold_laps),
                tuple(as_floats(d, "circle.center", c.center, 2)), as_float(d, "ref.yaw", 0.0))
        elif kind == "waypoints" or (kind is None and "waypoints" in d):
            tab = _table(d, "waypoints", 5)
            if tab is None:
                raise ScenarioConfigError(f"{source}: reference = waypoints needs a waypoints table")
            ref = WaypointReference(tab)
        elif kind is not None:
            raise ScenarioConfigError(f"{source}: unknown reference {kind!r}")

        dist = base.disturbance
        if any(k.startswith(("dist.", "payload.")) or k in ("impulses", "profile") for k in d):
            imps = _table(d, "impulses", 8)
            prof = _table(d, "profile", 7)
            payload = dist.payload
            if "payload.mass" in d:
                payload = Payload(as_float(d, "payload.mass", 0.0),
                                  tuple(as_floats(d, "payload.offset", (0, 0, 0), 3)),
                                  as_float(d, "payload.attach", 0.0),
                                  as_float(d, "payload.release", math.inf))
            dist = Disturbance(
                as_floats(d, "dist.force", dist.delta_tran, 3),
                as_floats(d, "dist.torque", dist.delta_rot, 3),
                [Impulse(r[0], r[1], r[2:5], r[5:8]) for r in imps] if imps else dist.impulses,
                payload,
                WrenchProfile(prof) if prof else dist.profile,
            )
        sensors = suite_from_dict(d) if (sensor_keys or "sensors.noiseless" in d) else base.sensors
        init = base.initial_position
        if "initial.position" in d:
            init = tuple(as_floats(d, "initial.position", (0, 0, 0), 3))
        return Scenario(
            name=d.get("name", base.name),
            duration=as_float(d, "duration", base.duration),
            dt=as_float(d, "dt", base.dt),
            control_dt=as_float(d, "control_dt", base.control_dt),
            joints=joints, reference=ref, disturbance=dist, sensors=sensors,
            feedback=d.get("feedback", base.feedback),
            estimator_attitude=d.get("estimator.attitude", base.estimator_attitude),
            velocity_mode=_flag(d, "velocity_mode", base.velocity_mode),
            steady_window=as_float(d, "steady_window", base.steady_window),
            initial_position=init,
        )
    except ValueError as exc:
        if isinstance(exc, ScenarioConfigError):
            raise
        raise ScenarioConfigError(f"{source}: {exc}") from exc


def load_builtin(name: str) -> Scenario:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise ScenarioConfigError(f"unknown built-in scenario {name!r}; "
                                  f"choose from {sorted(BUILTINS)}") from None


def load_scenario(name_or_path: str) -> Scenario:
    """A built-in name or the path of a scenario file."""
    if name_or_path in BUILTINS:
        return load_builtin(name_or_path)
    return scenario_from_dict(load_kv(name_or_path), str(name_or_path))


def parse_scenario(text: str) -> Scenario:
    return scenario_from_dict(parse_kv(text))
