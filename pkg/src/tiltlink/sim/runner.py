"""Closed-loop scenario execution: plant, sensors, estimator and controller."""

from __future__ import annotations

import bisect
import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from tiltlink._rot import cross3, euler_zyx, rot_to_quat, wrap_angle
from tiltlink.control import Controller, ControllerConfig
from tiltlink.errors import StaleMeasurement
from tiltlink.estimation.attitude import AttitudeEstimate, ComplementaryGains, complementary_update
from tiltlink.estimation.ekf import EkfNoise, TimeSyncEkf
from tiltlink.estimation.frames import MountRegistry, to_cog_frame, to_imu_frame
from tiltlink.estimation.geo import gps_to_enu
from tiltlink.estimation.replay import LogRecord
from tiltlink.model import RobotSpec, allocation
from tiltlink.sim.plant import Plant
from tiltlink.sim.scenario import Scenario
from tiltlink.sim.sensors import SensorEmulator, SensorSuite, StampedMeasurement
from tiltlink.state import RigidBodyState


@dataclass
class EstimatorConfig:
    noise: EkfNoise = field(default_factory=EkfNoise)
    capacity: int = 200
    gains: ComplementaryGains = field(default_factory=ComplementaryGains)
    sigma_p0: float = 0.1
    sigma_v0: float = 0.1
    sigma_b0: float = 0.1
    # subtract the filtered kinematic acceleration before using the accelerometer as gravity
    accel_compensation: bool = False
    accel_lowpass: float = 0.2


class _Geometry:
    """Per-form kinematics and mount transforms, cached on the joint angles."""

    def __init__(self, spec: RobotSpec, mounts: MountRegistry):
        self.spec = spec
        self.mounts = mounts
        self._key = None

    def at(self, q):
        key = tuple(np.asarray(q, float))
        if key != self._key:
            alloc = allocation(self.spec, q)
            self.kin = alloc.kinematics
            self.T_imu_cog = self.mounts.imu_to_cog(alloc)
            self._key = key
        return self


class EstimatorPipeline:
    """Complementary attitude filter feeding a time-synchronized translational EKF.

    Delayed measurements are converted to the IMU origin using the attitude
    and rates recorded at their acquisition stamp.
    """

    def __init__(self, spec: RobotSpec, suite: SensorSuite,
                 config: EstimatorConfig | None = None, keep_history: bool = False):
        self.spec = spec
        self.keep_history = keep_history
        self.suite = suite
        self.config = config or EstimatorConfig()
        self.geom = _Geometry(spec, suite.mounts)
        self.att = None
        self.ekf = None
        self._hist_t: list[float] = []
        self._hist: list[tuple] = []
        self.stale = 0
        self._a_world = np.zeros(3)
        self._v_prev = None

    def start(self, stamp: float, p_imu, v_imu, R_W_IMU) -> None:
        c = self.config
        self.att = AttitudeEstimate(np.array(R_W_IMU, float), np.zeros(3))
        self._t0 = stamp
        self._init = (np.concatenate([p_imu, v_imu, np.zeros(3)]),
                      np.diag([c.sigma_p0 ** 2] * 3 + [c.sigma_v0 ** 2] * 3 + [c.sigma_b0 ** 2] * 3))

    def imu(self, m: StampedMeasurement, truth_att: tuple | None = None) -> None:
        accel, gyro, mag = m.value[0:3], m.value[3:6], m.value[6:9]
        if self.ekf is None:
            att = self.att if truth_att is None else AttitudeEstimate(*truth_att)
            self.att = AttitudeEstimate(att.R_W_IMU, gyro.copy())
            x0, P0 = self._init
            self.ekf = TimeSyncEkf(x0, P0, m.stamp, accel, self.att.R_W_IMU,
                                   self.config.noise, self.config.capacity, self.keep_history)
        else:
            dt = m.stamp - self._hist_t[-1]
            if truth_att is None:
                ref_acc = accel
                if self.config.accel_compensation:
                    ref_acc = accel - self.att.R_W_IMU.T @ self._a_world
                self.att = complementary_update(self.att, gyro, ref_acc, mag, dt, self.config.gains)
            else:
                self.att = AttitudeEstimate(*truth_att)
            self.ekf.add_imu(m.stamp, accel, self.att.R_W_IMU)
            v = self.ekf.head_mean[3:6]
            if self._v_prev is not None:
                k = dt / (self.config.accel_lowpass + dt)
                self._a_world += k * ((v - self._v_prev) / dt - self._a_world)
            self._v_prev = v
        self._hist_t.append(m.stamp)
        self._hist.append((self.att.R_W_IMU, self.att.omega_IMU))
        if len(self._hist_t) > 2 * self.config.capacity:
            drop = len(self._hist_t) - self.config.capacity
            del self._hist_t[:drop], self._hist[:drop]

    def attitude_at(self, stamp: float):
        i = max(bisect.bisect_right(self._hist_t, stamp) - 1, 0)
        return self._hist[i]

    def measurement(self, m: StampedMeasurement, q) -> None:
        if self.ekf is None:
            return
        R, w = self.attitude_at(m.stamp)
        g = self.geom.at(q)
        value = m.value
        if m.kind == "gps_pos":
            value = gps_to_enu(value, self.suite.geo_ref)
        meas = to_imu_frame(m.kind, m.stamp, value, m.noise, g.kin, R, w, self.suite.mounts)
        try:
            self.ekf.insert(meas)
        except StaleMeasurement:
            self.stale += 1

    def state(self, q, t: float) -> RigidBodyState:
        x = self.ekf.head_mean
        g = self.geom.at(q)
        return to_cog_frame(x[0:3], x[3:6], self.att.R_W_IMU, self.att.omega_IMU,
                            g.T_imu_cog, q, t)

    @property
    def bias(self) -> NDArray[np.float64]:
        return self.ekf.head_mean[6:9].copy()


COLUMNS = (
    ["t", "q1", "q2"]
    + [f"r_{a}" for a in "xyz"] + [f"v_{a}" for a in "xyz"]
    + ["roll", "pitch", "yaw"] + [f"omega_{a}" for a in "xyz"]
    + [f"r_est_{a}" for a in "xyz"] + [f"v_est_{a}" for a in "xyz"] + ["yaw_est"]
    + [f"r_des_{a}" for a in "xyz"] + ["speed_des", "yaw_des"]
    + [f"e_r_{a}" for a in "xyz"] + [f"e_r_est_{a}" for a in "xyz"] + ["e_yaw"]
    + [f"u_{i}" for i in range(1, 5)] + ["saturated"]
)


@dataclass
class RunLog:
    """Control-rate log with named columns plus a JSON-ready summary."""

    data: NDArray[np.float64]
    summary: dict
    sensor_log: list | None = None

    def col(self, name: str) -> NDArray[np.float64]:
        return self.data[:, COLUMNS.index(name)]

    def cols(self, *names) -> NDArray[np.float64]:
        return self.data[:, [COLUMNS.index(n) for n in names]]

    @property
    def t(self):
        return self.col("t")

    def err_norm(self, estimated: bool = False) -> NDArray[np.float64]:
        p = "e_r_est_" if estimated else "e_r_"
        return np.linalg.norm(self.cols(p + "x", p + "y", p + "z"), axis=1)

    def horizontal_err(self, estimated: bool = False) -> NDArray[np.float64]:
        p = "e_r_est_" if estimated else "e_r_"
        return np.linalg.norm(self.cols(p + "x", p + "y"), axis=1)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in self.data:
            w.writerow([format(float(v), ".17g") for v in row])
        return buf.getvalue()

    def write(self, out_dir, stem: str) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
        _atomic_write(csv_path, self.to_csv())
        _atomic_write(json_path, json.dumps(self.summary, indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _summary(log: RunLog, sc: Scenario, seed: int, bias, stale: int) -> dict:
    t = log.t
    steady = t >= t[-1] - sc.steady_window + 1e-9
    e, e_est = log.err_norm(), log.err_norm(True)
    h, h_est = log.horizontal_err(), log.horizontal_err(True)
    speed = log.col("speed_des")
    top = speed >= 0.99 * speed.max() if speed.max() > 0 else np.zeros_like(speed, bool)
    out = {
        "scenario": sc.name,
        "seed": seed,
        "feedback": sc.feedback,
        "duration": float(t[-1]),
        "max_err": float(e.max()),
        "steady_err": float(e[steady].max()),
        "final_err": float(e[-1]),
        "max_err_est": float(e_est.max()),
        "steady_err_est": float(e_est[steady].max()),
        "max_horizontal_err": float(h.max()),
        "max_horizontal_err_est": float(h_est.max()),
        "max_z_err": float(np.abs(log.col("e_r_z")).max()),
        "max_z_err_est": float(np.abs(log.col("e_r_est_z")).max()),
        "max_yaw_err": float(np.abs(log.col("e_yaw")).max()),
        "saturation_fraction": float(log.col("saturated").mean()),
        "stale_measurements": stale,
    }
    if top.any():
        out["max_horizontal_err_at_top_speed"] = float(h[top].max())
        out["max_horizontal_err_est_at_top_speed"] = float(h_est[top].max())
        out["max_z_err_at_top_speed"] = float(np.abs(log.col("e_r_z"))[top].max())
    if bias is not None:
        out["accel_bias_est"] = [float(b) for b in bias]
    return out


def run_scenario(scenario: Scenario, spec: RobotSpec | None = None,
                 config: ControllerConfig | None = None,
                 estimator: EstimatorConfig | None = None, seed: int = 0,
                 record_sensors: bool = False) -> RunLog:
    """Run the closed loop and return the control-rate log.

    With ``record_sensors`` the log also carries the raw sensor stream in
    arrival order, with IMU-origin truth and joint records, for replay.

    Order within a plant step at time ``t``: sensors sample the state at
    ``t`` under the thrust currently applied, arrived measurements enter
    the estimator, the controller updates on its ticks, then the plant
    integrates to ``t + dt``.
    """
    sc = scenario
    spec = spec or RobotSpec()
    q0 = sc.joints(0.0)
    r0 = sc.start_position()
    init = RigidBodyState(r0, np.zeros(3), np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3), q0, 0.0)
    plant = Plant(spec, init, sc.disturbance)
    ctrl = Controller(spec, config)
    ctrl.velocity_mode = sc.velocity_mode
    ctrl.schedule(q0)
    u = ctrl.alloc.u_s.copy()
    sat = False

    use_est = sc.feedback == "estimator"
    sensors = pipe = None
    queue: list = []
    n_seq = 0
    records = [] if record_sensors else None
    q_logged = None
    if use_est or sc.estimator_attitude == "truth" or record_sensors:
        sensors = SensorEmulator(spec, sc.sensors, seed)
        pipe = EstimatorPipeline(spec, sc.sensors, estimator)
        g = pipe.geom.at(q0)
        T_cog_imu = g.T_imu_cog.inverse()
        pipe.start(0.0, r0 + T_cog_imu.translation, np.zeros(3), T_cog_imu.rotation)

    n_steps = int(round(sc.duration / sc.dt))
    every = sc.control_every
    rows = []
    est = None
    for k in range(n_steps + 1):
        t = k * sc.dt
        q = sc.joints(t)
        plant.set_joints(q)
        plant.t = t
        truth = None
        if sensors is not None and sensors.any_due(t):
            truth = plant.nominal_state()
            for item in sensors.sample(t, truth, lambda: plant.nominal_accelerations(u)):
                if records is not None and item[1].kind == "imu":
                    if q_logged is None or not np.array_equal(q, q_logged):
                        records.append(LogRecord(t, "joints", tuple(q)))
                        q_logged = q
                    Tc = pipe.geom.at(q).T_imu_cog.inverse()
                    R = truth.R
                    records.append(LogRecord(t, "truth", tuple(np.concatenate([
                        truth.r + R @ Tc.translation,
                        truth.v + R @ cross3(truth.omega, Tc.translation),
                        rot_to_quat(R @ Tc.rotation)]))))
                n_seq += 1
                bisect.insort(queue, (item[0], n_seq, item[1]), key=lambda e: (e[0], e[1]))
        while queue and queue[0][0] <= t + 1e-12:
            _, _, m = queue.pop(0)
            if records is not None:
                records.append(LogRecord(m.stamp, m.kind, tuple(m.value)))
            if m.kind == "imu":
                truth_att = None
                if sc.estimator_attitude == "truth":
                    truth = truth or plant.nominal_state()
                    T = pipe.geom.at(q).T_imu_cog
                    truth_att = (truth.R @ T.rotation.T, T.rotation @ truth.omega)
                pipe.imu(m, truth_att)
            else:
                pipe.measurement(m, q)
        if k % every == 0:
            if truth is None:
                truth = plant.nominal_state()
            ref = sc.reference(t)
            if use_est:
                est = pipe.state(q, t)
                fb = est
            else:
                fb = truth
            out = ctrl.step(fb.r, fb.v, fb.R, fb.omega, q, ref, sc.control_dt)
            u = out.u_des
            sat = bool(out.saturated.any())
            e = ref.r - truth.r
            e_est = ref.r - fb.r
            alpha = euler_zyx(truth.R)
            yaw_fb = euler_zyx(fb.R)[2]
            rows.append(np.concatenate([
                [t], q, truth.r, truth.v, alpha, truth.omega, fb.r, fb.v, [yaw_fb],
                ref.r, [np.linalg.norm(ref.v), ref.yaw], e, e_est,
                [wrap_angle(ref.yaw - alpha[2])], u, [float(sat)],
            ]))
        if k < n_steps:
            plant.step(u, sc.dt)
    data = np.array(rows)
    bias = pipe.bias if (pipe is not None and pipe.ekf is not None) else None
    log = RunLog(data, {}, records)
    log.summary = _summary(log, sc, seed, bias, pipe.stale if pipe else 0)
    return log
