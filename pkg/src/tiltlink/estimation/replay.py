"""Sensor log files and offline replay through the estimator.

A log is plain text, one record per line: ``stamp,kind,values...``. Lines
appear in arrival order. Kinds are the sensor kinds (``imu`` carries
accel, gyro and mag), plus ``truth`` (IMU-origin position and velocity,
optionally followed by the ``[w, x, y, z]`` attitude quaternion) and
``joints`` (``q1, q2`` from that stamp on). ``#`` starts a comment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from tiltlink._rot import quat_to_rot
from tiltlink.errors import ScenarioConfigError

SIZES = {"imu": (9,), "gps_pos": (2,), "gps_vel": (3,), "vio_vel": (3,), "lidar": (1,),
         "truth": (6, 10), "joints": (2,)}
EST_COLUMNS = (["stamp"] + [f"p_{a}" for a in "xyz"] + [f"v_{a}" for a in "xyz"]
               + [f"b_{a}" for a in "xyz"] + [f"p_true_{a}" for a in "xyz"]
               + [f"v_true_{a}" for a in "xyz"])


@dataclass(frozen=True)
class LogRecord:
    stamp: float
    kind: str
    values: tuple


def format_record(rec: LogRecord) -> str:
    return ",".join([format(float(rec.stamp), ".17g"), rec.kind]
                    + [format(float(v), ".17g") for v in rec.values])


def parse_log(text: str, source: str = "<log>") -> list[LogRecord]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        where = f"{source}:{lineno}"
        if len(parts) < 2:
            raise ScenarioConfigError(f"{where}: expected 'stamp,kind,values...'")
        kind = parts[1]
        if kind not in SIZES:
            raise ScenarioConfigError(f"{where}: unknown record kind {kind!r}")
        try:
            stamp = float(parts[0])
            vals = tuple(float(p) for p in parts[2:])
        except ValueError:
            raise ScenarioConfigError(f"{where}: bad number in {raw.strip()!r}") from None
        if not math.isfinite(stamp) or not all(math.isfinite(v) for v in vals):
            raise ScenarioConfigError(f"{where}: non-finite value")
        if len(vals) not in SIZES[kind]:
            raise ScenarioConfigError(
                f"{where}: {kind} needs {' or '.join(map(str, SIZES[kind]))} values, got {len(vals)}")
        out.append(LogRecord(stamp, kind, vals))
    return out


@dataclass
class ReplayResult:
    rows: NDArray[np.float64]   # EST_COLUMNS, one row per IMU stamp
    stale: int

    def to_csv(self) -> str:
        lines = [",".join(EST_COLUMNS)]
        lines += [",".join(format(float(v), ".17g") for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def replay(records: list[LogRecord], spec=None, suite=None, config=None,
           chronological: bool = False) -> ReplayResult:
    """Run a log through the estimator pipeline.

    Rows hold the final corrected mean at every IMU stamp, that is, after
    every delayed measurement concerning it has been applied. With
    ``chronological`` the records are first sorted by stamp.
    """
    from tiltlink.model import RobotSpec
    from tiltlink.sim.runner import EstimatorConfig, EstimatorPipeline
    from tiltlink.sim.scenario import NOMINAL_Q
    from tiltlink.sim.sensors import SensorSuite, StampedMeasurement

    spec = spec or RobotSpec()
    suite = suite or SensorSuite()
    recs = sorted(records, key=lambda r: r.stamp) if chronological else list(records)
    if not any(r.kind == "imu" for r in recs):
        return ReplayResult(np.zeros((0, len(EST_COLUMNS))), 0)

    pipe = EstimatorPipeline(spec, suite, config or EstimatorConfig(), keep_history=True)
    truth = [r for r in recs if r.kind == "truth"]
    first = min(truth, key=lambda r: r.stamp) if truth else None
    p0 = np.array(first.values[0:3]) if first else np.zeros(3)
    v0 = np.array(first.values[3:6]) if first else np.zeros(3)
    R0 = quat_to_rot(np.array(first.values[6:10])) if first and len(first.values) == 10 else np.eye(3)
    pipe.start(recs[0].stamp, p0, v0, R0)

    sigma = {"gps_pos": suite.gps_pos.sigma, "gps_vel": suite.gps_vel.sigma,
             "vio_vel": suite.vio_vel.sigma, "lidar": suite.lidar.sigma}
    imu_sigma = np.array([suite.accel_density * math.sqrt(suite.imu_rate), suite.gyro_sigma,
                          suite.mag_sigma])
    q = np.array(NOMINAL_Q)
    for r in recs:
        if r.kind == "joints":
            q = np.array(r.values)
        elif r.kind == "truth":
            continue
        elif r.kind == "imu":
            pipe.imu(StampedMeasurement("imu", np.array(r.values), r.stamp, imu_sigma))
        else:
            v = np.array(r.values)
            pipe.measurement(StampedMeasurement(r.kind, v, r.stamp, np.full(v.size, sigma[r.kind])), q)
    pipe.ekf.flush()
    traj = pipe.ekf.trajectory()

    tstamps = np.array([r.stamp for r in truth])
    order = np.argsort(tstamps, kind="stable")
    tvals = np.array([r.values[0:6] for r in truth]).reshape(-1, 6)[order]
    tstamps = tstamps[order]
    rows = []
    for stamp, x in traj:
        tr = np.full(6, np.nan)
        if tstamps.size:
            i = np.searchsorted(tstamps, stamp)
            if i < tstamps.size and abs(tstamps[i] - stamp) < 1e-9:
                tr = tvals[i]
        rows.append(np.concatenate([[stamp], x, tr]))
    return ReplayResult(np.array(rows), pipe.stale)
