"""Sensor emulation: IMU, GPS, VIO and LiDAR with rate, noise, bias and delay."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from tiltlink._rot import cross3
from tiltlink.errors import ScenarioConfigError
from tiltlink.estimation.frames import MountRegistry
from tiltlink.estimation.geo import GeoReference, enu_to_gps
from tiltlink.model import RobotSpec, allocation
from tiltlink.state import RigidBodyState

KINDS = ("imu", "gps_pos", "gps_vel", "vio_vel", "lidar")


@dataclass(frozen=True)
class StampedMeasurement:
    """A raw reading.

    ``value`` holds: ``imu`` accel(3), gyro(3), mag(3); ``gps_pos`` latitude
    and longitude in degrees; ``gps_vel`` world velocity; ``vio_vel``
    velocity in the VIO frame; ``lidar`` range along the beam.
    """

    kind: str
    value: NDArray[np.float64]
    stamp: float
    noise: NDArray[np.float64]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown measurement kind {self.kind!r}")
        if not np.isfinite(self.stamp):
            raise ValueError("stamp must be finite")
        if np.any(np.asarray(self.noise) <= 0):
            raise ValueError("noise entries must be positive")


@dataclass(frozen=True)
class SensorChannel:
    rate: float
    sigma: float
    delay: float = 0.0
    enabled: bool = True


@dataclass
class SensorSuite:
    """Rates in Hz, noise standard deviations per sample, delays in seconds.

    The IMU accelerometer noise is a density in m/s^2/sqrt(Hz); per-sample
    standard deviation is ``density * sqrt(rate)``.
    """

    imu_rate: float = 100.0
    accel_density: float = 0.003
    gyro_sigma: float = 0.001
    mag_sigma: float = 0.005
    accel_bias: tuple = (0.0, 0.0, 0.0)
    gps_pos: SensorChannel = SensorChannel(5.0, 1.5, 0.3)
    gps_vel: SensorChannel = SensorChannel(5.0, 0.1, 0.3)
    vio_vel: SensorChannel = SensorChannel(30.0, 0.05, 0.05)
    lidar: SensorChannel = SensorChannel(50.0, 0.03, 0.02)
    geo_ref: GeoReference = GeoReference(24.4539, 54.3773)
    mag_ref: tuple = (1.0, 0.0, 0.0)
    mounts: MountRegistry = field(default_factory=MountRegistry)
    noiseless: bool = False

    def channel(self, kind: str) -> SensorChannel:
        return getattr(self, kind)


def perfect_suite(**kw) -> SensorSuite:
    """Noise-free, delay-free sensors (nominal sigmas kept for the filter)."""
    return SensorSuite(noiseless=True, **kw)


class SensorEmulator:
    """Samples sensors from the truth state on a fixed schedule.

    ``sample`` returns ``(arrival_time, StampedMeasurement)`` pairs for every
    sensor due at time ``t``. Randomness comes from one seeded generator, so
    identical seeds give identical streams.
    """

    def __init__(self, spec: RobotSpec, suite: SensorSuite, seed: int = 0):
        self.spec = spec
        self.suite = suite
        self.rng = np.random.default_rng(seed)
        self._next = {k: 0.0 for k in KINDS}
        self._geom_key = None

    def _due(self, kind: str, t: float, rate: float) -> bool:
        if t + 1e-9 >= self._next[kind]:
            self._next[kind] += 1.0 / rate
            return True
        return False

    def any_due(self, t: float) -> bool:
        s = self.suite
        if t + 1e-9 >= self._next["imu"]:
            return True
        return any(s.channel(k).enabled and t + 1e-9 >= self._next[k]
                   for k in ("gps_pos", "gps_vel", "vio_vel", "lidar"))

    def _noise(self, sigma: float, n: int) -> NDArray[np.float64]:
        if self.suite.noiseless:
            return np.zeros(n)
        return self.rng.normal(0.0, sigma, n)

    def _geometry(self, q):
        key = tuple(np.asarray(q, float))
        if key != self._geom_key:
            alloc = allocation(self.spec, q)
            kin = alloc.kinematics
            m = self.suite.mounts
            self._T_cog_imu = m.imu_to_cog(alloc).inverse()
            self._T_cog = {name: self._T_cog_imu.compose(m.imu_to(name, kin))
                           for name in ("gps", "vio", "lidar")}
            self._geom_key = key
        return self._T_cog_imu, self._T_cog

    def sample(self, t: float, truth: RigidBodyState, acc_world, domega=None) -> list:
        """``truth`` is the nominal {CoG} state; ``acc_world``/``domega`` its accelerations.

        ``acc_world`` may instead be a callable returning both, evaluated only
        when the IMU is due.
        """
        s = self.suite
        out = []
        T_imu, T = self._geometry(truth.q_joints)
        R = truth.R
        w = truth.omega
        if self._due("imu", t, s.imu_rate):
            if callable(acc_world):
                acc_world, domega = acc_world()
            rho = T_imu.translation
            a_imu = acc_world + R @ (cross3(domega, rho) + cross3(w, cross3(w, rho)))
            R_W_IMU = R @ T_imu.rotation
            f = R_W_IMU.T @ (a_imu + np.array([0.0, 0.0, self.spec.gravity]))
            sig_a = s.accel_density * np.sqrt(s.imu_rate)
            accel = f + np.asarray(s.accel_bias) + self._noise(sig_a, 3)
            gyro = T_imu.rotation.T @ w + self._noise(s.gyro_sigma, 3)
            mag = R_W_IMU.T @ np.asarray(s.mag_ref) + self._noise(s.mag_sigma, 3)
            out.append((t, StampedMeasurement("imu", np.concatenate([accel, gyro, mag]), t,
                                              np.array([sig_a, s.gyro_sigma, s.mag_sigma]))))
        for kind, mount in (("gps_pos", "gps"), ("gps_vel", "gps"), ("vio_vel", "vio"),
                            ("lidar", "lidar")):
            ch = s.channel(kind)
            if not ch.enabled or not self._due(kind, t, ch.rate):
                continue
            Tm = T[mount]
            p = truth.r + R @ Tm.translation
            v = truth.v + R @ cross3(w, Tm.translation)
            delay = 0.0 if s.noiseless else ch.delay
            if kind == "gps_pos":
                ne = p[:2] + self._noise(ch.sigma, 2)
                val = np.array(enu_to_gps(ne, s.geo_ref))
            elif kind == "gps_vel":
                val = v + self._noise(ch.sigma, 3)
            elif kind == "vio_vel":
                val = (R @ Tm.rotation).T @ v + self._noise(ch.sigma, 3)
            else:
                beam = (R @ Tm.rotation)[:, 0]
                if beam[2] >= -1e-6:
                    continue
                val = np.array([p[2] / -beam[2]]) + self._noise(ch.sigma, 1)
            out.append((t + delay, StampedMeasurement(kind, val, t, np.full(val.size, ch.sigma))))
        return out


def emulate_sensors(history, spec: RobotSpec, suite: SensorSuite, seed: int = 0) -> list:
    """Sensor stream for a truth history of ``(state, acc_world, domega)`` tuples,
    sorted by arrival time (ties keep generation order)."""
    em = SensorEmulator(spec, suite, seed)
    out = []
    for st, acc, dw in history:
        out.extend(em.sample(st.t, st, np.asarray(acc, float), np.asarray(dw, float)))
    order = sorted(range(len(out)), key=lambda i: (out[i][0], i))
    return [out[i] for i in order]


def suite_from_dict(d: dict[str, str]) -> SensorSuite:
    """Overrides like ``gps_pos.sigma = 1.0`` or ``imu.accel_bias = 0.05 0 0``."""
    from tiltlink.config import as_float, as_floats
    kw = {}
    chans = {}
    for key in d:
        if "." not in key:
            continue
        head, attr = key.split(".", 1)
        if head in ("gps_pos", "gps_vel", "vio_vel", "lidar"):
            if attr not in ("rate", "sigma", "delay", "enabled"):
                raise ScenarioConfigError(f"unknown sensor attribute {key}")
            chans.setdefault(head, {})[attr] = d[key]
        elif head == "imu":
            if attr == "accel_bias":
                kw["accel_bias"] = tuple(as_floats(d, key, (0, 0, 0), 3))
            elif attr in ("rate", "accel_density", "gyro_sigma", "mag_sigma"):
                kw["imu_rate" if attr == "rate" else attr] = as_float(d, key, 0.0)
            else:
                raise ScenarioConfigError(f"unknown sensor attribute {key}")
    base = SensorSuite()
    for name, attrs in chans.items():
        ch = base.channel(name)
        kw[name] = SensorChannel(
            float(attrs.get("rate", ch.rate)), float(attrs.get("sigma", ch.sigma)),
            float(attrs.get("delay", ch.delay)),
            attrs.get("enabled", str(ch.enabled)).strip().lower() in ("1", "true", "yes", "on"))
    if d.get("sensors.noiseless", "false").strip().lower() in ("1", "true", "yes", "on"):
        kw["noiseless"] = True
    return SensorSuite(**kw)
