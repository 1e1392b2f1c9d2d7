"""Sensor mounts and conversions between sensor, IMU and CoG frames.

Sensors are rigidly attached to one link. Their pose relative to the IMU
therefore depends on the joint angles and is recomputed from the current
kinematics. Positions are in meters, velocities in the world frame unless
noted, angular rates in the IMU body frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from tiltlink._rot import rot_to_quat, rot_y
from tiltlink.errors import UnknownFrame
from tiltlink.model import AllocationSet, FramePose, Kinematics
from tiltlink.state import RigidBodyState


@dataclass(frozen=True)
class SensorMount:
    """Pose of a sensor in the frame of link ``link`` (0-based)."""

    link: int
    pose: FramePose

    def in_l1(self, kin: Kinematics) -> FramePose:
        return kin.links[self.link].compose(self.pose)


def _mount(link, xyz, R=None) -> SensorMount:
    return SensorMount(link, FramePose(np.eye(3) if R is None else R, np.array(xyz, float)))


def default_mounts() -> dict[str, SensorMount]:
    """IMU at the start of link 3; GPS and a nadir LiDAR on link 2; VIO on link 3.

    The LiDAR frame is pitched by +pi/2 so its x axis (the beam) points down.
    """
    return {
        "imu": _mount(2, [0.0, 0.0, 0.0]),
        "gps": _mount(1, [0.3, 0.0, 0.1]),
        "vio": _mount(2, [0.3, 0.0, -0.05]),
        "lidar": _mount(1, [0.2, 0.0, -0.05], rot_y(math.pi / 2)),
    }


@dataclass
class MountRegistry:
    mounts: dict = field(default_factory=default_mounts)

    def get(self, name: str) -> SensorMount:
        try:
            return self.mounts[name]
        except KeyError:
            raise UnknownFrame(name) from None

    def imu_to(self, name: str, kin: Kinematics) -> FramePose:
        """Pose of sensor ``name`` in the IMU frame."""
        imu = self.get("imu").in_l1(kin)
        return imu.inverse().compose(self.get(name).in_l1(kin))

    def imu_to_cog(self, alloc: AllocationSet) -> FramePose:
        """Pose of frame {CoG} in the IMU frame."""
        kin = alloc.kinematics
        cog_in_l1 = FramePose(alloc.R_CoG_C.T, kin.c_frame.translation)
        return self.get("imu").in_l1(kin).inverse().compose(cog_in_l1)


def position_to_imu(p_S, R_W_IMU, T_IMU_S: FramePose) -> NDArray[np.float64]:
    return np.asarray(p_S, float) - R_W_IMU @ T_IMU_S.translation


def velocity_to_imu(v_S_sensor, R_W_IMU, omega_IMU, T_IMU_S: FramePose) -> NDArray[np.float64]:
    """World velocity of the IMU origin from a sensor-frame velocity reading."""
    lever = T_IMU_S.translation
    return R_W_IMU @ (T_IMU_S.rotation @ np.asarray(v_S_sensor, float)
                      - np.cross(omega_IMU, lever))


def lidar_height(d: float, R_W_LiDAR) -> float:
    """Height above flat ground of a range ``d`` measured along the beam (x axis)."""
    if d < 0:
        raise ValueError("range must be nonnegative")
    return float(-(np.asarray(R_W_LiDAR)[2, 0] * d))


@dataclass(frozen=True)
class ImuFrameMeasurement:
    """A measurement referred to the IMU origin, ready for the Kalman filter.

    ``kind`` is one of ``gps_pos`` (x, y), ``gps_vel``, ``vio_vel`` (3-vectors)
    or ``lidar`` (z).
    """

    kind: str
    stamp: float
    z: NDArray[np.float64]
    sigma: NDArray[np.float64]


def to_imu_frame(kind: str, stamp: float, value, sigma, kin: Kinematics, R_W_IMU,
                 omega_IMU, mounts: MountRegistry) -> ImuFrameMeasurement:
    """Refer a raw reading to the IMU origin.

    ``value`` is: the GPS fix as world ``[x, y]`` (already converted from
    latitude/longitude), the GPS world velocity, the VIO velocity in its own
    frame, or the LiDAR range.
    """
    sensor = {"gps_pos": "gps", "gps_vel": "gps", "vio_vel": "vio", "lidar": "lidar"}.get(kind)
    if sensor is None:
        raise UnknownFrame(kind)
    T = mounts.imu_to(sensor, kin)
    sigma = np.atleast_1d(np.asarray(sigma, float))
    if kind == "gps_pos":
        p = position_to_imu([value[0], value[1], 0.0], R_W_IMU, T)
        return ImuFrameMeasurement(kind, stamp, p[:2], sigma)
    if kind == "gps_vel":
        lever_vel = R_W_IMU @ np.cross(omega_IMU, T.translation)
        return ImuFrameMeasurement(kind, stamp, np.asarray(value, float) - lever_vel, sigma)
    if kind == "vio_vel":
        return ImuFrameMeasurement(kind, stamp, velocity_to_imu(value, R_W_IMU, omega_IMU, T), sigma)
    R_W_L = R_W_IMU @ T.rotation
    h_sensor = lidar_height(float(np.asarray(value).reshape(-1)[0]), R_W_L)
    z = position_to_imu([0.0, 0.0, h_sensor], R_W_IMU, T)[2]
    return ImuFrameMeasurement(kind, stamp, np.array([z]), sigma)


def to_cog_frame(p_IMU, v_IMU, R_W_IMU, omega_IMU, T_IMU_CoG: FramePose,
                 q_joints=(0.0, 0.0), t: float = 0.0) -> RigidBodyState:
    R_W_IMU = np.asarray(R_W_IMU, float)
    omega_IMU = np.asarray(omega_IMU, float)
    lever = T_IMU_CoG.translation
    R = R_W_IMU @ T_IMU_CoG.rotation
    return RigidBodyState(
        r=np.asarray(p_IMU, float) + R_W_IMU @ lever,
        v=np.asarray(v_IMU, float) + R_W_IMU @ np.cross(omega_IMU, lever),
        quat=rot_to_quat(R),
        omega=T_IMU_CoG.rotation.T @ omega_IMU,
        q_joints=np.asarray(q_joints, float),
        t=t,
    )
