"""Complementary attitude filter on SO(3).

Gyro rates are integrated with the exponential map. The accelerometer pulls
the estimated up axis toward the measured specific force and the
magnetometer pulls the heading toward magnetic north (world +x), each with a
first-order gain. Correction for a weak field is skipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from tiltlink._rot import so3_exp
from tiltlink.errors import DegenerateField

G = 9.81


@dataclass
class AttitudeEstimate:
    R_W_IMU: NDArray[np.float64] = field(default_factory=lambda: np.eye(3))
    omega_IMU: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    corrected: bool = True


@dataclass(frozen=True)
class ComplementaryGains:
    k_acc: float = 0.5
    k_mag: float = 0.2
    g: float = G
    mag_ref: tuple = (1.0, 0.0, 0.0)
    mag_norm: float = 1.0


def correction_rate(R, accel, mag, gains: ComplementaryGains, strict: bool = False):
    """Body-frame corrective rate, or ``None`` when a field is degenerate."""
    a = np.asarray(accel, float)
    m = np.asarray(mag, float)
    if np.linalg.norm(a) < 0.1 * gains.g or np.linalg.norm(m) < 0.1 * gains.mag_norm:
        if strict:
            raise DegenerateField("accelerometer or magnetometer field too weak")
        return None
    up_est = R[2]
    w = gains.k_acc * np.cross(a / np.linalg.norm(a), up_est)
    m_est = R.T @ np.asarray(gains.mag_ref, float)
    # heading error only: keep the component about the estimated vertical
    e_m = np.cross(m / np.linalg.norm(m), m_est / np.linalg.norm(m_est))
    w = w + gains.k_mag * (e_m @ up_est) * up_est
    return w


def complementary_update(att: AttitudeEstimate, gyro, accel, mag, dt: float,
                         gains: ComplementaryGains = ComplementaryGains(),
                         strict: bool = False) -> AttitudeEstimate:
    if not dt > 0:
        raise ValueError("dt must be positive")
    gyro = np.asarray(gyro, float)
    corr = correction_rate(att.R_W_IMU, accel, mag, gains, strict)
    w = gyro if corr is None else gyro + corr
    R = att.R_W_IMU @ so3_exp(w * dt)
    R = R @ (1.5 * np.eye(3) - 0.5 * R.T @ R)
    return AttitudeEstimate(R, gyro.copy(), corr is not None)
