"""Rigid-body state of frame {CoG} in the world frame."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from tiltlink._rot import quat_to_rot, rot_to_quat


@dataclass
class RigidBodyState:
    """Position, velocity, attitude quaternion ``[w, x, y, z]`` and body rates."""

    r: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    v: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    quat: NDArray[np.float64] = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    omega: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    q_joints: NDArray[np.float64] = field(default_factory=lambda: np.zeros(2))
    t: float = 0.0

    @property
    def R(self) -> NDArray[np.float64]:
        return quat_to_rot(self.quat)

    @classmethod
    def from_rotation(cls, r, v, R, omega, q_joints=(0.0, 0.0), t=0.0) -> "RigidBodyState":
        return cls(np.array(r, float), np.array(v, float), rot_to_quat(np.asarray(R)),
                   np.array(omega, float), np.array(q_joints, float), float(t))

    def copy(self) -> "RigidBodyState":
        return RigidBodyState(self.r.copy(), self.v.copy(), self.quat.copy(),
                              self.omega.copy(), self.q_joints.copy(), self.t)
