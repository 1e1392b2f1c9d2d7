"""Rigid-body truth plant with quasi-static joints and an optional payload.

The plant integrates the full nonlinear Newton-Euler equations about the
true center of mass. Its attitude is that of the nominal {CoG} frame. A
rigidly grasped payload shifts the true mass center away from the nominal
{CoG} origin; the nominal origin is what sensors and the controller see.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from tiltlink._rot import cross3, quat_mul, quat_to_rot, rot_to_quat
from tiltlink.errors import NonFiniteState
from tiltlink.model import RobotSpec, allocation, inertia
from tiltlink.state import RigidBodyState


@dataclass(frozen=True)
class Impulse:
    """Wrench applied on ``[t, t + duration)``: world force, body torque."""

    t: float
    duration: float
    force: tuple = (0.0, 0.0, 0.0)
    torque: tuple = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("impulse duration must be positive")

    def active(self, t: float) -> bool:
        return self.t <= t < self.t + self.duration


@dataclass(frozen=True)
class Payload:
    """Point mass rigidly attached at ``offset`` in the nominal {CoG} frame."""

    mass: float
    offset: tuple = (0.0, 0.0, 0.0)
    attach: float = 0.0
    release: float = math.inf

    def __post_init__(self):
        if self.mass < 0:
            raise ValueError("payload mass must be nonnegative")

    def attached(self, t: float) -> bool:
        return self.attach <= t < self.release


@dataclass(frozen=True)
class WrenchProfile:
    """Piecewise-linear disturbance: rows ``(t, fx, fy, fz, tx, ty, tz)``."""

    table: tuple

    def __call__(self, t: float):
        arr = np.asarray(self.table, dtype=float).reshape(-1, 7)
        vals = np.array([np.interp(t, arr[:, 0], arr[:, j]) for j in range(1, 7)])
        return vals[:3], vals[3:]


@dataclass
class Disturbance:
    delta_tran: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    delta_rot: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    impulses: list = field(default_factory=list)
    payload: Payload | None = None
    profile: WrenchProfile | None = None

    def wrench(self, t: float):
        """World-frame force and body-frame torque at time ``t``."""
        f = np.array(self.delta_tran, dtype=float)
        tau = np.array(self.delta_rot, dtype=float)
        for imp in self.impulses:
            if imp.active(t):
                f += imp.force
                tau += imp.torque
        if self.profile is not None:
            pf, pt = self.profile(t)
            f += pf
            tau += pt
        return f, tau


@dataclass(frozen=True)
class MassProperties:
    """Truth mass properties about the true mass center, in {CoG} axes."""

    mass: float
    offset: NDArray[np.float64]         # true mass center in the nominal {CoG} frame
    I: NDArray[np.float64]
    I_inv: NDArray[np.float64]
    Q_tran: NDArray[np.float64]
    Q_rot: NDArray[np.float64]
    R_CoG_C: NDArray[np.float64]


def mass_properties(spec: RobotSpec, q, payload: Payload | None = None) -> MassProperties:
    alloc = allocation(spec, q)
    I = inertia(spec, q, alloc).I
    m = spec.mass
    d = np.zeros(3)
    if payload is not None and payload.mass > 0:
        s = np.asarray(payload.offset, dtype=float)
        mp = payload.mass
        d = mp * s / (m + mp)
        I = (I + m * (d @ d * np.eye(3) - np.outer(d, d))
             + mp * ((s - d) @ (s - d) * np.eye(3) - np.outer(s - d, s - d)))
        m = m + mp
    Q_rot = alloc.Q_rot - np.cross(d, alloc.Q_tran.T).T
    return MassProperties(m, d, I, np.linalg.inv(I), alloc.Q_tran, Q_rot, alloc.R_CoG_C)


def _deriv(y, u, props: MassProperties, f_ext, tau_ext, g):
    v, quat, w = y[3:6], y[6:10], y[10:13]
    R = quat_to_rot(quat)
    acc = (R @ (props.Q_tran @ u) + f_ext) / props.mass
    acc[2] -= g
    dq = 0.5 * quat_mul(quat, np.array([0.0, w[0], w[1], w[2]]))
    Iw = props.I @ w
    dw = props.I_inv @ (props.Q_rot @ u + tau_ext - cross3(w, Iw))
    return np.concatenate([v, acc, dq, dw])


def rk4(y, u, props, f_ext, tau_ext, g, dt):
    k1 = _deriv(y, u, props, f_ext, tau_ext, g)
    k2 = _deriv(y + 0.5 * dt * k1, u, props, f_ext, tau_ext, g)
    k3 = _deriv(y + 0.5 * dt * k2, u, props, f_ext, tau_ext, g)
    k4 = _deriv(y + dt * k3, u, props, f_ext, tau_ext, g)
    out = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    out[6:10] /= np.linalg.norm(out[6:10])
    return out


def accelerations(y, u, props: MassProperties, f_ext, tau_ext, g):
    """Linear acceleration of the true mass center and angular acceleration."""
    d = _deriv(y, u, props, f_ext, tau_ext, g)
    return d[3:6], d[10:13]


class Plant:
    """Stateful truth plant. ``state`` is the true mass-center state."""

    def __init__(self, spec: RobotSpec, nominal: RigidBodyState,
                 disturbance: Disturbance | None = None):
        self.spec = spec
        self.disturbance = disturbance or Disturbance()
        self.t = nominal.t
        self.q = np.array(nominal.q_joints, dtype=float)
        self._attached = self._payload_on(self.t)
        self._key = None
        self.props = self._props()
        R = nominal.R
        d = self.props.offset
        self.y = np.concatenate([
            nominal.r + R @ d, nominal.v + R @ cross3(nominal.omega, d),
            nominal.quat, nominal.omega,
        ])
        self.last_acc = np.zeros(3)
        self.last_domega = np.zeros(3)

    def _payload_on(self, t: float) -> bool:
        p = self.disturbance.payload
        return p is not None and p.attached(t)

    def _props(self) -> MassProperties:
        key = (tuple(self.q), self._attached)
        if key != self._key:
            self._key = key
            self._cached = mass_properties(self.spec, self.q,
                                           self.disturbance.payload if self._attached else None)
        return self._cached

    def _reorigin(self, new: MassProperties) -> None:
        """Move the tracked point when the mass center jumps (attach/release)."""
        R = quat_to_rot(self.y[6:10])
        w = self.y[10:13]
        old = self.props.offset
        r_nom = self.y[0:3] - R @ old
        v_nom = self.y[3:6] - R @ cross3(w, old)
        self.y[0:3] = r_nom + R @ new.offset
        self.y[3:6] = v_nom + R @ cross3(w, new.offset)

    def set_joints(self, q) -> None:
        """Quasi-static joint change: {C} keeps its world attitude, {CoG} re-levels."""
        q = np.asarray(q, dtype=float)
        if np.array_equal(q, self.q):
            return
        old = self.props
        self.q = q.copy()
        new = self._props()
        self._reorigin(new)
        turn = new.R_CoG_C @ old.R_CoG_C.T
        R = quat_to_rot(self.y[6:10]) @ turn.T
        self.y[6:10] = rot_to_quat(R)
        self.y[10:13] = turn @ self.y[10:13]
        self.props = new

    def step(self, u, dt: float) -> None:
        if not 0 < dt <= 0.01:
            raise ValueError("dt must lie in (0, 0.01]")
        attached = self._payload_on(self.t)
        if attached != self._attached:
            self._attached = attached
            new = self._props()
            self._reorigin(new)
            self.props = new
        f, tau = self.disturbance.wrench(self.t)
        u = np.asarray(u, dtype=float)
        # divergence is detected below, so silence the overflow warnings leading to it
        with np.errstate(over="ignore", invalid="ignore"):
            self.last_acc, self.last_domega = accelerations(self.y, u, self.props, f, tau,
                                                            self.spec.gravity)
            y = rk4(self.y, u, self.props, f, tau, self.spec.gravity, dt)
        self.t += dt
        if not np.all(np.isfinite(y)):
            raise NonFiniteState(f"plant state diverged at t={self.t:.3f}s", self.t)
        self.y = y

    def true_state(self) -> RigidBodyState:
        y = self.y
        return RigidBodyState(y[0:3].copy(), y[3:6].copy(), y[6:10].copy(), y[10:13].copy(),
                              self.q.copy(), self.t)

    def nominal_state(self) -> RigidBodyState:
        """State of the nominal {CoG} frame origin (what sensors observe)."""
        y = self.y
        R = quat_to_rot(y[6:10])
        d = self.props.offset
        w = y[10:13]
        return RigidBodyState(y[0:3] - R @ d, y[3:6] - R @ cross3(w, d), y[6:10].copy(),
                              w.copy(), self.q.copy(), self.t)

    def nominal_accelerations(self, u) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """World acceleration of the nominal {CoG} origin and body angular
        acceleration at the current state under thrust ``u``."""
        f, tau = self.disturbance.wrench(self.t)
        acc, dw = accelerations(self.y, np.asarray(u, float), self.props, f, tau,
                                self.spec.gravity)
        R = quat_to_rot(self.y[6:10])
        w = self.y[10:13]
        d = self.props.offset
        return acc - R @ (cross3(dw, d) + cross3(w, cross3(w, d))), dw


def plant_step(state: RigidBodyState, u, disturbance: Disturbance | None, spec: RobotSpec,
               dt: float) -> RigidBodyState:
    """One RK4 step from a nominal-frame state with joints held at ``state.q_joints``."""
    plant = Plant(spec, state, disturbance)
    plant.step(u, dt)
    return plant.nominal_state()
