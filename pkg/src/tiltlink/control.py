"""Cascaded flight control: LQI attitude loop, PID position loop, thrust mixing.

Attitude error state ordering is ``[a_x, da_x, a_y, da_y, a_z, da_z]`` with
errors defined as desired minus actual, followed by the three attitude-error
integrals. The attitude input is ``u_att = K_x @ xbar`` plus gyroscopic
feedforward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from tiltlink._rot import euler_zyx, rot_z, wrap_angle
from tiltlink.config import as_float, as_floats, check_known, load_kv
from tiltlink.errors import DegenerateForce
from tiltlink.model import AllocationSet, InertiaModel, RobotSpec, allocation, inertia
from tiltlink.riccati import are_residual, solve_lqr, spectral_abscissa

DEFAULT_M = (1100.0, 80.0, 1100.0, 80.0, 100.0, 50.0, 10.0, 10.0, 0.5)
DEFAULT_W1 = (1.0, 1.0, 1.0, 1.0)
DEFAULT_W2 = (100.0, 100.0, 100.0)
DEFAULT_KP = (2.3, 2.3, 3.6)
DEFAULT_KI = (0.02, 0.02, 3.4)
DEFAULT_KD = (4.0, 4.0, 1.55)
RESYNTH_DQ = 0.02
ANGLE_ROWS = (0, 2, 4)
RATE_ROWS = (1, 3, 5)


@dataclass
class AttitudeGains:
    """Diagonal LQI weights; ``K_x`` is filled in by synthesis."""

    M: NDArray[np.float64] = field(default_factory=lambda: np.diag(DEFAULT_M))
    W1: NDArray[np.float64] = field(default_factory=lambda: np.diag(DEFAULT_W1))
    W2: NDArray[np.float64] = field(default_factory=lambda: np.diag(DEFAULT_W2))
    K_x: NDArray[np.float64] | None = None


@dataclass
class PositionGains:
    """PID gains acting per unit mass.

    ``i_limit_r`` and ``i_limit_alpha`` clamp the position and attitude
    integrals element-wise.
    """

    K_P: NDArray[np.float64] = field(default_factory=lambda: np.diag(DEFAULT_KP))
    K_I: NDArray[np.float64] = field(default_factory=lambda: np.diag(DEFAULT_KI))
    K_D: NDArray[np.float64] = field(default_factory=lambda: np.diag(DEFAULT_KD))
    c: float = 0.3
    i_limit_r: float = 5.0
    i_limit_alpha: float = 2.0

    def __post_init__(self):
        for name in ("K_P", "K_I", "K_D"):
            d = np.diag(getattr(self, name))
            if name != "K_P" and np.any(d <= 0):
                raise ValueError(f"{name} diagonal must be positive")
            if np.any(d < 0):
                raise ValueError(f"{name} diagonal must be nonnegative")
        if not self.c > 0:
            raise ValueError("c must be positive")


@dataclass
class ControllerConfig:
    attitude: AttitudeGains = field(default_factory=AttitudeGains)
    position: PositionGains = field(default_factory=PositionGains)
    gravity_feedforward: bool = True
    resynth_dq: float = RESYNTH_DQ

    _KEYS = ("M", "W1", "W2", "K_P", "K_I", "K_D", "c", "i_limit_r", "i_limit_alpha",
             "gravity_feedforward", "resynth_dq")

    @classmethod
    def from_dict(cls, d: dict[str, str], source: str = "<gains>") -> "ControllerConfig":
        check_known(d, cls._KEYS, source)
        att = AttitudeGains(
            M=np.diag(as_floats(d, "M", DEFAULT_M, 9)),
            W1=np.diag(as_floats(d, "W1", DEFAULT_W1, 4)),
            W2=np.diag(as_floats(d, "W2", DEFAULT_W2, 3)),
        )
        base = PositionGains()
        pos = PositionGains(
            K_P=np.diag(as_floats(d, "K_P", DEFAULT_KP, 3)),
            K_I=np.diag(as_floats(d, "K_I", DEFAULT_KI, 3)),
            K_D=np.diag(as_floats(d, "K_D", DEFAULT_KD, 3)),
            c=as_float(d, "c", base.c),
            i_limit_r=as_float(d, "i_limit_r", base.i_limit_r),
            i_limit_alpha=as_float(d, "i_limit_alpha", base.i_limit_alpha),
        )
        ff = d.get("gravity_feedforward", "true").strip().lower() in ("1", "true", "yes", "on")
        return cls(att, pos, ff, as_float(d, "resynth_dq", RESYNTH_DQ))

    @classmethod
    def from_file(cls, path) -> "ControllerConfig":
        return cls.from_dict(load_kv(path), str(path))


# --------------------------------------------------------------------- attitude


def attitude_model(alloc: AllocationSet, inert: InertiaModel):
    """Integral-augmented error dynamics ``xbar' = Abar xbar + Bbar u``."""
    A = np.zeros((6, 6))
    A[0, 1] = A[2, 3] = A[4, 5] = 1.0
    B = np.zeros((6, 4))
    B[list(RATE_ROWS)] = np.linalg.solve(inert.I, alloc.Q_rot)
    C = np.zeros((3, 6))
    C[[0, 1, 2], list(ANGLE_ROWS)] = 1.0
    Abar = np.zeros((9, 9))
    Abar[:6, :6] = A
    Abar[6:, :6] = C
    Bbar = np.zeros((9, 4))
    Bbar[:6] = -B
    return Abar, Bbar


def input_weight(alloc: AllocationSet, gains: AttitudeGains) -> NDArray[np.float64]:
    return gains.W1 + alloc.Q_tran.T @ gains.W2 @ alloc.Q_tran


@dataclass(frozen=True)
class LqiResult:
    K_x: NDArray[np.float64]
    P: NDArray[np.float64]
    N: NDArray[np.float64]
    Abar: NDArray[np.float64]
    Bbar: NDArray[np.float64]
    residual: float
    spectral_abscissa: float

    @property
    def K_x_I(self) -> NDArray[np.float64]:
        return self.K_x[:, 6:]


def lqi_synthesize(alloc: AllocationSet, inert: InertiaModel,
                   gains: AttitudeGains | None = None) -> LqiResult:
    gains = gains or AttitudeGains()
    Abar, Bbar = attitude_model(alloc, inert)
    N = input_weight(alloc, gains)
    sol = solve_lqr(Abar, Bbar, gains.M, N)
    K_x = -sol.K
    return LqiResult(K_x, sol.P, N, Abar, Bbar,
                     are_residual(Abar, Bbar, gains.M, N, sol.P),
                     spectral_abscissa(Abar + Bbar @ K_x))


def gyro_torque(inert: InertiaModel, omega) -> NDArray[np.float64]:
    w = np.asarray(omega, dtype=float)
    return np.cross(w, inert.I @ w)


@dataclass
class ControlState:
    e_I_alpha: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    e_I_r: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))
    alpha_des: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    def copy(self) -> "ControlState":
        return ControlState(self.e_I_alpha.copy(), self.e_I_r.copy(), self.alpha_des.copy())


def attitude_error(alpha_des, alpha, rate_des, omega) -> NDArray[np.float64]:
    e = np.zeros(6)
    e[list(ANGLE_ROWS)] = np.asarray(alpha_des) - np.asarray(alpha)
    e[4] = float(wrap_angle(e[4]))
    e[list(RATE_ROWS)] = np.asarray(rate_des) - np.asarray(omega)
    return e


def attitude_step(state: ControlState, xbar, omega, inert: InertiaModel,
                  alloc: AllocationSet, K_x, dt: float = 0.0,
                  i_limit: float = math.inf) -> NDArray[np.float64]:
    """LQI feedback plus gyroscopic feedforward; advances the integral by ``e dt``."""
    xbar = np.asarray(xbar, dtype=float)
    u = K_x @ xbar + alloc.Q_rot_pinv @ gyro_torque(inert, omega)
    if dt > 0:
        state.e_I_alpha = np.clip(state.e_I_alpha + xbar[list(ANGLE_ROWS)] * dt,
                                  -i_limit, i_limit)
    return u


# --------------------------------------------------------------------- position


@dataclass(frozen=True)
class PositionCommand:
    f_des: NDArray[np.float64]
    alpha_des: NDArray[np.float64]
    f_T: float
    u_pos: NDArray[np.float64]


def desired_tilt(f_des, yaw_des: float) -> tuple[float, float]:
    """Roll and pitch that align the thrust axis with ``f_des`` at yaw ``yaw_des``."""
    f = rot_z(yaw_des).T @ np.asarray(f_des, dtype=float)
    return (math.atan2(-f[1], math.hypot(f[0], f[2])), math.atan2(f[0], f[2]))


def position_step(state: ControlState, r, v, r_des, v_des, a_des, R, omega,
                  yaw_des: float, alloc: AllocationSet, inert: InertiaModel,
                  gains: PositionGains, spec: RobotSpec, dt: float = 0.0,
                  gravity_feedforward: bool = True) -> PositionCommand:
    m, g = spec.mass, spec.gravity
    e = np.asarray(r_des, float) - np.asarray(r, float)
    de = np.asarray(v_des, float) - np.asarray(v, float)
    phi = -R @ alloc.Q_tran @ alloc.Q_rot_pinv @ gyro_torque(inert, omega)
    f_des = m * (gains.K_P @ e + gains.K_I @ state.e_I_r + gains.K_D @ de
                 + np.asarray(a_des, float)) + phi
    if gravity_feedforward:
        f_des = f_des + np.array([0.0, 0.0, m * g])
    if np.linalg.norm(f_des) < 1e-6:
        raise DegenerateForce("desired force vanishes")
    roll, pitch = desired_tilt(f_des, yaw_des)
    f_T = float(R[:, 2] @ f_des)
    u_pos = alloc.u_s / (m * g) * f_T
    if dt > 0:
        state.e_I_r = np.clip(state.e_I_r + (de + gains.c * e) * dt,
                              -gains.i_limit_r, gains.i_limit_r)
    alpha_des = np.array([roll, pitch, yaw_des])
    state.alpha_des = alpha_des
    return PositionCommand(f_des, alpha_des, f_T, u_pos)


@dataclass(frozen=True)
class ControlOutput:
    u_des: NDArray[np.float64]
    f_des: NDArray[np.float64]
    alpha_des: NDArray[np.float64]
    f_T: float
    saturated: NDArray[np.bool_]


def aggregate(u_att, u_pos, u_max: float) -> tuple[NDArray[np.float64], NDArray[np.bool_]]:
    u = np.asarray(u_att, float) + np.asarray(u_pos, float)
    sat = (u < 0.0) | (u > u_max)
    return np.clip(u, 0.0, u_max), sat


# --------------------------------------------------------------- gain checking


@dataclass(frozen=True)
class GainCheck:
    """Slack of every stability constraint (positive means satisfied)."""

    kp_margin: float
    kp_ratio_margin: float
    c_bound: float
    c_margin: float
    w1_min_eig: float
    w2_min_eig: float
    w12_norm: float
    coupling_lhs: float
    coupling_rhs: float

    @property
    def coupling_margin(self) -> float:
        return self.coupling_lhs - self.coupling_rhs

    @property
    def satisfied(self) -> bool:
        return (self.kp_margin > 0 and self.c_margin > 0 and self.w1_min_eig > 0
                and self.coupling_margin > 0)

    def as_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["coupling_margin"] = self.coupling_margin
        d["satisfied"] = self.satisfied
        return d


def c_upper_bound(pos: PositionGains, gamma: float) -> float:
    kp, kd = np.diag(pos.K_P), np.diag(pos.K_D)
    a = kp.min() - gamma * kp.max()
    b = kd.min() - gamma * kd.max()
    first = 4 * a * b / (kd.max() ** 2 * (1 + gamma) ** 2 + 4 * a)
    return float(min(first, b, math.sqrt(kp.min())))


def gain_check(pos: PositionGains, lqi: LqiResult, alloc: AllocationSet,
               gamma: float, O: float, e_r_max: float, m: float) -> GainCheck:
    if not 0 < gamma <= 1 or not O > 0 or not e_r_max > 0:
        raise ValueError("need 0 < gamma <= 1, O > 0 and e_r_max > 0")
    kp, kd = np.diag(pos.K_P), np.diag(pos.K_D)
    c = pos.c
    W1 = 0.5 * np.array([
        [c * (kp.min() - gamma * kp.max()), -c * kd.max() * (1 + gamma) / 2],
        [-c * kd.max() * (1 + gamma) / 2, -c + kd.min() - gamma * kd.max()],
    ])
    sigma = float(np.linalg.norm(alloc.Q_tran @ lqi.K_x, 2))
    W12 = np.array([c * (sigma + O) / m, (sigma + O) / m + kp.max() * e_r_max])
    W2 = -(lqi.Abar + lqi.Bbar @ lqi.K_x)
    w1 = float(np.linalg.eigvalsh(W1).min())
    w2 = float(np.linalg.eigvalsh(0.5 * (W2 + W2.T)).min())
    w12 = float(np.linalg.norm(W12))
    bound = c_upper_bound(pos, gamma)
    return GainCheck(
        kp_margin=float(kp.min() - gamma * kp.max()),
        kp_ratio_margin=float(kp.min() / kp.max() - gamma),
        c_bound=bound, c_margin=bound - c,
        w1_min_eig=w1, w2_min_eig=w2, w12_norm=w12,
        coupling_lhs=w1 * w2, coupling_rhs=w12 ** 2 / 4,
    )


# ------------------------------------------------------------------ controller


@dataclass(frozen=True)
class Reference:
    r: NDArray[np.float64]
    v: NDArray[np.float64]
    a: NDArray[np.float64]
    yaw: float = 0.0
    yaw_rate: float = 0.0


class Controller:
    """Stateful cascaded controller with gain scheduling over joint angles."""

    def __init__(self, spec: RobotSpec, config: ControllerConfig | None = None):
        self.spec = spec
        self.config = config or ControllerConfig()
        self.state = ControlState()
        self._q_synth = None
        self.alloc = None
        self.inertia = None
        self.lqi = None
        self.velocity_mode = False

    def schedule(self, q) -> None:
        q = np.asarray(q, dtype=float)
        if self._q_synth is not None and np.linalg.norm(q - self._q_synth) <= self.config.resynth_dq:
            return
        alloc = allocation(self.spec, q)
        inert = inertia(self.spec, q, alloc)
        self.lqi = lqi_synthesize(alloc, inert, self.config.attitude)
        self.alloc, self.inertia, self._q_synth = alloc, inert, q.copy()

    def step(self, r, v, R, omega, q, ref: Reference, dt: float) -> ControlOutput:
        self.schedule(q)
        gains = self.config.position
        if self.velocity_mode:
            gains = PositionGains(np.zeros((3, 3)), gains.K_I, gains.K_D, gains.c,
                                  gains.i_limit_r, gains.i_limit_alpha)
        cmd = position_step(self.state, r, v, ref.r, ref.v, ref.a, R, omega, ref.yaw,
                            self.alloc, self.inertia, gains, self.spec, dt,
                            self.config.gravity_feedforward)
        alpha = euler_zyx(R)
        e_x = attitude_error(cmd.alpha_des, alpha, [0.0, 0.0, ref.yaw_rate], omega)
        xbar = np.concatenate([e_x, self.state.e_I_alpha])
        u_att = attitude_step(self.state, xbar, omega, self.inertia, self.alloc,
                              self.lqi.K_x, dt, gains.i_limit_alpha)
        u, sat = aggregate(u_att, cmd.u_pos, self.spec.u_max)
        return ControlOutput(u, cmd.f_des, cmd.alpha_des, cmd.f_T, sat)
