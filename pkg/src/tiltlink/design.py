"""Tilt-angle design quantities and the valid joint range."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from tiltlink.errors import DegenerateConvex, RankDeficient, SingularForm
from tiltlink.model import AllocationSet, RobotSpec, allocation, hover_direction

DEFAULT_BETA_GRID = np.round(np.arange(0.0, 0.8 + 1e-12, 0.005), 10)
DEFAULT_WEIGHTS = (1.0, 1.0, 4.0, 1.0)
NOMINAL_Q = (math.pi / 2, math.pi / 2)


@dataclass(frozen=True)
class HoverThrust:
    u_s: NDArray[np.float64]
    u_s_min: float
    u_s_max: float


@dataclass(frozen=True)
class TorqueEnvelope:
    tau_z_min: float
    tau_z_max: float
    f_xy_norm: float
    l_air: float


@dataclass(frozen=True)
class TorqueConvex:
    """Zonotope of achievable torques.

    ``face_distances`` maps an ordered pair ``(i, j)`` to the support value
    along ``v_i x v_j / |v_i x v_j|``; both orientations of each face normal
    are present, so the minimum is the inscribed-sphere radius.
    """

    generators: NDArray[np.float64]
    tau_min: float
    face_distances: dict


def hovering_thrust(alloc: AllocationSet, spec: RobotSpec) -> HoverThrust:
    u_dir = hover_direction(alloc.Q_tran_C, alloc.Q_rot_C)
    u_s = spec.weight / np.linalg.norm(alloc.Q_tran_C @ u_dir) * u_dir
    return HoverThrust(u_s, float(u_s.min()), float(u_s.max()))


def tau_z_extremes(alloc: AllocationSet, u_max: float) -> tuple[float, float]:
    """Closed-form solution of the box LP over the yaw row of ``Q_rot_C``."""
    if not u_max > 0:
        raise ValueError("u_max must be positive")
    c = alloc.Q_rot_C[2]
    return float(np.minimum(0.0, c).sum() * u_max), float(np.maximum(0.0, c).sum() * u_max)


def horizontal_force_norm(alloc: AllocationSet, tau_des) -> float:
    """Norm of the lateral force produced by the min-norm thrust for ``tau_des``."""
    Qt_xy = alloc.Q_tran_C[:2]
    if not np.any(Qt_xy):
        return 0.0
    Qr = alloc.Q_rot_C
    s = np.linalg.svd(Qr, compute_uv=False)
    if s[-1] <= 1e-12 * max(s[0], 1.0):
        raise RankDeficient("rotational allocation has rank below 3")
    return float(np.linalg.norm(Qt_xy @ np.linalg.pinv(Qr) @ np.asarray(tau_des, float)))


def aero_interference(spec: RobotSpec, beta: float) -> float:
    if not 0.0 <= beta < math.pi / 2:
        raise ValueError("beta must lie in [0, pi/2)")
    return spec.prop_diameter / math.cos(beta)


def torque_convex(alloc: AllocationSet, u_max: float) -> TorqueConvex:
    if not u_max > 0:
        raise ValueError("u_max must be positive")
    V = alloc.Q_rot_C.T
    dist = {}
    for i, j in itertools.permutations(range(V.shape[0]), 2):
        n = np.cross(V[i], V[j])
        nn = np.linalg.norm(n)
        if nn <= 1e-9:
            continue
        n = n / nn
        dist[(i, j)] = float(np.maximum(0.0, V @ n).sum() * u_max)
    if not dist:
        raise DegenerateConvex("all torque generators are parallel")
    return TorqueConvex(V.copy(), min(dist.values()), dist)


def envelope(spec: RobotSpec, q, tau_des=(1.0, 1.0, 1.0)) -> tuple[HoverThrust, TorqueEnvelope]:
    alloc = allocation(spec, q)
    hov = hovering_thrust(alloc, spec)
    tz = tau_z_extremes(alloc, spec.u_max)
    env = TorqueEnvelope(tz[0], tz[1], horizontal_force_norm(alloc, tau_des),
                         aero_interference(spec, spec.tilt_angle))
    return hov, env


def design_vector(spec: RobotSpec, beta: float, q=NOMINAL_Q) -> NDArray[np.float64]:
    """x(beta) = [-(u_max+u_min), tau_z span, -|f_xy|, -l_air]."""
    hov, env = envelope(spec.with_tilt(beta), q)
    return np.array([
        -(hov.u_s_max + hov.u_s_min),
        env.tau_z_max - env.tau_z_min,
        -env.f_xy_norm,
        -env.l_air,
    ])


@dataclass(frozen=True)
class TiltOptimum:
    beta_opt: float
    betas: NDArray[np.float64]
    x: NDArray[np.float64]
    objective: NDArray[np.float64]


def optimize_tilt(spec: RobotSpec, weights=DEFAULT_WEIGHTS, beta_grid=None,
                  normalize: bool = True) -> TiltOptimum:
    """Grid maximization of ``w . x(beta)`` at the nominal form.

    With ``normalize`` each component of x is divided by its range over the
    grid before weighting. Ties resolve to the first grid index.
    """
    betas = np.asarray(DEFAULT_BETA_GRID if beta_grid is None else beta_grid, dtype=float)
    if betas.size == 0:
        raise ValueError("beta grid is empty")
    X = np.array([design_vector(spec, b) for b in betas])
    Xn = X
    if normalize:
        span = X.max(axis=0) - X.min(axis=0)
        span[span == 0] = 1.0
        Xn = X / span
    obj = Xn @ np.asarray(weights, dtype=float)
    return TiltOptimum(float(betas[int(np.argmax(obj))]), betas, X, obj)


DEFAULT_U_THRE = 0.5
DEFAULT_TAU_THRE = 0.05


def form_margins(spec: RobotSpec, q) -> tuple[float, float, float]:
    """(u_s_min, u_s_max, tau_min) at ``q``; raises SingularForm."""
    alloc = allocation(spec, q)
    return float(alloc.u_s.min()), float(alloc.u_s.max()), torque_convex(alloc, spec.u_max).tau_min


def is_valid_form(spec: RobotSpec, q, u_thre=DEFAULT_U_THRE, tau_thre=DEFAULT_TAU_THRE) -> bool:
    if u_thre < 0 or tau_thre < 0:
        raise ValueError("thresholds must be nonnegative")
    try:
        lo, hi, tmin = form_margins(spec, q)
    except (SingularForm, DegenerateConvex):
        return False
    return lo >= u_thre and hi <= spec.u_max - u_thre and tmin >= tau_thre


def valid_joint_range(spec: RobotSpec, q_grid, u_thre=DEFAULT_U_THRE,
                      tau_thre=DEFAULT_TAU_THRE) -> NDArray[np.bool_]:
    """Membership of each ``(q1, q2)`` row of ``q_grid`` in the valid range."""
    qs = np.asarray(q_grid, dtype=float).reshape(-1, 2)
    return np.array([is_valid_form(spec, q, u_thre, tau_thre) for q in qs], dtype=bool)
