"""Continuous-time algebraic Riccati equation via Newton-Kleinman iteration."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import solve_continuous_lyapunov
from scipy.signal import place_poles

from tiltlink.errors import NotStabilizable

NK_TOL = 1e-10
NK_MAX_ITER = 200


@dataclass(frozen=True)
class LqrSolution:
    """``u = -K x`` minimizes the quadratic cost; ``P`` solves the ARE."""

    K: NDArray[np.float64]
    P: NDArray[np.float64]
    iterations: int
    residual: float


def are_residual(A, B, Q, R, P) -> float:
    Rinv_BT = np.linalg.solve(R, B.T)
    res = A.T @ P + P @ A - P @ B @ Rinv_BT @ P + Q
    return float(np.linalg.norm(res, "fro"))


def spectral_abscissa(A) -> float:
    return float(np.max(np.linalg.eigvals(A).real))


def stabilizing_seed(A, B) -> NDArray[np.float64]:
    """A gain ``K0`` with ``A - B K0`` Hurwitz, by pole placement.

    Falls back to the Bass construction when pole placement cannot reach the
    requested spectrum (e.g. repeated modes exceeding the input rank).
    """
    n = A.shape[0]
    if spectral_abscissa(A) < 0:
        return np.zeros((B.shape[1], n))
    scale = max(1.0, float(np.max(np.abs(np.linalg.eigvals(A)))))
    poles = -scale * (1.0 + 0.25 * np.arange(n))
    try:
        K0 = place_poles(A, B, poles).gain_matrix
        if spectral_abscissa(A - B @ K0) < 0:
            return K0
    except (ValueError, np.linalg.LinAlgError):
        pass
    sigma = 1.0 + np.linalg.norm(A, 2)
    As = A + sigma * np.eye(n)
    Z = solve_continuous_lyapunov(As, 2.0 * B @ B.T)
    try:
        K0 = B.T @ np.linalg.inv(Z)
    except np.linalg.LinAlgError as exc:
        raise NotStabilizable("no stabilizing seed gain exists") from exc
    if not spectral_abscissa(A - B @ K0) < 0:
        raise NotStabilizable("no stabilizing seed gain exists")
    return K0


def solve_lqr(A, B, Q, R, tol: float = NK_TOL, max_iter: int = NK_MAX_ITER) -> LqrSolution:
    """Stabilizing solution of ``A'P + PA - P B R^-1 B' P + Q = 0``."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    K = stabilizing_seed(A, B)
    P = np.zeros_like(A)
    for it in range(1, max_iter + 1):
        Ak = A - B @ K
        P_new = solve_continuous_lyapunov(Ak.T, -(Q + K.T @ R @ K))
        P_new = 0.5 * (P_new + P_new.T)
        K_new = np.linalg.solve(R, B.T @ P_new)
        if not np.all(np.isfinite(K_new)):
            break
        dP = np.linalg.norm(P_new - P, "fro") / max(1.0, np.linalg.norm(P_new, "fro"))
        P, K = P_new, K_new
        if dP < tol:
            if spectral_abscissa(A - B @ K) >= 0:
                break
            return LqrSolution(K, P, it, are_residual(A, B, Q, R, P))
    raise NotStabilizable("Newton-Kleinman iteration did not converge")
