import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import solve_continuous_are

from tiltlink.errors import NotStabilizable
from tiltlink.riccati import are_residual, solve_lqr, spectral_abscissa, stabilizing_seed


def test_double_integrator_analytic_gain():
    A = np.array([[0.0, 1.0], [0.0, 0.0]])
    B = np.array([[0.0], [1.0]])
    sol = solve_lqr(A, B, np.eye(2), np.eye(1))
    assert np.allclose(sol.K, [[1.0, math.sqrt(3.0)]], atol=1e-6)
    assert sol.residual < 1e-8


def test_scalar_unstable_plant():
    # a = 1, b = 1, q = 1, r = 1: p = 1 + sqrt(2)
    sol = solve_lqr([[1.0]], [[1.0]], [[1.0]], [[1.0]])
    assert sol.P[0, 0] == pytest.approx(1 + math.sqrt(2), abs=1e-9)


def test_uncontrollable_unstable_mode():
    A = np.diag([1.0, -1.0])
    B = np.array([[0.0], [1.0]])
    with pytest.raises(NotStabilizable):
        solve_lqr(A, B, np.eye(2), np.eye(1))


@given(st.integers(0, 10_000))
def test_matches_scipy_are(seed):
    rng = np.random.default_rng(seed)
    n, m = 4, 2
    A = rng.normal(size=(n, n))
    B = rng.normal(size=(n, m))
    Q = np.diag(rng.uniform(0.1, 5, n))
    R = np.diag(rng.uniform(0.1, 5, m))
    sol = solve_lqr(A, B, Q, R)
    P_ref = solve_continuous_are(A, B, Q, R)
    assert np.allclose(sol.P, P_ref, rtol=1e-6, atol=1e-8)
    assert are_residual(A, B, Q, R, sol.P) < 1e-8 * max(1.0, np.linalg.norm(P_ref))
    assert spectral_abscissa(A - B @ sol.K) < 0


@given(st.integers(0, 10_000))
def test_seed_is_stabilizing(seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(5, 5))
    B = rng.normal(size=(5, 2))
    assert spectral_abscissa(A - B @ stabilizing_seed(A, B)) < 0
