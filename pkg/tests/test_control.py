import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from opioid_residence.control import (
    REPORTED_GAIN,
    bang_bang_policy,
    care_residual,
    feedback_gain,
    linear_policy,
    solve_care,
    solve_lyapunov,
)
from opioid_residence.exceptions import ComputationError, ValidationError
from opioid_residence.model import eigenvalues_3x3, linearize
from opioid_residence.sde import ActuationMatrix

BT = ActuationMatrix(0.01, 0.001)


@pytest.fixture
def A(params):
    return linearize(params).A


def test_solution_invariants(A):
    sol = solve_care(A, BT, 1e-3)
    P = sol.P
    assert np.linalg.norm(P - P.T) <= 1e-12 * np.linalg.norm(P)
    assert np.all(np.linalg.eigvalsh(P) > 0)
    assert sol.residual <= 1e-9 * max(1.0, np.linalg.norm(P) ** 2 / 1e-3)
    assert sol.residual == pytest.approx(care_residual(A, BT.matrix, P, np.eye(3), 1e-3 * np.eye(2)))
    np.testing.assert_allclose(sol.K, -(BT.matrix.T @ P) / 1e-3, rtol=1e-14)
    assert np.max(sol.closed_loop_eigenvalues().real) < 0
    assert np.max(eigenvalues_3x3(A + BT.matrix @ sol.K).real) < 0


def test_matches_independent_riccati_solver(A):
    sol = solve_care(A, BT, 1e-3)
    ref = sla.solve_continuous_are(A, BT.matrix, np.eye(3), 1e-3 * np.eye(2))
    np.testing.assert_allclose(sol.P, ref, rtol=1e-9, atol=1e-12)


def test_large_penalty_tends_to_lyapunov(A):
    sol = solve_care(A, BT, 1e9)
    ref = sla.solve_continuous_lyapunov(A.T, -np.eye(3))
    assert np.linalg.norm(sol.P - ref) <= 1e-5 * np.linalg.norm(ref)


def test_lyapunov_solver_against_scipy(rng):
    for _ in range(20):
        M = rng.normal(size=(4, 4)) - 3 * np.eye(4)
        Q = rng.normal(size=(4, 4))
        Q = Q @ Q.T
        X = solve_lyapunov(M, Q)
        np.testing.assert_allclose(X, sla.solve_continuous_lyapunov(M.T, -Q), rtol=1e-10, atol=1e-12)


def test_scalar_closed_form():
    sol = solve_care(np.array([[-1.0]]), np.array([[1.0]]), 1.0)
    assert sol.P[0, 0] == pytest.approx(np.sqrt(2) - 1, abs=1e-12)
    a, b, g = 2.0, 3.0, 0.5
    sol = solve_care(np.array([[-a]]), np.array([[b]]), g)
    assert sol.P[0, 0] == pytest.approx(g * (-a + np.sqrt(a * a + b * b / g)) / b**2, rel=1e-12)


def test_gain_shrinks_as_control_gets_expensive(A):
    norms = [np.linalg.norm(solve_care(A, BT, g).K) for g in np.logspace(-5, 2, 15)]
    assert np.all(np.diff(norms) <= 0)


def test_newton_iterates_stay_symmetric(A):
    for it in (1, 2, 3):
        with pytest.raises(ComputationError):
            solve_care(A, BT, 1e-3, max_iter=it, tol=0.0)
    sol = solve_care(A, BT, 1e-3)
    assert np.array_equal(sol.P, sol.P.T)


def test_errors(A):
    with pytest.raises(ValidationError, match="gamma_tilde"):
        solve_care(A, BT, 0.0)
    with pytest.raises(ComputationError, match="stabilizing"):
        solve_care(-A, BT, 1e-3)
    with pytest.raises(ComputationError, match="converge"):
        solve_care(A, BT, 1e-3, max_iter=1, tol=0.0)
    with pytest.raises(ValidationError):
        solve_care(np.eye(2), BT, 1e-3)


def test_unstable_plant_with_stabilizing_start():
    A = np.array([[1.0, 1.0], [0.0, 2.0]])
    B = np.eye(2)
    sol = solve_care(A, B, 1.0, K0=-5 * np.eye(2))
    ref = sla.solve_continuous_are(A, B, np.eye(2), np.eye(2))
    np.testing.assert_allclose(sol.P, ref, rtol=1e-9)


# --- gains and policies ------------------------------------------------------------

def test_feedback_gain_identity():
    K = feedback_gain(np.eye(3), ActuationMatrix(1, 1), 1.0)
    np.testing.assert_array_equal(K, [[-1, 0, 0], [0, 0, -1]])
    np.testing.assert_array_equal(feedback_gain(np.eye(3), ActuationMatrix(0, 0), 1.0), np.zeros((2, 3)))


def test_feedback_gain_rows(rng):
    M = rng.normal(size=(3, 3))
    P = M @ M.T
    K = feedback_gain(P, ActuationMatrix(0.3, 0.7), 0.2)
    np.testing.assert_allclose(K[0], -(0.3 / 0.2) * P[0], rtol=1e-15)
    np.testing.assert_allclose(K[1], -(0.7 / 0.2) * P[2], rtol=1e-15)


def test_reported_gain_implies_symmetric_P():
    p13 = -REPORTED_GAIN[0, 2] * 1e-3 / 0.01
    p31 = -REPORTED_GAIN[1, 0] * 1e-3 / 0.001
    assert abs(abs(p13) - abs(p31)) <= 2e-4


def test_reported_gain_matches_lyapunov_reconstruction(params):
    """REPORTED_GAIN equals -(1/gamma) Bt^T P_L with gamma = 0.01, where P_L
    solves A^T P + P A + I = 0 for the Jacobian with the opposite sign on the
    beta term of entry (1, 2). Explains why it differs from the Riccati gain."""
    A = linearize(params).A.copy()
    A[0, 1] += 2 * params.beta * 3.007288 / 3.157288
    P_L = sla.solve_continuous_lyapunov(A.T, -np.eye(3))
    K = feedback_gain(P_L, BT, 0.01)
    np.testing.assert_allclose(K, REPORTED_GAIN, atol=6e-4)


def test_linear_policy():
    pol = linear_policy(REPORTED_GAIN)
    np.testing.assert_allclose(pol(np.array([1.0, 0, 0])), [-0.1584, 0.0142], atol=1e-15)
    c = np.array([0.9, 0.05, 0.02])
    assert np.all(linear_policy(REPORTED_GAIN, center=c)(c) == 0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6))
def test_linear_policy_is_affine(v):
    x, y = np.array(v[:3]), np.array(v[3:])
    pol = linear_policy(REPORTED_GAIN, center=[0.2, 0.1, 0.3])
    r = pol(x + y) - pol(x) - pol(y) + pol(np.zeros(3))
    np.testing.assert_allclose(r, 0, atol=1e-12)


def test_bang_bang_single_channel():
    pol = bang_bang_policy(lambda x: np.array([1.0, 0.0, 0.0]), BT, umax=2.0)
    np.testing.assert_array_equal(pol(np.zeros(3)), [2.0, 0.0])


def test_bang_bang_is_grid_argmax(rng):
    B = ActuationMatrix(0.4, 1.3)
    grid = np.linspace(-1, 1, 41)
    U = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(-1, 2)
    cell = grid[1] - grid[0]
    for _ in range(100):
        g = rng.normal(size=3)
        pol = bang_bang_policy(lambda x, g=g: g, B, umax=1.0)
        u = pol(np.zeros(3))
        best = U[np.argmax((U @ B.matrix.T) @ g)]
        assert np.all(np.abs(u - best) <= cell)
        assert (B.matrix @ u) @ g >= (B.matrix @ best) @ g - 1e-12


def test_bang_bang_scaling():
    g = lambda x: np.array([x[0], -1.0, -x[2]])  # noqa: E731
    p1 = bang_bang_policy(g, BT, umax=1.0)
    p2 = bang_bang_policy(g, BT, umax=2.0)
    for x in ([0.3, 0, 0.2], [-0.1, 0, 0.0], [0.0, 1, -3.0]):
        np.testing.assert_array_equal(p2(np.array(x)), 2 * p1(np.array(x)))
    np.testing.assert_array_equal(p1(np.array([0.0, 0, 0])), [0, 0])
    with pytest.raises(ValidationError):
        bang_bang_policy(g, BT, umax=0)
