"""Linear-quadratic feedback synthesis and control-box policies.

The continuous algebraic Riccati equation

    A^T P + P A + Q - P Bt R^{-1} Bt^T P = 0,   Q = I, R = gamma_tilde I

is solved by Newton-Kleinman iteration, each step a Lyapunov equation
solved exactly by Kronecker vectorization (a 9x9 system in 3-D).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ComputationError, ValidationError
from .model import PopulationState, eigenvalues_3x3
from .sde import ActuationMatrix, Policy

__all__ = [
    "RiccatiSolution",
    "REPORTED_GAIN",
    "solve_lyapunov",
    "solve_care",
    "care_residual",
    "feedback_gain",
    "linear_policy",
    "bang_bang_policy",
]

#: Gain matrix reported for the default regime (b1=0.01, b2=0.001, gamma_tilde=0.001).
REPORTED_GAIN = np.array(
    [
        [-0.1584, 0.1492, 0.1422],
        [0.0142, -2.1721, -1.9964],
    ]
)


def _bt(bt):
    if isinstance(bt, ActuationMatrix):
        return bt.matrix
    return np.atleast_2d(np.asarray(bt, dtype=float))


def _eigvals(M):
    if M.shape == (3, 3):
        return eigenvalues_3x3(M)
    return np.linalg.eigvals(M)


@dataclass(frozen=True)
class RiccatiSolution:
    """Stabilizing solution of the Riccati equation and its feedback gain."""

    P: np.ndarray
    gamma_tilde: float
    K: np.ndarray
    residual: float
    iterations: int
    A: np.ndarray
    Bt: np.ndarray

    @property
    def closed_loop(self):
        return self.A + self.Bt @ self.K

    def closed_loop_eigenvalues(self):
        return _eigvals(self.closed_loop)

    def residual_scale(self):
        return max(1.0, np.linalg.norm(self.P, "fro") ** 2 / self.gamma_tilde)


def solve_lyapunov(A, Q):
    """Solve ``A^T X + X A + Q = 0`` by Kronecker vectorization.

    Uses column-major ``vec``: ``vec(A^T X) = (I kron A^T) vec X`` and
    ``vec(X A) = (A^T kron I) vec X``. The result is symmetrized when ``Q``
    is symmetric.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]
    eye = np.eye(n)
    L = np.kron(eye, A.T) + np.kron(A.T, eye)
    try:
        x = np.linalg.solve(L, -Q.reshape(-1, order="F"))
    except np.linalg.LinAlgError:
        raise ComputationError("Lyapunov operator is singular (A has eigenvalues summing to zero)") from None
    X = x.reshape(n, n, order="F")
    if np.allclose(Q, Q.T, rtol=0, atol=0):
        X = 0.5 * (X + X.T)
    return X


def care_residual(A, Bt, P, Q, R):
    """Frobenius norm of ``A^T P + P A + Q - P Bt R^-1 Bt^T P``."""
    G = Bt @ np.linalg.solve(R, Bt.T)
    return float(np.linalg.norm(A.T @ P + P @ A + Q - P @ G @ P, "fro"))


def feedback_gain(P, bt, gamma_tilde, R=None):
    """``K = -R^{-1} Bt^T P`` (``R = gamma_tilde I`` by default).

    With the default actuation structure row 1 is ``-(b1/gamma_tilde) P[0]``
    and row 2 is ``-(b2/gamma_tilde) P[2]``.
    """
    B = _bt(bt)
    P = np.asarray(P, dtype=float)
    if R is None:
        return -(B.T @ P) / gamma_tilde
    return -np.linalg.solve(np.asarray(R, dtype=float), B.T @ P)


def solve_care(A, bt, gamma_tilde, Q=None, R=None, K0=None, tol=1e-13, max_iter=100, accept=1e-9) -> RiccatiSolution:
    """Stabilizing solution of the continuous algebraic Riccati equation.

    Parameters
    ----------
    A : (n, n) array
    bt : ActuationMatrix or (n, m) array
    gamma_tilde : float
        Control penalty; ``R = gamma_tilde * I`` unless ``R`` is given.
    Q, R : arrays, optional
        State and control weights (defaults ``I`` and ``gamma_tilde I``).
    K0 : (m, n) array, optional
        Initial stabilizing gain. Zero by default, which requires ``A``
        itself to be Hurwitz.
    tol : float
        Absolute residual at which iteration stops; iteration also stops
        once the residual no longer halves (round-off floor).
    max_iter : int
    accept : float
        Final residual must be below ``accept * max(1, ||P||_F^2 ||R^-1||)``.

    Raises
    ------
    ComputationError
        On non-convergence, loss of definiteness, or a non-stabilizing start.
    """
    A = np.asarray(A, dtype=float)
    B = _bt(bt)
    n, m = B.shape
    if A.shape != (n, n):
        raise ValidationError(f"A has shape {A.shape}, expected {(n, n)}")
    if not gamma_tilde > 0:
        raise ValidationError(f"gamma_tilde: must be > 0, got {gamma_tilde}")
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    R = gamma_tilde * np.eye(m) if R is None else np.asarray(R, dtype=float)
    Rinv = np.linalg.inv(R)
    r_scale = np.linalg.norm(Rinv, 2)

    K = np.zeros((m, n)) if K0 is None else np.asarray(K0, dtype=float)
    if np.max(_eigvals(A + B @ K).real) >= 0:
        raise ComputationError("initial gain is not stabilizing; supply K0 with A + Bt K0 Hurwitz")

    history = []
    P = None
    for it in range(1, max_iter + 1):
        Acl = A + B @ K
        P = solve_lyapunov(Acl, Q + K.T @ R @ K)
        P = 0.5 * (P + P.T)
        K = -Rinv @ B.T @ P
        if not np.all(np.isfinite(P)):
            raise ComputationError(f"Newton-Kleinman diverged at iteration {it}")
        res = care_residual(A, B, P, Q, R)
        history.append(res)
        if res <= tol:
            break
        # quadratic convergence has bottomed out at round-off
        if it > 2 and res >= 0.5 * history[-2]:
            break
    else:
        raise ComputationError(
            f"Newton-Kleinman did not converge in {max_iter} iterations (last residual {history[-1]:.3e})"
        )
    scale = max(1.0, np.linalg.norm(P, "fro") ** 2 * r_scale)
    if history[-1] > accept * scale:
        raise ComputationError(
            f"Newton-Kleinman stalled with residual {history[-1]:.3e} (> {accept:g} x scale {scale:.3e})"
        )

    sym_err = np.linalg.norm(P - P.T, "fro")
    if sym_err > 1e-12 * np.linalg.norm(P, "fro"):
        raise ComputationError("Riccati solution lost symmetry")
    if np.min(np.linalg.eigvalsh(P)) <= 0:
        raise ComputationError("Riccati solution is not positive definite (ill-posed weights?)")
    return RiccatiSolution(P=P, gamma_tilde=float(gamma_tilde), K=K, residual=history[-1], iterations=it, A=A, Bt=B)


def linear_policy(K, center=None, umax=None) -> Policy:
    """``u(x) = K (x - center)``; ``center`` defaults to the origin.

    With the default the control acts on absolute fractions. Passing the
    equilibrium makes it act on deviations instead, which on the closed
    simplex pushes ``x3`` below zero as soon as ``x1`` dips.
    """
    K = np.asarray(K, dtype=float)
    if isinstance(center, PopulationState):
        center = center.as_array()
    c = np.zeros(K.shape[1]) if center is None else np.asarray(center, dtype=float)

    def u(x):
        return (x - c) @ K.T

    return Policy(u, umax=umax, name="linear", linear=(K, c))


def bang_bang_policy(grad_psi, bt, umax=1.0) -> Policy:
    """Maximizer of ``<Bt u, grad_psi(x)>`` over the box ``[-umax, umax]^m``.

    ``u_j = umax * sign((Bt^T grad_psi(x))_j)``, zero on exact ties. The
    Hamiltonian is linear in ``u``, so the maximizer sits on the box corners.
    """
    if not umax > 0:
        raise ValidationError(f"umax: must be > 0, got {umax}")
    B = _bt(bt)

    def u(x):
        g = np.asarray(grad_psi(x), dtype=float)
        return umax * np.sign(g @ B)

    return Policy(u, umax=umax, name="bang-bang")
