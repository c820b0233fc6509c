"""Deterministic prescription-opioid compartmental model.

State coordinates are the population fractions ``x1`` (susceptible),
``x2`` (addicted) and ``x3`` (in treatment / recovered). The fraction of
prescription users is never stored; it is always ``z = 1 - x1 - x2 - x3``.

All functions accept either a :class:`PopulationState` or any array whose
last axis has length 3, so the same code evaluates single states and whole
ensembles.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import asdict, dataclass, fields, replace

import numpy as np

from .exceptions import ValidationError

__all__ = [
    "EpidemicParams",
    "PopulationState",
    "LinearModel",
    "drift",
    "addiction_free_equilibrium",
    "jacobian",
    "linearize",
    "eigenvalues_3x3",
    "reproduction_number",
    "infection_block",
]


@dataclass(frozen=True)
class EpidemicParams:
    """Rates of the compartmental model.

    Defaults are the literature values with the return rate fixed at 3 and the
    treatment entry rate at 0.25, in the addiction-free regime
    (``gamma = xi = 0``). Use :meth:`literature` for the full table including
    the nonzero ``gamma`` and ``xi``.

    Parameters
    ----------
    alpha : float
        Prescription rate.
    beta : float
        Probability of addiction other than by prescription, in [0, 1].
    xi : float
        Fraction of ``beta`` due to leftover prescriptions, in [0, 1].
    varepsilon : float
        Rate of return to the susceptible group after a prescription ends.
    delta : float
        Rate of return to susceptible after finishing treatment.
    mu : float
        Natural death rate.
    mu_star : float
        Death rate of addicts (``mu`` plus overdose); must be >= ``mu``.
    gamma : float
        Rate at which prescribed users become addicted.
    zeta : float
        Rate of treatment entry.
    nu : float
        Relapse rate.
    sigma : float
        Treatment dropout rate.
    """

    alpha: float = 0.15
    beta: float = 0.0036
    xi: float = 0.0
    varepsilon: float = 3.0
    delta: float = 0.1
    mu: float = 0.007288
    mu_star: float = 0.01155
    gamma: float = 0.0
    zeta: float = 0.25
    nu: float = 0.2
    sigma: float = 0.7

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float, np.floating, np.integer)):
                raise ValidationError(f"{f.name}: expected a number, got {value!r}")
            if not math.isfinite(value):
                raise ValidationError(f"{f.name}: must be finite, got {value}")
            if value < 0:
                raise ValidationError(f"{f.name}: must be >= 0, got {value}")
        for name in ("beta", "xi"):
            if getattr(self, name) > 1:
                raise ValidationError(f"{name}: must lie in [0, 1], got {getattr(self, name)}")
        if self.mu_star < self.mu:
            raise ValidationError(
                f"mu_star: must be >= mu ({self.mu}), got {self.mu_star}"
            )

    @classmethod
    def literature(cls, varepsilon=3.0, zeta=0.25):
        """Literature table values, including the addiction-present rates."""
        return cls(xi=0.74, gamma=0.00744, varepsilon=varepsilon, zeta=zeta)

    @classmethod
    def zero(cls):
        """All rates zero; the drift vanishes identically."""
        return cls(**{f.name: 0.0 for f in fields(cls)})

    def replace(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class PopulationState:
    """Compartment fractions ``(x1, x2, x3)``; ``z`` is derived."""

    x1: float
    x2: float
    x3: float

    @property
    def z(self):
        return 1.0 - self.x1 - self.x2 - self.x3

    def as_array(self):
        return np.array([self.x1, self.x2, self.x3], dtype=float)

    @classmethod
    def from_array(cls, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (3,):
            raise ValidationError(f"state must have shape (3,), got {x.shape}")
        return cls(float(x[0]), float(x[1]), float(x[2]))

    def in_simplex(self, tol=0.0):
        """Membership in ``{x_i >= 0, x1 + x2 + x3 <= 1}``."""
        return min(self.x1, self.x2, self.x3) >= -tol and self.z >= -tol

    def __array__(self, dtype=None, copy=None):
        return self.as_array() if dtype is None else self.as_array().astype(dtype)


@dataclass(frozen=True)
class LinearModel:
    """Linearization ``A = J(x*)`` of the drift at an equilibrium ``x*``."""

    equilibrium: PopulationState
    A: np.ndarray

    def eigenvalues(self):
        return eigenvalues_3x3(self.A)


def _coords(s):
    x = np.asarray(s, dtype=float)
    if x.shape[-1:] != (3,):
        raise ValidationError(f"state must have a trailing axis of length 3, got {x.shape}")
    return x[..., 0], x[..., 1], x[..., 2]


def drift(s, p: EpidemicParams) -> np.ndarray:
    """Vector field ``(f1, f2, f3)`` of the deterministic model.

    Implemented term by term, including the ``(delta + mu) x3``
    inflow in ``f1`` and the unbalanced relapse coupling (``+nu x3 x2`` in
    ``f2`` against ``-mu x3 x2`` in ``f3``).
    """
    x1, x2, x3 = _coords(s)
    z = 1.0 - x1 - x2 - x3
    b = p.beta
    f1 = (
        -p.alpha * x1
        - b * (1.0 - p.xi) * x1 * x2
        - b * p.xi * x1 * z
        + (p.varepsilon + p.mu) * z
        + (p.delta + p.mu) * x3
        + p.mu_star * x2
    )
    f2 = (
        p.gamma * z
        + p.sigma * x3
        + b * (1.0 - p.xi) * x1 * x2
        + b * p.xi * x1 * z
        + p.nu * x3 * x2
        - (p.zeta + p.mu_star) * x2
    )
    f3 = p.zeta * x2 - p.mu * x3 * x2 - (p.delta + p.sigma + p.mu) * x3
    return np.stack(np.broadcast_arrays(f1, f2, f3), axis=-1)


def addiction_free_equilibrium(p: EpidemicParams) -> PopulationState:
    """Equilibrium with no addicted or treated individuals.

    Only defined for ``gamma = 0`` and ``xi = 0``; otherwise prescription
    users keep feeding the addicted class and ``x2 = 0`` is not invariant.
    """
    if p.gamma != 0:
        raise ValidationError(f"gamma: the addiction-free equilibrium requires gamma = 0, got {p.gamma}")
    if p.xi != 0:
        raise ValidationError(f"xi: the addiction-free equilibrium requires xi = 0, got {p.xi}")
    denom = p.alpha + p.varepsilon + p.mu
    if denom <= 0:
        raise ValidationError("alpha + varepsilon + mu must be positive")
    return PopulationState((p.varepsilon + p.mu) / denom, 0.0, 0.0)


def jacobian(s, p: EpidemicParams) -> np.ndarray:
    """Analytic Jacobian ``d f_i / d x_j`` of :func:`drift`.

    Works on a single state (returns ``(3, 3)``) or a batch (``(..., 3, 3)``).
    """
    x1, x2, x3 = _coords(s)
    z = 1.0 - x1 - x2 - x3
    b, xi = p.beta, p.xi
    em = p.varepsilon + p.mu
    zero = np.zeros_like(x1)

    j11 = -p.alpha - b * (1 - xi) * x2 - b * xi * (z - x1) - em
    j12 = -b * (1 - xi) * x1 + b * xi * x1 - em + p.mu_star
    j13 = b * xi * x1 - em + (p.delta + p.mu)

    j21 = -p.gamma + b * (1 - xi) * x2 + b * xi * (z - x1)
    j22 = -p.gamma + b * (1 - xi) * x1 - b * xi * x1 + p.nu * x3 - (p.zeta + p.mu_star)
    j23 = -p.gamma + p.sigma - b * xi * x1 + p.nu * x2

    j31 = zero
    j32 = p.zeta - p.mu * x3
    j33 = -p.mu * x2 - (p.delta + p.sigma + p.mu)

    rows = [
        np.stack(np.broadcast_arrays(j11, j12, j13), axis=-1),
        np.stack(np.broadcast_arrays(j21, j22, j23), axis=-1),
        np.stack(np.broadcast_arrays(j31, j32, j33), axis=-1),
    ]
    return np.stack(rows, axis=-2)


def linearize(p: EpidemicParams) -> LinearModel:
    """Jacobian at the addiction-free equilibrium."""
    eq = addiction_free_equilibrium(p)
    return LinearModel(eq, jacobian(eq.as_array(), p))


def _char_poly(A):
    # lambda^3 + c2 lambda^2 + c1 lambda + c0
    tr = A[0, 0] + A[1, 1] + A[2, 2]
    minors = (
        A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
        + A[0, 0] * A[2, 2] - A[0, 2] * A[2, 0]
        + A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1]
    )
    det = (
        A[0, 0] * (A[1, 1] * A[2, 2] - A[1, 2] * A[2, 1])
        - A[0, 1] * (A[1, 0] * A[2, 2] - A[1, 2] * A[2, 0])
        + A[0, 2] * (A[1, 0] * A[2, 1] - A[1, 1] * A[2, 0])
    )
    return -tr, minors, -det


def _cubic_roots(c2, c1, c0):
    shift = c2 / 3.0
    p = c1 - c2 * c2 / 3.0
    q = 2.0 * c2**3 / 27.0 - c2 * c1 / 3.0 + c0
    scale = max(abs(c2), abs(c1) ** 0.5, abs(c0) ** (1.0 / 3.0), 1e-300)
    disc = (q / 2.0) ** 2 + (p / 3.0) ** 3

    if abs(p) <= 1e-14 * scale**2 and abs(q) <= 1e-14 * scale**3:
        ts = [0.0, 0.0, 0.0]
    elif disc > 0:
        sq = math.sqrt(disc)
        t1 = math.copysign(abs(-q / 2 + sq) ** (1 / 3), -q / 2 + sq) + math.copysign(
            abs(-q / 2 - sq) ** (1 / 3), -q / 2 - sq
        )
        # deflate t^3 + p t + q by (t - t1)
        rad = cmath.sqrt(-3.0 * t1 * t1 - 4.0 * p)
        ts = [t1, (-t1 + rad) / 2.0, (-t1 - rad) / 2.0]
    else:
        m = 2.0 * math.sqrt(-p / 3.0)
        arg = 3.0 * q / (p * m)
        theta = math.acos(min(1.0, max(-1.0, arg))) / 3.0
        ts = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) for k in range(3)]

    roots = []
    for t in ts:
        lam = complex(t) - shift
        f = ((lam + c2) * lam + c1) * lam + c0
        df = (3.0 * lam + 2.0 * c2) * lam + c1
        if abs(df) > 1e-12 * scale**2:
            lam = lam - f / df
        roots.append(lam)
    return roots


def eigenvalues_3x3(A, return_vectors=False):
    """Eigenvalues of a real 3x3 matrix from its characteristic cubic.

    The cubic is solved in closed form (trigonometric branch for three real
    roots, Cardano otherwise) and each root gets one Newton polish step.

    Parameters
    ----------
    A : array_like, shape (3, 3)
    return_vectors : bool
        Also return unit eigenvectors as the columns of a complex matrix.

    Returns
    -------
    numpy.ndarray of complex, sorted by real part (then imaginary part)
    """
    A = np.asarray(A, dtype=float)
    if A.shape != (3, 3):
        raise ValidationError(f"expected a 3x3 matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValidationError("matrix entries must be finite")
    roots = sorted(_cubic_roots(*_char_poly(A)), key=lambda z: (z.real, z.imag))
    vals = np.array(roots, dtype=complex)
    if not return_vectors:
        return vals
    vecs = np.empty((3, 3), dtype=complex)
    for k, lam in enumerate(vals):
        _, _, vh = np.linalg.svd(A - lam * np.eye(3))
        v = vh[-1].conj()
        vecs[:, k] = v / np.linalg.norm(v)
    return vals, vecs


def infection_block(p: EpidemicParams) -> np.ndarray:
    """The 2x2 (addicted, treated) block of the Jacobian at the addiction-free point."""
    x1 = addiction_free_equilibrium(p).x1
    return np.array(
        [
            [p.beta * x1 - (p.zeta + p.mu_star), p.sigma],
            [p.zeta, -(p.delta + p.sigma + p.mu)],
        ]
    )


def reproduction_number(p: EpidemicParams) -> float:
    """Next-generation reproduction number of the addiction-free equilibrium.

    New addictions enter only through ``beta x1* x2``; transitions between the
    addicted and treated classes form ``V = [[zeta + mu*, -sigma],
    [-zeta, delta + sigma + mu]]``, so ``R0 = beta x1* (V^-1)_{11}``.
    """
    x1 = addiction_free_equilibrium(p).x1
    d_treat = p.delta + p.sigma + p.mu
    det_v = (p.zeta + p.mu_star) * d_treat - p.sigma * p.zeta
    if det_v <= 0:
        raise ValidationError(
            "transition matrix (zeta + mu_star)(delta + sigma + mu) - sigma*zeta must be positive"
        )
    return p.beta * x1 * d_treat / det_v
