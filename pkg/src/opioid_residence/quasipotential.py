"""Quadratic quasipotential over a polyhedral boundary and its residence-time check.

For a positive semidefinite ``P`` and a domain ``D = {G x < h}`` the
functional is

    phi(D, P) = min over x in boundary(D) of (x - c)^T P (x - c) / (2 ||P||)

with ``c`` the centre of the quadratic form (the origin by default). The
minimum over the closed boundary is found exactly by active-set
enumeration: every boundary point lies on some face, and the minimizer of a
convex quadratic restricted to a face is the stationary point of the
equality-constrained problem on that face's affine hull.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import io as _io
from .domain import Domain
from .exceptions import ComputationError, ValidationError
from .exitstats import mean_exit_time, run_ensemble
from .model import PopulationState, eigenvalues_3x3
from .sde import SdeConfig

__all__ = [
    "QuasipotentialResult",
    "ScalingRow",
    "ScalingTable",
    "matrix_norm",
    "matrix_norm_spectral",
    "quasipotential",
    "log_residence_scaling",
]


@dataclass(frozen=True)
class QuasipotentialResult:
    """Minimum of the scaled quadratic form over the domain boundary.

    Attributes
    ----------
    phi : float
    minimizer : ndarray
        Boundary point attaining the minimum (absolute coordinates).
    facet : str
        Name of the facet the minimizer lies on (the tightest one at a
        vertex or edge).
    facet_index : int
    norm_kind : str
        ``"spectral"`` or ``"frobenius"``.
    norm : float
        The value of ``||P||`` used in the denominator.
    """

    phi: float
    minimizer: np.ndarray = field(repr=False)
    facet: str
    facet_index: int
    norm_kind: str
    norm: float

    def to_csv(self, path):
        m = self.minimizer
        row = [self.phi, *m, self.facet, self.norm_kind]
        header = ["phi"] + [f"min_x{i + 1}" for i in range(m.size)] + ["facet", "norm_kind"]
        _io.write_csv(path, header, [row])


def _symmetric(P):
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValidationError(f"P must be square, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValidationError("P must be finite")
    scale = max(np.abs(P).max(), 1e-300)
    if np.abs(P - P.T).max() > 1e-10 * scale:
        raise ValidationError("P must be symmetric")
    return 0.5 * (P + P.T)


def _sym_eigvals(P):
    if P.shape == (3, 3):
        return eigenvalues_3x3(P).real
    return np.linalg.eigvalsh(P)


def matrix_norm_spectral(P):
    """Largest absolute eigenvalue of a symmetric matrix."""
    P = _symmetric(P)
    return float(np.max(np.abs(_sym_eigvals(P))))


def matrix_norm(P, kind="spectral"):
    if kind == "spectral":
        return matrix_norm_spectral(P)
    if kind == "frobenius":
        return float(np.linalg.norm(_symmetric(P), "fro"))
    raise ValidationError(f"norm kind must be 'spectral' or 'frobenius', got {kind!r}")


def _face_minimizer(P, c, Gs, hs):
    """Minimize (x-c)^T P (x-c) subject to Gs x = hs, or None if inconsistent."""
    d = P.shape[0]
    k = Gs.shape[0]
    kkt = np.zeros((d + k, d + k))
    kkt[:d, :d] = 2.0 * P
    kkt[:d, d:] = Gs.T
    kkt[d:, :d] = Gs
    rhs = np.concatenate([2.0 * P @ c, hs])
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError:
        sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    x = sol[:d]
    if not np.all(np.isfinite(x)):
        return None
    if np.abs(Gs @ x - hs).max() > 1e-9 * max(1.0, np.abs(hs).max()):
        return None
    return x


def quasipotential(P, d: Domain, center=None, norm_kind="spectral") -> QuasipotentialResult:
    """Exact ``phi`` for a quadratic form on a polyhedral domain.

    Parameters
    ----------
    P : (n, n) symmetric positive semidefinite array
    d : Domain
    center : array or PopulationState, optional
        Centre of the quadratic form. Must lie strictly inside ``d``.
        Defaults to the origin.
    norm_kind : {"spectral", "frobenius"}

    Raises
    ------
    ValidationError
        If ``P`` is not symmetric psd, has zero norm, or the centre is not
        strictly inside ``d``.
    """
    P = _symmetric(P)
    n = P.shape[0]
    if d.dim != n:
        raise ValidationError(f"P is {n}x{n} but the domain has dimension {d.dim}")
    ev = _sym_eigvals(P)
    nrm = matrix_norm(P, norm_kind)
    if not nrm > 0:
        raise ValidationError("P is zero; the quasipotential is undefined")
    if ev.min() < -1e-12 * np.abs(ev).max():
        raise ValidationError(f"P is not positive semidefinite (smallest eigenvalue {ev.min():.3e})")
    if isinstance(center, PopulationState):
        center = center.as_array()
    c = np.zeros(n) if center is None else np.asarray(center, dtype=float).reshape(-1)
    if c.size != n:
        raise ValidationError(f"center must have length {n}")
    if not d.interior_contains(c):
        raise ValidationError("center must lie strictly inside the domain")

    G, h = d.G, d.h
    feas_tol = 1e-10 * max(1.0, np.abs(h).max())
    best = (math.inf, None)
    for k in range(1, n + 1):
        for S in itertools.combinations(range(d.n_facets), k):
            Gs = G[list(S)]
            if np.linalg.matrix_rank(Gs) < k:
                continue
            x = _face_minimizer(P, c, Gs, h[list(S)])
            if x is None or np.any(G @ x - h > feas_tol):
                continue
            r = x - c
            val = float(r @ P @ r)
            if val < best[0]:
                best = (val, x)
    val, x = best
    if x is None:
        raise ComputationError("no feasible boundary point found; is the domain bounded?")
    slack = d.facet_slack(x)
    idx = int(np.argmin(np.abs(slack)))
    return QuasipotentialResult(
        phi=max(val, 0.0) / (2.0 * nrm),
        minimizer=x,
        facet=d.names[idx],
        facet_index=idx,
        norm_kind=norm_kind,
        norm=nrm,
    )


@dataclass(frozen=True)
class ScalingRow:
    epsilon: float
    eps_log_tau: float
    mean_tau: float
    stderr: float
    censored_fraction: float
    phi: float


@dataclass(frozen=True)
class ScalingTable:
    rows: tuple

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self, path):
        header = ["epsilon", "eps_log_tau", "mean_tau", "stderr", "censored_fraction", "phi"]
        _io.write_csv(
            path,
            header,
            [(r.epsilon, r.eps_log_tau, r.mean_tau, r.stderr, r.censored_fraction, r.phi) for r in self.rows],
        )


def log_residence_scaling(phi, dynamics, d: Domain, eps_list, n_paths, x0=None, dt=0.01, t_max=1e4, seed=0, n_workers=1):
    """Tabulate ``eps * ln E[tau]`` for decreasing noise levels.

    ``dynamics`` is typically the controlled-linear drift ``(A + Bt K) x``;
    every row carries the same ``phi`` for comparison.

    Returns
    -------
    ScalingTable
    """
    eps = [float(e) for e in eps_list]
    if not eps:
        raise ValidationError("eps_list is empty")
    if any(e <= 0 for e in eps):
        raise ValidationError("every noise level must be > 0")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValidationError("eps_list must be strictly decreasing")
    x0 = np.zeros(d.dim) if x0 is None else np.asarray(x0, dtype=float)
    rows = []
    for e in eps:
        cfg = SdeConfig(epsilon_noise=e, dt=dt, t_max=t_max, seed=seed)
        ens = run_ensemble(x0, dynamics, cfg, d, n_paths, n_workers=n_workers)
        m = mean_exit_time(ens)
        rows.append(ScalingRow(e, e * math.log(m.mean), m.mean, m.stderr, m.censored_fraction, float(phi)))
    return ScalingTable(tuple(rows))
