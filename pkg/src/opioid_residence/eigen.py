"""Principal Dirichlet eigenpair of the (controlled) generator on a box.

The generator is

    L psi = (eps / 2) d^2 psi / dx1^2 + <b(x), grad psi>

with diffusion along the first axis only and drift ``b``. It is discretized
on a tensor grid with second-order central differences for the diffusion
and first-order upwind differences for every drift component, so ``-L`` is
an M-matrix (nonpositive off-diagonals, weakly diagonally dominant rows).
That keeps the principal eigenvalue real and positive and the eigenfunction
positive even though the diffusion is degenerate; the price is first-order
accuracy and some numerical diffusion across the noiseless directions.

Boundary nodes carry ``psi = 0`` and are eliminated, so the matrix acts on
interior nodes only, in C order of the interior index ``(i1, i2, ...)``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import splu

from . import io as _io
from .domain import Domain
from .exceptions import ComputationError, ValidationError
from .exitstats import estimate_exit_rate, run_ensemble, survival_curve
from .model import LinearModel
from .sde import LinearDynamics, SdeConfig

__all__ = [
    "GridSpec",
    "GridWarning",
    "EigenSolution",
    "GradientField",
    "EigenCase",
    "EigenMcReport",
    "discretize_generator",
    "principal_eigenvalue",
    "gradient_field",
    "eigen_vs_montecarlo",
]


class GridWarning(UserWarning):
    """The grid is coarse relative to the drift; upwind smearing dominates."""


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Tensor grid on a box, boundary nodes included.

    Parameters
    ----------
    lower, upper : sequences of float
        Box bounds per axis.
    n : sequence of int
        Points per axis (``>= 3``), boundary nodes included.
    """

    lower: tuple
    upper: tuple
    n: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        if not (len(lo) == len(hi) == len(n)):
            raise ValidationError("grid bounds and point counts must have the same length")
        for i, (a, b, m) in enumerate(zip(lo, hi, n)):
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise ValidationError(f"grid axis {i + 1}: need finite lower < upper")
            if m < 3:
                raise ValidationError(f"grid axis {i + 1}: need at least 3 points, got {m}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "n", n)

    @classmethod
    def around(cls, center, half_width, n):
        """Box ``center +- half_width`` with ``n`` points per axis."""
        c = np.atleast_1d(np.asarray(center, dtype=float))
        w = np.broadcast_to(np.asarray(half_width, dtype=float), c.shape)
        m = np.broadcast_to(np.asarray(n, dtype=int), c.shape)
        return cls(tuple(c - w), tuple(c + w), tuple(m))

    @property
    def dim(self):
        return len(self.n)

    @property
    def h(self):
        return np.array([(b - a) / (m - 1) for a, b, m in zip(self.lower, self.upper, self.n)])

    @property
    def interior_shape(self):
        return tuple(m - 2 for m in self.n)

    @property
    def n_interior(self):
        return int(np.prod(self.interior_shape))

    def axes(self):
        """Node coordinates per axis, boundary included."""
        return [np.linspace(a, b, m) for a, b, m in zip(self.lower, self.upper, self.n)]

    def interior_axes(self):
        return [ax[1:-1] for ax in self.axes()]

    def interior_points(self):
        """Interior node coordinates, shape ``(n_interior, dim)`` in C order."""
        mesh = np.meshgrid(*self.interior_axes(), indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def domain(self):
        return Domain.box(self.lower, self.upper)


def _as_drift(dynamics):
    if isinstance(dynamics, LinearModel):
        return LinearDynamics(dynamics.A, dynamics.equilibrium.as_array())
    if not callable(dynamics):
        raise ValidationError("dynamics must be callable or a LinearModel")
    return dynamics


def discretize_generator(dynamics, eps_noise, g: GridSpec, peclet_warn=2.0):
    """Sparse upwind discretization of the generator on the interior nodes.

    Parameters
    ----------
    dynamics : callable or LinearModel
        Drift evaluated on states of shape ``(N, dim)``. A ``LinearModel``
        becomes ``A (x - x*)``.
    eps_noise : float
        Noise intensity; the diffusion coefficient on axis 1 is ``eps/2``.
    g : GridSpec
    peclet_warn : float
        Emit :class:`GridWarning` when the cell Peclet number
        ``|b1| h1 / eps`` on the noisy axis exceeds this value.

    Returns
    -------
    scipy.sparse.csr_matrix
        ``L`` of shape ``(n_interior, n_interior)``; ``-L`` is an M-matrix.
    """
    if not (math.isfinite(eps_noise) and eps_noise > 0):
        raise ValidationError(f"eps_noise: must be > 0, got {eps_noise}")
    drift = _as_drift(dynamics)
    pts = g.interior_points()
    b = np.asarray(drift(pts), dtype=float).reshape(pts.shape)
    if not np.all(np.isfinite(b)):
        raise ComputationError("drift is not finite on the grid")

    shape = g.interior_shape
    N = g.n_interior
    h = g.h
    idx = np.arange(N).reshape(shape)
    multi = np.unravel_index(np.arange(N), shape)

    rows, cols, vals = [], [], []
    diag = np.zeros(N)

    def couple(axis, step, weight):
        # weight >= 0 towards the neighbour at +step along axis; boundary neighbours are dropped
        j = multi[axis] + step
        ok = (j >= 0) & (j < shape[axis]) & (weight != 0)
        src = np.nonzero(ok)[0]
        nb = list(m[src] for m in multi)
        nb[axis] = j[src]
        rows.append(src)
        cols.append(idx[tuple(nb)])
        vals.append(weight[src] if np.ndim(weight) else np.full(src.size, weight))

    D = 0.5 * eps_noise / h[0] ** 2
    couple(0, 1, np.full(N, D))
    couple(0, -1, np.full(N, D))
    diag -= 2.0 * D
    for a in range(g.dim):
        up = np.maximum(b[:, a], 0.0) / h[a]
        dn = np.maximum(-b[:, a], 0.0) / h[a]
        couple(a, 1, up)
        couple(a, -1, dn)
        diag -= up + dn

    pe = float(np.max(np.abs(b[:, 0])) * h[0] / eps_noise)
    if pe > peclet_warn:
        warnings.warn(
            f"cell Peclet number {pe:.3g} on the noisy axis exceeds {peclet_warn:g}; "
            "refine axis 1 for a less diffusive discretization",
            GridWarning,
            stacklevel=2,
        )
    rows.append(np.arange(N))
    cols.append(np.arange(N))
    vals.append(diag)
    L = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
    ).tocsr()
    L.sum_duplicates()
    return L


@dataclass(frozen=True, eq=False)
class EigenSolution:
    """Principal eigenpair of ``-L``.

    ``psi`` holds interior values (flat, C order of the interior grid),
    normalized to ``max psi = 1``.
    """

    lam: float
    psi: np.ndarray = field(repr=False)
    iterations: int
    residual: float
    imag_part: float = 0.0
    history: tuple = field(default=(), repr=False)

    def grid_values(self, g: GridSpec):
        """``psi`` on the full grid with zero boundary values."""
        full = np.zeros(g.n)
        full[tuple(slice(1, -1) for _ in g.n)] = self.psi.reshape(g.interior_shape)
        return full

    def to_csv(self, path, g: GridSpec):
        pts = g.interior_points()
        ii = np.stack(np.unravel_index(np.arange(g.n_interior), g.interior_shape), axis=1) + 1
        header = [f"i{k + 1}" for k in range(g.dim)] + [f"x{k + 1}" for k in range(g.dim)] + ["psi"]
        rows = (list(i) + list(x) + [p] for i, x, p in zip(ii, pts, self.psi))
        _io.write_csv(path, header, rows)


def _factor(A):
    try:
        return splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A")
    except RuntimeError as exc:
        raise ComputationError(f"factorization failed: {exc}") from None


def principal_eigenvalue(Lmat, tol=1e-9, max_iter=10000, positivity_tol=1e-8) -> EigenSolution:
    """Eigenvalue of ``-L`` with the smallest real part and its eigenvector.

    Inverse power iteration with shift 0 (which converges to the Perron
    eigenvalue, ``-L`` being a nonsingular M-matrix) until the residual is
    below ``1e-3 |lambda|``, followed by inverse iteration shifted to the
    current estimate. The contract is on the final residual
    ``||(-L) psi - lambda psi|| / ||psi|| <= tol * |lambda|``.

    Raises
    ------
    ComputationError
        On non-convergence (with the residual history) or if the
        eigenvector has entries of both signs beyond ``positivity_tol``.
    """
    A = -sp.csr_matrix(Lmat, dtype=float)
    N = A.shape[0]
    if A.shape != (N, N) or N == 0:
        raise ValidationError("generator matrix must be square and nonempty")
    v = np.ones(N) / math.sqrt(N)
    lu = _factor(A)
    history = []
    lam = math.nan
    refined = False
    for it in range(1, max_iter + 1):
        w = lu.solve(v)
        nw = np.linalg.norm(w)
        if not (np.isfinite(nw) and nw > 0):
            raise ComputationError("inverse iteration produced a non-finite vector")
        v = w / nw
        Av = A @ v
        lam = float(v @ Av)
        res = float(np.linalg.norm(Av - lam * v))
        history.append(res)
        if res <= tol * abs(lam):
            break
        if not refined and res <= 1e-3 * abs(lam):
            # shift close to the eigenvalue for fast final convergence
            shift = lam * (1.0 - 1e-10)
            lu = _factor(A - shift * sp.identity(N, format="csr"))
            refined = True
    else:
        raise ComputationError(
            f"inverse iteration did not converge in {max_iter} iterations "
            f"(last residuals {', '.join(f'{r:.2e}' for r in history[-3:])})"
        )
    k = int(np.argmax(np.abs(v)))
    psi = v / v[k]
    if psi.min() < -positivity_tol:
        raise ComputationError(
            f"principal eigenvector changes sign (min {psi.min():.3e}); "
            "the grid is too coarse or the operator is reducible"
        )
    return EigenSolution(lam=lam, psi=psi, iterations=it, residual=history[-1], history=tuple(history))


class GradientField:
    """Finite-difference gradient of a grid function on interior nodes.

    ``values`` has shape ``interior_shape + (dim,)``. Calling the object
    interpolates linearly between interior nodes (extrapolating outside
    them), so it can drive :func:`control.bang_bang_policy`.
    """

    def __init__(self, values, g: GridSpec):
        self.values = values
        self.grid = g
        self._interp = RegularGridInterpolator(
            tuple(g.interior_axes()), values, bounds_error=False, fill_value=None
        )

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self._interp(x.reshape(-1, self.grid.dim))
        return out.reshape(x.shape)


def gradient_field(psi, g: GridSpec) -> GradientField:
    """Gradient of ``psi`` (an :class:`EigenSolution` or interior values).

    Central differences at interior nodes, second-order one-sided
    differences at boundary-adjacent nodes.
    """
    vals = psi.psi if isinstance(psi, EigenSolution) else np.asarray(psi, dtype=float)
    vals = vals.reshape(g.interior_shape)
    comps = []
    for a, ax in enumerate(g.interior_axes()):
        m = ax.size
        if m >= 3:
            comps.append(np.gradient(vals, ax, axis=a, edge_order=2))
        elif m == 2:
            comps.append(np.gradient(vals, ax, axis=a, edge_order=1))
        else:
            comps.append(np.zeros_like(vals))
    return GradientField(np.stack(comps, axis=-1), g)


@dataclass(frozen=True)
class EigenCase:
    """One finite-difference vs Monte Carlo comparison.

    The box of ``grid`` doubles as the exit domain; paths start at ``x0``
    (the box centre by default).
    """

    dynamics: object
    eps_noise: float
    grid: GridSpec
    n_paths: int = 10000
    dt: float = 1e-3
    t_max: float = 100.0
    seed: int = 0
    x0: tuple = None
    n_workers: int = 1


@dataclass(frozen=True)
class EigenMcReport:
    lambda_fd: float
    lambda_mc: float
    gap: float
    fd: EigenSolution = field(repr=False)
    rate: object = field(repr=False, default=None)

    def to_csv(self, path):
        _io.write_csv(path, ["lambda_fd", "lambda_mc", "gap"], [(self.lambda_fd, self.lambda_mc, self.gap)])


def eigen_vs_montecarlo(case: EigenCase, curve=None) -> EigenMcReport:
    """Compare the discrete principal eigenvalue with the Monte Carlo exit rate.

    ``curve`` replaces the simulated survival curve when given (useful to
    isolate the finite-difference side). ``gap`` is
    ``|lambda_mc - lambda_fd| / lambda_fd``.
    """
    g = case.grid
    fd = principal_eigenvalue(discretize_generator(case.dynamics, case.eps_noise, g))
    if curve is None:
        x0 = 0.5 * (np.array(g.lower) + np.array(g.upper)) if case.x0 is None else np.asarray(case.x0, dtype=float)
        cfg = SdeConfig(epsilon_noise=case.eps_noise, dt=case.dt, t_max=case.t_max, seed=case.seed)
        ens = run_ensemble(x0, _as_drift(case.dynamics), cfg, g.domain(), case.n_paths, n_workers=case.n_workers)
        curve = survival_curve(ens)
    rate = estimate_exit_rate(curve)
    gap = abs(rate.lambda_hat - fd.lam) / fd.lam
    return EigenMcReport(fd.lam, rate.lambda_hat, gap, fd, rate)
