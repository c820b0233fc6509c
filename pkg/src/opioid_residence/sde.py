"""Euler-Maruyama simulation with noise entering the first coordinate only.

The controlled system is ``dX = [F(X) + Bt v(X)] dt + sqrt(eps) e1 dW`` with a
scalar Brownian motion ``W``. Paths are driven by the counter-based streams
of :mod:`opioid_residence.rng`, keyed by ``(seed, path_index, step_index)``.

Exit convention: a path exits at the timestamp of the first sample that is
not strictly inside the stopping domain (right endpoint of the crossing step,
no bridge correction).
"""
from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _kernels
from . import io as _io
from .domain import Domain
from .exceptions import SimulationError, ValidationError
from .model import EpidemicParams, drift
from .rng import normal_block, seed_key

__all__ = [
    "SdeConfig",
    "ActuationMatrix",
    "Policy",
    "ModelDynamics",
    "LinearDynamics",
    "Trajectory",
    "ExitRecord",
    "em_step",
    "simulate_path",
    "simulate_exits",
    "step_times",
    "step_sizes",
]


@dataclass(frozen=True)
class SdeConfig:
    """Noise intensity, step size, horizon and seed of a simulation."""

    epsilon_noise: float = 0.01
    dt: float = 0.01
    t_max: float = 1000.0
    seed: int = 0

    def __post_init__(self):
        if not (math.isfinite(self.epsilon_noise) and self.epsilon_noise >= 0):
            raise ValidationError(f"epsilon_noise: must be >= 0, got {self.epsilon_noise}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt: must be > 0, got {self.dt}")
        if not (math.isfinite(self.t_max) and self.t_max >= self.dt):
            raise ValidationError(f"t_max: must be >= dt, got {self.t_max}")
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= int(self.seed) < 2**64):
            raise ValidationError(f"seed: must be an unsigned 64-bit integer, got {self.seed!r}")

    @property
    def n_steps(self):
        return max(1, math.ceil(self.t_max / self.dt - 1e-9))


def step_sizes(cfg: SdeConfig):
    """``(dt, h_last)``: every step is ``dt`` except possibly a shorter last one."""
    n = cfg.n_steps
    rem = cfg.t_max - (n - 1) * cfg.dt
    if abs(rem - cfg.dt) <= 1e-9 * cfg.dt:
        rem = cfg.dt
    return cfg.dt, rem


def step_times(cfg: SdeConfig) -> np.ndarray:
    """Sample times ``0, dt, 2 dt, ..., t_max`` (last spacing may be shorter)."""
    n = cfg.n_steps
    t = np.arange(n + 1) * cfg.dt
    t[-1] = cfg.t_max
    return t


@dataclass(frozen=True)
class ActuationMatrix:
    """Control effectiveness ``b1`` (susceptible) and ``b2`` (treated).

    Encodes the 3x2 matrix with ``(1, 1) = b1`` and ``(3, 2) = b2``.
    """

    b1: float = 0.01
    b2: float = 0.001

    def __post_init__(self):
        for name in ("b1", "b2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name}: must be >= 0, got {v}")

    @property
    def matrix(self):
        return np.array([[self.b1, 0.0], [0.0, 0.0], [0.0, self.b2]])


class Policy:
    """Stationary Markov control ``u = v(x)`` with optional box saturation.

    Parameters
    ----------
    fn : callable
        Maps states of shape ``(..., 3)`` to controls of shape ``(..., 2)``.
    umax : float, optional
        If given, controls are clipped to ``[-umax, umax]`` componentwise.
    """

    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], umax: Optional[float] = None, name="policy", linear=None):
        if umax is not None and not umax > 0:
            raise ValidationError(f"umax: must be > 0, got {umax}")
        self.fn = fn
        self.umax = umax
        self.name = name
        # (K, center) when u = K (x - center); lets simulations use the compiled loop
        self.linear = linear

    def __call__(self, x):
        u = np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)
        if self.umax is not None:
            u = np.clip(u, -self.umax, self.umax)
        return u

    def __repr__(self):
        return f"Policy({self.name}, umax={self.umax})"


class ModelDynamics:
    """Drift ``F(x) + Bt v(x)`` of the (possibly controlled) epidemic model."""

    dim = 3

    def __init__(self, params: EpidemicParams, policy: Optional[Policy] = None, actuation: Optional[ActuationMatrix] = None):
        if policy is not None and actuation is None:
            raise ValidationError("a policy needs an actuation matrix")
        self.params = params
        self.policy = policy
        self.actuation = actuation
        self._bt = None if actuation is None else actuation.matrix

    def __call__(self, x):
        f = drift(x, self.params)
        if self.policy is not None:
            f = f + self.policy(x) @ self._bt.T
        return f


class LinearDynamics:
    """Linear drift ``M (x - center)`` in any dimension."""

    def __init__(self, M, center=None):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[0] != M.shape[1]:
            raise ValidationError(f"linear drift matrix must be square, got {M.shape}")
        self.M = M
        self.center = np.zeros(M.shape[0]) if center is None else np.asarray(center, dtype=float)
        self.dim = M.shape[0]

    def __call__(self, x):
        return (np.asarray(x, dtype=float) - self.center) @ self.M.T


@dataclass
class Trajectory:
    """Sampled path: ``times`` of shape ``(n,)`` and ``states`` of shape ``(n, d)``."""

    times: np.ndarray
    states: np.ndarray

    def columns(self):
        d = self.states.shape[1]
        names = ["t"] + [f"x{i + 1}" for i in range(d)]
        cols = [self.times] + [self.states[:, i] for i in range(d)]
        if d == 3:
            names.append("z")
            cols.append(1.0 - self.states.sum(axis=1))
        return names, cols

    def to_csv(self, path):
        names, cols = self.columns()
        _io.write_csv(path, names, np.column_stack(cols))


@dataclass(frozen=True)
class ExitRecord:
    time: float
    state: np.ndarray = field(repr=False)
    step: int = 0


def em_step(s, p: EpidemicParams, pol: Optional[Policy], bt: Optional[ActuationMatrix], dt, dW, epsilon_noise=0.0):
    """One Euler-Maruyama step of the epidemic model.

    ``dW`` is the Brownian increment over the step (a draw from N(0, dt));
    it is added, scaled by ``sqrt(epsilon_noise)``, to ``x1`` only. ``s``
    may also be a batch of shape ``(n, 3)`` with ``dW`` of shape ``(n,)``.
    """
    if not dt > 0:
        raise ValidationError(f"dt: must be > 0, got {dt}")
    x = np.asarray(s, dtype=float)
    dyn = ModelDynamics(p, pol, bt) if pol is not None else ModelDynamics(p)
    xs = np.atleast_2d(x)
    dW = np.broadcast_to(np.asarray(dW, dtype=float), xs.shape[:1])
    out = _advance(dyn, xs, dt, dW, math.sqrt(epsilon_noise))
    return out[0] if x.ndim == 1 else out


def _advance(dynamics, xs, h, dW, sq_eps):
    out = xs + h * dynamics(xs)
    out[:, 0] += sq_eps * dW
    return out


def _as_dynamics(dynamics):
    if isinstance(dynamics, EpidemicParams):
        return ModelDynamics(dynamics)
    if not callable(dynamics):
        raise ValidationError("dynamics must be callable or EpidemicParams")
    return dynamics


# The compiled loop is already parallel over paths; serializing calls keeps it
# safe under numba threading layers that reject concurrent launches.
_KERNEL_LOCK = threading.Lock()


def _kernel_args(dynamics):
    """Arguments for the compiled loop, or None if the drift is a generic callable."""
    z2 = np.zeros((2, 3))
    z3 = np.zeros(3)
    if type(dynamics) is LinearDynamics:
        return (_kernels.LINEAR, np.zeros(11), False, z2, z3, np.zeros((3, 2)), np.inf,
                np.ascontiguousarray(dynamics.M), np.ascontiguousarray(dynamics.center, dtype=float))
    if type(dynamics) is ModelDynamics:
        p = dynamics.params
        prm = np.array([p.alpha, p.beta, p.xi, p.varepsilon, p.delta, p.mu, p.mu_star,
                        p.gamma, p.zeta, p.nu, p.sigma], dtype=float)
        pol = dynamics.policy
        if pol is None:
            return (_kernels.MODEL, prm, False, z2, z3, np.zeros((3, 2)), np.inf, np.zeros((3, 3)), z3)
        if pol.linear is None:
            return None
        K, c = pol.linear
        umax = np.inf if pol.umax is None else float(pol.umax)
        return (_kernels.MODEL, prm, True, np.ascontiguousarray(K, dtype=float),
                np.ascontiguousarray(c, dtype=float), np.ascontiguousarray(dynamics.actuation.matrix),
                umax, np.zeros((3, 3)), z3)
    return None


def simulate_exits(dynamics, x0, cfg: SdeConfig, stop: Optional[Domain], paths, block=64, record=False):
    """Run paths ``paths`` (integer stream indices) from ``x0`` until exit or ``t_max``.

    Linear drifts and the epidemic model (uncontrolled or under a linear
    policy) run in a compiled loop; any other callable drift runs in a
    vectorized numpy loop with the same step arithmetic.

    Returns
    -------
    exit_time : ndarray, shape (n,)
        ``inf`` for paths still inside at ``t_max`` (censored).
    final_state : ndarray, shape (n, d)
        State at the exit sample, or at ``t_max`` for censored paths.
    samples : ndarray or None
        Every sample of the single path when ``record`` is true.
    """
    dynamics = _as_dynamics(dynamics)
    paths = np.asarray(paths, dtype=np.uint64).reshape(-1)
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim != 1:
        raise ValidationError("x0 must be a single state vector")
    if not np.all(np.isfinite(x0)):
        raise ValidationError("initial state must be finite")
    if record and paths.size != 1:
        raise ValidationError("recording is only supported for a single path")
    if stop is not None and stop.dim != x0.size:
        raise ValidationError(f"domain dimension {stop.dim} does not match state dimension {x0.size}")
    args = _kernel_args(dynamics)
    if args is None:
        return _simulate_numpy(dynamics, x0, cfg, stop, paths, block, record)

    kind, prm, use_pol, K, kc, Bt, umax, M, c = args
    if kind == _kernels.LINEAR and M.shape[0] != x0.size:
        raise ValidationError(f"linear drift dimension {M.shape[0]} does not match state dimension {x0.size}")
    k0, k1 = seed_key(cfg.seed)
    G = np.zeros((0, x0.size)) if stop is None else np.ascontiguousarray(stop.G)
    hv = np.zeros(0) if stop is None else np.ascontiguousarray(stop.h)
    closed = np.zeros(0, dtype=np.bool_) if stop is None else np.ascontiguousarray(stop.closed)
    with _KERNEL_LOCK, warnings.catch_warnings():
        warnings.filterwarnings("ignore", message="The TBB threading layer")
        exit_time, final, status, samples = _kernels.run_paths(
            kind, k0, k1, np.ascontiguousarray(paths), x0.copy(), step_times(cfg), *step_sizes(cfg),
            math.sqrt(cfg.epsilon_noise), stop is not None, G, hv, closed,
            prm, use_pol, K, kc, Bt, umax, M, c, record,
        )
    bad = np.nonzero(status)[0]
    if bad.size:
        i = bad[0]
        raise SimulationError(
            f"non-finite state at step {int(status[i])} (path {int(paths[i])}); "
            "check parameter magnitudes or reduce dt",
            step=int(status[i]),
        )
    return exit_time, final, (samples if record else None)


def _simulate_numpy(dynamics, x0, cfg, stop, paths, block, record):
    n = paths.size
    d = x0.size
    xs = np.array(np.broadcast_to(x0, (n, d)), dtype=float)
    ids = np.arange(n)
    exit_time = np.full(n, np.inf)
    final = np.empty((n, d))
    samples = [xs[0].copy()] if record else None

    times = step_times(cfg)
    dt, h_last = step_sizes(cfg)
    n_steps = cfg.n_steps
    sq_eps = math.sqrt(cfg.epsilon_noise)
    k = 0
    while k < n_steps and ids.size:
        nb = min(block, n_steps - k)
        Z = normal_block(cfg.seed, paths[ids], k, nb)
        for j in range(nb):
            step = k + j
            h = dt if step < n_steps - 1 else h_last
            xs = _advance(dynamics, xs, h, math.sqrt(h) * Z[:, j], sq_eps)
            if record:
                samples.append(xs[0].copy())
            if not np.all(np.isfinite(xs)):
                bad = ids[~np.all(np.isfinite(xs), axis=1)][0]
                raise SimulationError(
                    f"non-finite state at step {step + 1} (path {int(paths[bad])}); "
                    "check parameter magnitudes or reduce dt",
                    step=step + 1,
                )
            if stop is not None:
                inside = stop.contains(xs)
                if not inside.all():
                    out = ~inside
                    exit_time[ids[out]] = times[step + 1]
                    final[ids[out]] = xs[out]
                    ids, xs, Z = ids[inside], xs[inside], Z[inside]
                    if not ids.size:
                        break
        k += nb
    final[ids] = xs
    return exit_time, final, (np.array(samples) if record else None)


def simulate_path(x0, dynamics, cfg: SdeConfig, stop: Optional[Domain] = None, path_index=0):
    """Simulate one path; stops early at the first exit from ``stop``.

    Parameters
    ----------
    x0 : array_like or PopulationState
    dynamics : callable or EpidemicParams
        Drift evaluated on ``(n, d)`` arrays, e.g. :class:`ModelDynamics`.
    cfg : SdeConfig
    stop : Domain, optional
    path_index : int
        Stream index; the same index reproduces the same noise.

    Returns
    -------
    (Trajectory, ExitRecord or None)
    """
    x0 = np.asarray(x0, dtype=float)
    exit_time, final, states = simulate_exits(dynamics, x0, cfg, stop, [path_index], record=True)
    times = step_times(cfg)[: len(states)]
    record = None
    if np.isfinite(exit_time[0]):
        record = ExitRecord(float(exit_time[0]), final[0].copy(), len(states) - 1)
    return Trajectory(times, states), record
