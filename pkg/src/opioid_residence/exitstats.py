"""First-exit Monte Carlo: ensembles, survival curves, exit rates, mean exit times."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import io as _io
from .domain import Domain
from .exceptions import ComputationError, ValidationError
from .sde import SdeConfig, simulate_exits

__all__ = [
    "Domain",
    "Censored",
    "ExitEnsemble",
    "SurvivalCurve",
    "ExitRateEstimate",
    "MeanExitTime",
    "corrected_domain",
    "first_exit",
    "run_ensemble",
    "survival_curve",
    "default_window",
    "estimate_exit_rate",
    "mean_exit_time",
    "RateComparison",
    "paired_rate_comparison",
]


@dataclass(frozen=True)
class Censored:
    """Marker for a path still inside the domain at the horizon."""

    t_max: float


@dataclass(frozen=True, eq=False)
class ExitEnsemble:
    """Exit times of ``n_paths`` seeded paths.

    ``path_exit_times[i]`` is the exit time of path ``i`` or ``inf`` if it
    was censored at ``t_max``.
    """

    path_exit_times: np.ndarray
    seed: int
    config: SdeConfig
    exit_states: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_paths(self):
        return int(self.path_exit_times.size)

    @property
    def exit_times(self):
        """Sorted exit times of the paths that exited."""
        t = self.path_exit_times
        return np.sort(t[np.isfinite(t)])

    @property
    def n_censored(self):
        return int(np.count_nonzero(~np.isfinite(self.path_exit_times)))

    @property
    def t_max(self):
        return self.config.t_max

    def __eq__(self, other):
        if not isinstance(other, ExitEnsemble):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.config == other.config
            and np.array_equal(self.path_exit_times, other.path_exit_times)
        )

    def to_csv(self, path):
        rows = []
        for i, t in enumerate(self.path_exit_times):
            if np.isfinite(t):
                rows.append((i, t, 0))
            else:
                rows.append((i, self.t_max, 1))
        _io.write_csv(path, ["path", "exit_time", "censored"], rows)


@dataclass(frozen=True)
class SurvivalCurve:
    t: np.ndarray
    survival: np.ndarray
    n_paths: int

    def to_csv(self, path):
        _io.write_csv(path, ["t", "survival"], np.column_stack([self.t, self.survival]))


@dataclass(frozen=True)
class ExitRateEstimate:
    lambda_hat: float
    intercept: float
    t_lo: float
    t_hi: float
    stderr: float
    n_points: int

    def to_csv(self, path):
        _io.write_csv(
            path,
            ["lambda_hat", "stderr", "t_lo", "t_hi", "n_points"],
            [(self.lambda_hat, self.stderr, self.t_lo, self.t_hi, self.n_points)],
        )


@dataclass(frozen=True)
class MeanExitTime:
    mean: float
    stderr: float
    censored_fraction: float
    censoring_flag: bool

    def __iter__(self):
        return iter((self.mean, self.stderr))


# E[max of a Gaussian random walk overshoot] / sigma sqrt(dt), i.e. -zeta(1/2) / sqrt(2 pi)
_OVERSHOOT = 0.5826


def corrected_domain(d: Domain, cfg: SdeConfig) -> Domain:
    """Domain shrunk to offset discrete monitoring of the exit.

    Testing the state only at step times misses excursions between steps
    and biases exit times upward by ``O(sqrt(dt))``. Moving each facet
    inward by ``0.5826 sqrt(eps dt) |g_1|`` (``g`` its normal row; noise acts
    on axis 1 only) removes the leading term.
    """
    shift = _OVERSHOOT * math.sqrt(cfg.epsilon_noise * cfg.dt) * np.abs(d.G[:, 0])
    return Domain(d.kind, d.G, d.h - shift, d.names, d.closed)


def first_exit(x0, dynamics, cfg: SdeConfig, d: Domain, path_index=0, continuity_correction=False):
    """Exit time of a single path, or :class:`Censored`.

    The state is only tested after each step (exit at ``t > 0``), so a
    start outside ``d`` is reported as an exit at the first sample. With
    ``continuity_correction`` the test uses :func:`corrected_domain`.
    """
    if continuity_correction:
        d = corrected_domain(d, cfg)
    t, _, _ = simulate_exits(dynamics, x0, cfg, d, [path_index])
    if np.isfinite(t[0]):
        return float(t[0])
    return Censored(cfg.t_max)


def run_ensemble(
    x0, dynamics, cfg: SdeConfig, d: Domain, n_paths, n_workers=1, first_path=0, continuity_correction=False
) -> ExitEnsemble:
    """Simulate paths ``first_path .. first_path + n_paths - 1`` to exit or ``t_max``.

    Paths are split into contiguous chunks, one per worker thread; results
    are merged in path order. Every draw is keyed by path index, so the
    output does not depend on ``n_workers``. ``continuity_correction``
    shrinks the domain as in :func:`corrected_domain`.
    """
    if continuity_correction:
        d = corrected_domain(d, cfg)
    if n_paths < 1:
        raise ValidationError(f"n_paths: must be >= 1, got {n_paths}")
    if n_workers < 1:
        raise ValidationError(f"n_workers: must be >= 1, got {n_workers}")
    ids = np.arange(first_path, first_path + n_paths, dtype=np.uint64)
    chunks = [c for c in np.array_split(ids, min(n_workers, n_paths)) if c.size]

    def work(chunk):
        return simulate_exits(dynamics, x0, cfg, d, chunk)

    if len(chunks) == 1:
        results = [work(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(work, chunks))
    times = np.concatenate([r[0] for r in results])
    states = np.concatenate([r[1] for r in results])
    return ExitEnsemble(times, int(cfg.seed), cfg, states)


def survival_curve(e: ExitEnsemble, t_grid=None) -> SurvivalCurve:
    """Empirical ``P(tau > t)``; censored paths count as alive through ``t_max``.

    ``t_grid`` defaults to 401 equally spaced points on ``[0, t_end]``, where
    ``t_end`` is the last exit time (or ``t_max`` when paths are censored).
    """
    if t_grid is None:
        exits = e.exit_times
        t_end = e.t_max if e.n_censored or not exits.size else float(exits[-1])
        t_grid = np.linspace(0.0, t_end, 401)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or np.any(np.diff(t_grid) <= 0):
        raise ValidationError("t_grid must be strictly increasing")
    if t_grid[0] < 0 or t_grid[-1] > e.t_max * (1 + 1e-12):
        raise ValidationError("t_grid must lie within [0, t_max]")
    exits = e.exit_times
    n_exited_by = np.searchsorted(exits, t_grid, side="right")
    surv = 1.0 - n_exited_by / e.n_paths
    return SurvivalCurve(t_grid, surv, e.n_paths)


def default_window(curve: SurvivalCurve, upper=0.8, lower=None):
    """``[t at P=upper, t at P=max(0.05, 2/n)]``: skips the transient and the noisy tail."""
    if lower is None:
        lower = max(0.05, 2.0 / curve.n_paths)
    s = curve.survival
    below = np.nonzero(s <= upper)[0]
    above = np.nonzero(s >= lower)[0]
    if not below.size or not above.size:
        raise ComputationError("survival curve never enters the default fit window; extend t_max")
    return float(curve.t[below[0]]), float(curve.t[above[-1]])


def estimate_exit_rate(curve: SurvivalCurve, window=None) -> ExitRateEstimate:
    """Least-squares slope of ``-log P(tau > t)`` against ``t`` over ``window``."""
    t_lo, t_hi = default_window(curve) if window is None else map(float, window)
    mask = (curve.t >= t_lo) & (curve.t <= t_hi)
    t = curve.t[mask]
    s = curve.survival[mask]
    if t.size < 5:
        raise ComputationError(f"fit window [{t_lo}, {t_hi}] holds {t.size} points; need at least 5")
    if np.any(s <= 0):
        raise ComputationError(
            "survival reaches zero inside the fit window; shorten the window or simulate more paths"
        )
    y = -np.log(s)
    tm = t.mean()
    sxx = float(np.sum((t - tm) ** 2))
    slope = float(np.sum((t - tm) * (y - y.mean())) / sxx)
    intercept = float(y.mean() - slope * tm)
    resid = y - (intercept + slope * t)
    dof = t.size - 2
    stderr = math.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 else math.nan
    return ExitRateEstimate(slope, intercept, float(t[0]), float(t[-1]), stderr, int(t.size))


def mean_exit_time(e: ExitEnsemble, censor_tolerance=0.01) -> MeanExitTime:
    """Mean over exited paths, flagged when more than 1% of paths are censored.

    With every path censored the mean is reported as the lower bound ``t_max``.
    """
    exits = e.exit_times
    frac = e.n_censored / e.n_paths
    flag = frac > censor_tolerance
    if not exits.size:
        return MeanExitTime(float(e.t_max), math.nan, frac, True)
    se = float(exits.std(ddof=1) / math.sqrt(exits.size)) if exits.size > 1 else math.nan
    return MeanExitTime(float(exits.mean()), se, frac, flag)


@dataclass(frozen=True)
class RateComparison:
    """``lambda_a - lambda_b`` with a paired-bootstrap one-sided bound."""

    lambda_a: float
    lambda_b: float
    difference: float
    lower_bound: float
    confidence: float
    n_boot: int

    @property
    def a_exceeds_b(self):
        """True when ``lambda_a > lambda_b`` at the stated confidence."""
        return self.lower_bound > 0


def paired_rate_comparison(a: ExitEnsemble, b: ExitEnsemble, n_boot=1000, confidence=0.95, seed=0, window=None):
    """Paired-seed comparison of exit rates.

    ``a`` and ``b`` must be driven by the same path streams (same seed and
    path indices). Paths are resampled jointly, so the shared noise cancels
    in the difference. The fit window of each resample is the default one
    unless ``window`` is given.

    Returns
    -------
    RateComparison
        ``lower_bound`` is the ``1 - confidence`` quantile of the bootstrap
        distribution of ``lambda_a - lambda_b``.
    """
    if a.n_paths != b.n_paths or a.seed != b.seed:
        raise ValidationError("paired comparison needs ensembles over the same seed and paths")
    if not 0 < confidence < 1:
        raise ValidationError("confidence must lie in (0, 1)")
    ta, tb = a.path_exit_times, b.path_exit_times
    t_end = max(a.t_max, b.t_max)

    def rates(ia, ib):
        ea = ExitEnsemble(ia, a.seed, a.config)
        eb = ExitEnsemble(ib, b.seed, b.config)
        grid = np.linspace(0.0, min(t_end, _last_exit(ia, a.t_max), _last_exit(ib, b.t_max)), 401)
        ra = estimate_exit_rate(survival_curve(ea, grid), window).lambda_hat
        rb = estimate_exit_rate(survival_curve(eb, grid), window).lambda_hat
        return ra, rb

    la, lb = rates(ta, tb)
    rng = np.random.default_rng(seed)
    diffs = np.empty(n_boot)
    for k in range(n_boot):
        idx = rng.integers(0, ta.size, ta.size)
        ra, rb = rates(ta[idx], tb[idx])
        diffs[k] = ra - rb
    lower = float(np.quantile(diffs, 1.0 - confidence))
    return RateComparison(la, lb, la - lb, lower, confidence, n_boot)


def _last_exit(t, t_max):
    fin = t[np.isfinite(t)]
    if fin.size < t.size or not fin.size:
        return t_max
    return float(fin.max())
