"""Compiled Euler-Maruyama loops for the two built-in drift families.

Per path and step the arithmetic is the same as the vectorized engine in
:mod:`opioid_residence.sde`: ``x <- x + h f(x)``, then
``x[0] <- x[0] + sqrt(eps) (sqrt(h) Z)``, with ``Z`` from the keyed
Philox stream. Paths run in parallel (``prange``); each path only reads its
own counters, so results do not depend on the thread count.
"""
import math

import numba as nb
import numpy as np

from .rng import philox_normal_pair

LINEAR = 0
MODEL = 1


@nb.njit(cache=True, nogil=True, inline="always")
def _model_drift(x, prm, use_policy, K, kc, Bt, umax, f):
    alpha, beta, xi, veps, delta, mu, mu_star, gamma, zeta, nu, sigma = (
        prm[0], prm[1], prm[2], prm[3], prm[4], prm[5], prm[6], prm[7], prm[8], prm[9], prm[10]
    )
    x1 = x[0]
    x2 = x[1]
    x3 = x[2]
    z = 1.0 - x1 - x2 - x3
    b = beta
    f[0] = (
        -alpha * x1
        - b * (1.0 - xi) * x1 * x2
        - b * xi * x1 * z
        + (veps + mu) * z
        + (delta + mu) * x3
        + mu_star * x2
    )
    f[1] = (
        gamma * z
        + sigma * x3
        + b * (1.0 - xi) * x1 * x2
        + b * xi * x1 * z
        + nu * x3 * x2
        - (zeta + mu_star) * x2
    )
    f[2] = zeta * x2 - mu * x3 * x2 - (delta + sigma + mu) * x3
    if use_policy:
        d0 = x1 - kc[0]
        d1 = x2 - kc[1]
        d2 = x3 - kc[2]
        u0 = K[0, 0] * d0 + K[0, 1] * d1 + K[0, 2] * d2
        u1 = K[1, 0] * d0 + K[1, 1] * d1 + K[1, 2] * d2
        if u0 > umax:
            u0 = umax
        elif u0 < -umax:
            u0 = -umax
        if u1 > umax:
            u1 = umax
        elif u1 < -umax:
            u1 = -umax
        for i in range(3):
            f[i] = f[i] + (Bt[i, 0] * u0 + Bt[i, 1] * u1)


@nb.njit(cache=True, nogil=True, inline="always")
def _linear_drift(x, M, c, f):
    d = x.shape[0]
    for i in range(d):
        acc = 0.0
        for j in range(d):
            acc += M[i, j] * (x[j] - c[j])
        f[i] = acc


@nb.njit(cache=True, nogil=True, inline="always")
def _inside(x, G, hv, closed):
    for r in range(G.shape[0]):
        s = 0.0
        for j in range(G.shape[1]):
            s += G[r, j] * x[j]
        if closed[r]:
            if s > hv[r] or s != s:
                return False
        elif not s < hv[r]:
            return False
    return True


@nb.njit(cache=True, parallel=True)
def run_paths(kind, k0, k1, paths, x0, times, dt, h_last, sq_eps, use_stop, G, hv, closed,
              prm, use_policy, K, kc, Bt, umax, M, c, record):
    n = paths.shape[0]
    d = x0.shape[0]
    n_steps = times.shape[0] - 1
    exit_time = np.full(n, np.inf)
    final = np.empty((n, d))
    status = np.zeros(n, dtype=np.int64)
    n_rec = n_steps + 1 if record else 1
    samples = np.empty((n_rec, d))
    n_samples = np.zeros(1, dtype=np.int64)
    for i in nb.prange(n):
        x = x0.copy()
        f = np.empty(d)
        if record:
            samples[0, :] = x
        path = paths[i]
        za = 0.0
        zb = 0.0
        last = 0
        for step in range(n_steps):
            if step % 2 == 0:
                za, zb = philox_normal_pair(k0, k1, path, np.uint64(step // 2))
                zz = za
            else:
                zz = zb
            h = dt if step < n_steps - 1 else h_last
            if kind == 0:
                _linear_drift(x, M, c, f)
            else:
                _model_drift(x, prm, use_policy, K, kc, Bt, umax, f)
            for j in range(d):
                x[j] = x[j] + h * f[j]
            x[0] = x[0] + sq_eps * (math.sqrt(h) * zz)
            last = step + 1
            if record:
                samples[step + 1, :] = x
            finite = True
            for j in range(d):
                if not math.isfinite(x[j]):
                    finite = False
            if not finite:
                status[i] = step + 1
                break
            if use_stop and not _inside(x, G, hv, closed):
                exit_time[i] = times[step + 1]
                break
        final[i, :] = x
        if record:
            n_samples[0] = last + 1
    return exit_time, final, status, samples[: n_samples[0]] if record else samples[:0]
