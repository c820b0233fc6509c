"""Counter-based Gaussian streams.

Every standard normal draw is a pure function of ``(seed, path_index,
step_index)``, so ensembles can be generated in any order, in any chunking,
on any number of threads, and still reproduce bit for bit.

Algorithm
---------
1. Philox4x32-10 (Salmon et al., SC'11) with the 64-bit seed as key and the
   128-bit counter ``(pair_lo, pair_hi, path_lo, path_hi)`` where
   ``pair = step_index // 2``.
2. The four 32-bit output words become two 53-bit uniforms
   ``u = ((w0 >> 5) * 2**26 + (w1 >> 6)) / 2**53``.
3. Box-Muller: ``r = sqrt(-2 log(1 - u_a))``, ``theta = 2 pi u_b``. Even
   steps take ``r cos(theta)``, odd steps ``r sin(theta)``.
"""
from __future__ import annotations

import math

import numba as nb
import numpy as np

__all__ = ["philox4x32", "standard_normals", "normal_block", "GaussianStream", "gaussian_stream"]

_MASK32 = np.uint64(0xFFFFFFFF)
_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = 0x9E3779B9
_W1 = 0xBB67AE85
_SHIFT32 = np.uint64(32)
_ROUNDS = 10


def _split64(value):
    v = np.asarray(value, dtype=np.uint64)
    return v & _MASK32, v >> _SHIFT32


def philox4x32(counter, key, rounds=_ROUNDS):
    """Philox4x32 block function.

    Parameters
    ----------
    counter : sequence of four arrays of 32-bit words (broadcastable)
    key : pair of 32-bit words
    rounds : int

    Returns
    -------
    tuple of four ``uint64`` arrays holding 32-bit values
    """
    c0, c1, c2, c3 = (np.asarray(c, dtype=np.uint64) & _MASK32 for c in counter)
    k0, k1 = int(key[0]) & 0xFFFFFFFF, int(key[1]) & 0xFFFFFFFF
    for r in range(rounds):
        if r:
            k0 = (k0 + _W0) & 0xFFFFFFFF
            k1 = (k1 + _W1) & 0xFFFFFFFF
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0, lo0 = p0 >> _SHIFT32, p0 & _MASK32
        hi1, lo1 = p1 >> _SHIFT32, p1 & _MASK32
        c0, c1, c2, c3 = hi1 ^ c1 ^ np.uint64(k0), lo1, hi0 ^ c3 ^ np.uint64(k1), lo0
    return c0, c1, c2, c3


def seed_key(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed & 0xFFFFFFFF, seed >> 32


def _normal_pairs(seed, path, pair):
    """Both Box-Muller outputs for counters ``(pair, path)``; shapes broadcast."""
    path_lo, path_hi = _split64(path)
    pair_lo, pair_hi = _split64(pair)
    w0, w1, w2, w3 = philox4x32((pair_lo, pair_hi, path_lo, path_hi), seed_key(seed))
    scale = 1.0 / 9007199254740992.0  # 2**-53
    ua = ((w0 >> np.uint64(5)).astype(np.float64) * 67108864.0 + (w1 >> np.uint64(6)).astype(np.float64)) * scale
    ub = ((w2 >> np.uint64(5)).astype(np.float64) * 67108864.0 + (w3 >> np.uint64(6)).astype(np.float64)) * scale
    r = np.sqrt(-2.0 * np.log1p(-ua))
    theta = 2.0 * np.pi * ub
    return r * np.cos(theta), r * np.sin(theta)


@nb.njit(cache=True, nogil=True, inline="always")
def philox_normal_pair(k0, k1, path, pair):
    """Compiled Philox4x32-10 + Box-Muller for one counter; returns two normals."""
    mask = np.uint64(0xFFFFFFFF)
    s32 = np.uint64(32)
    m0 = np.uint64(0xD2511F53)
    m1 = np.uint64(0xCD9E8D57)
    c0 = pair & mask
    c1 = pair >> s32
    c2 = path & mask
    c3 = path >> s32
    ka = np.uint64(k0)
    kb = np.uint64(k1)
    for r in range(10):
        if r > 0:
            ka = (ka + np.uint64(0x9E3779B9)) & mask
            kb = (kb + np.uint64(0xBB67AE85)) & mask
        q0 = m0 * c0
        q1 = m1 * c2
        n0 = (q1 >> s32) ^ c1 ^ ka
        n2 = (q0 >> s32) ^ c3 ^ kb
        c1 = q1 & mask
        c3 = q0 & mask
        c0 = n0
        c2 = n2
    ua = (float(c0 >> np.uint64(5)) * 67108864.0 + float(c1 >> np.uint64(6))) * (1.0 / 9007199254740992.0)
    ub = (float(c2 >> np.uint64(5)) * 67108864.0 + float(c3 >> np.uint64(6))) * (1.0 / 9007199254740992.0)
    rad = math.sqrt(-2.0 * math.log1p(-ua))
    theta = 2.0 * math.pi * ub
    return rad * math.cos(theta), rad * math.sin(theta)


@nb.njit(cache=True, nogil=True)
def _block_kernel(k0, k1, paths, first_pair, npairs, out):
    for i in range(paths.shape[0]):
        for j in range(npairs):
            a, b = philox_normal_pair(k0, k1, paths[i], np.uint64(first_pair + j))
            out[i, 2 * j] = a
            out[i, 2 * j + 1] = b


@nb.njit(cache=True, nogil=True)
def _elementwise_kernel(k0, k1, paths, steps, out):
    tmp = np.empty((1, 2))
    one = np.empty(1, dtype=np.uint64)
    for i in range(paths.shape[0]):
        one[0] = paths[i]
        _block_kernel(k0, k1, one, steps[i] // 2, 1, tmp)
        out[i] = tmp[0, steps[i] % 2]


def standard_normals(seed, path_index, step_index):
    """Standard normal draw for each ``(path_index, step_index)`` (broadcast)."""
    k0, k1 = seed_key(seed)
    p, s = np.broadcast_arrays(np.asarray(path_index, dtype=np.uint64), np.asarray(step_index, dtype=np.int64))
    out = np.empty(p.size)
    _elementwise_kernel(k0, k1, np.ascontiguousarray(p.ravel()), np.ascontiguousarray(s.ravel()), out)
    return out.reshape(p.shape)


def normal_block(seed, paths, step0, nsteps):
    """Draws for ``paths`` (1-D integer array) and steps ``step0 .. step0+nsteps-1``.

    Returns an array of shape ``(len(paths), nsteps)`` equal elementwise to
    :func:`standard_normals` (compiled kernel, same arithmetic).
    """
    k0, k1 = seed_key(seed)
    paths = np.ascontiguousarray(np.asarray(paths, dtype=np.uint64).reshape(-1))
    first_pair = int(step0) // 2
    npairs = (int(step0) + int(nsteps) - 1) // 2 - first_pair + 1
    inter = np.empty((paths.shape[0], 2 * npairs))
    _block_kernel(k0, k1, paths, first_pair, npairs, inter)
    offset = int(step0) - 2 * first_pair
    return inter[:, offset:offset + nsteps]


class GaussianStream:
    """Sequential view on the draws of one path.

    >>> s = GaussianStream(seed=7, path_index=3)
    >>> first = s.draw(4)
    >>> bool((GaussianStream(7, 3).draw(4) == first).all())
    True
    """

    def __init__(self, seed, path_index, start=0):
        seed_key(seed)
        self.seed = int(seed)
        self.path_index = int(path_index)
        self.position = int(start)

    def draw(self, n):
        out = normal_block(self.seed, [self.path_index], self.position, n)[0]
        self.position += n
        return out

    def __iter__(self):
        while True:
            yield from self.draw(256)


def gaussian_stream(seed, path_index, start=0):
    """Deterministic stream of standard normals for one path."""
    return GaussianStream(seed, path_index, start)
