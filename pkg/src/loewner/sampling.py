"""Deterministic low-discrepancy sample points for balls and spheres in C^q.

Everything here is a pure function of (count, dimension, start offset), so
repeated runs with the same configuration touch exactly the same points.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53)


def halton(count: int, dim: int, start: int = 0) -> np.ndarray:
    """First `count` Halton points in [0, 1)^dim, skipping `start` of them."""
    if dim > len(_PRIMES):
        raise ValueError(f"at most {len(_PRIMES)} dimensions supported")
    out = np.empty((count, dim))
    for d in range(dim):
        base = _PRIMES[d]
        for i in range(count):
            n = start + i + 1  # skip the origin
            f, x = 1.0, 0.0
            while n > 0:
                f /= base
                x += f * (n % base)
                n //= base
            out[i, d] = x
    return out


def complex_ball_points(q: int, radius: float, count: int, start: int = 0) -> np.ndarray:
    """`count` points in the closed euclidean ball of C^q, shape (q, count).

    Halton points in the real cube [-1, 1]^{2q} are filtered to the unit
    ball and scaled; rejection keeps the sequence deterministic.
    """
    if count < 0:
        raise ValueError("count must be >= 0")
    pts = np.empty((q, count), dtype=complex)
    have = 0
    offset = start
    while have < count:
        batch = max(32, 2 * (count - have))
        u = 2.0 * halton(batch, 2 * q, offset) - 1.0
        offset += batch
        norms = np.sqrt((u * u).sum(axis=1))
        good = u[norms <= 1.0]
        take = min(count - have, good.shape[0])
        for i in range(take):
            row = good[i]
            pts[:, have + i] = row[:q] + 1j * row[q:]
        have += take
    return radius * pts


def complex_sphere_points(q: int, radius: float, count: int, start: int = 0) -> np.ndarray:
    """`count` points on the euclidean sphere |z| = radius in C^q, shape (q, count)."""
    u = halton(count, 2 * q, start)
    g = ndtri(np.clip(u, 1e-12, 1.0 - 1e-12))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    return radius * (g[:, :q] + 1j * g[:, q:]).T
