"""Orthonormal shifted Legendre polynomials on [0, 1] and Gauss-Legendre rules.

``P_j(c) = sqrt(2j+1) L_j(2c-1)`` so that the ``P_j`` are orthonormal in
L2[0, 1].  Running integrals use

    int_0^c P_j = xi_{j+1} P_{j+1}(c) - xi_j P_{j-1}(c),   j >= 1,
    int_0^c P_0 = c,

with ``xi_i = 1 / (2 sqrt(|4 i^2 - 1|))``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

K_MAX = 512


class NoConvergence(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    k: int
    nodes: np.ndarray
    weights: np.ndarray

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def xi(i):
    i = np.asarray(i, dtype=float)
    return 0.5 / np.sqrt(np.abs(4.0 * i * i - 1.0))


def legendre_all(s: int, c) -> np.ndarray:
    """Values ``[P_0(c), ..., P_{s-1}(c)]``.

    ``c`` may be an array; the polynomial index is the last axis.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    c = np.asarray(c, dtype=float)
    x = 2.0 * c - 1.0
    L = np.empty(c.shape + (s,))
    L[..., 0] = 1.0
    if s > 1:
        L[..., 1] = x
    for n in range(1, s - 1):
        L[..., n + 1] = ((2 * n + 1) * x * L[..., n] - n * L[..., n - 1]) / (n + 1)
    return L * np.sqrt(2.0 * np.arange(s) + 1.0)


def legendre_int_all(s: int, c) -> np.ndarray:
    """Running integrals ``[int_0^c P_0, ..., int_0^c P_{s-1}]``."""
    if s < 1:
        raise ValueError("s must be >= 1")
    c = np.asarray(c, dtype=float)
    P = legendre_all(s + 1, c)
    out = np.empty(c.shape + (s,))
    out[..., 0] = c
    j = np.arange(1, s)
    out[..., 1:] = xi(j + 1) * P[..., 2:] - xi(j) * P[..., : s - 1]
    return out


def _legendre_and_derivative(k: int, x: np.ndarray):
    # Standard (unnormalized) L_k on [-1, 1] and its derivative.
    p0 = np.ones_like(x)
    p1 = x.copy()
    if k == 0:
        return p0, np.zeros_like(x)
    for n in range(1, k):
        p0, p1 = p1, ((2 * n + 1) * x * p1 - n * p0) / (n + 1)
    dp = k * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


@lru_cache(maxsize=None)
def gauss_rule(k: int) -> QuadratureRule:
    """k-point Gauss-Legendre rule on [0, 1], nodes ascending."""
    if not 1 <= k <= K_MAX:
        raise ValueError(f"k must lie in [1, {K_MAX}], got {k}")
    half = (k + 1) // 2
    i = np.arange(1, half + 1)
    x = np.cos(np.pi * (i - 0.25) / (k + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_derivative(k, x)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) <= 1e-15:
            break
    else:
        raise NoConvergence(f"Newton iteration for Gauss nodes (k={k}) failed")
    # One polishing pass on the converged roots.
    p, dp = _legendre_and_derivative(k, x)
    x = x - p / dp
    _, dp = _legendre_and_derivative(k, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)

    # x is descending in (0, 1]; mirror to get exactly symmetric nodes.
    t = 0.5 * (1.0 - x)  # ascending, in (0, 1/2]
    wt = 0.5 * w
    if k % 2:
        t[-1] = 0.5
        nodes = np.concatenate([t, 1.0 - t[-2::-1]])
        weights = np.concatenate([wt, wt[-2::-1]])
    else:
        nodes = np.concatenate([t, 1.0 - t[::-1]])
        weights = np.concatenate([wt, wt[::-1]])
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return QuadratureRule(k, nodes, weights)
