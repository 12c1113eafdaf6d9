"""Round-off level truncation of the Legendre expansion.

The Legendre-Fourier coefficients of ``cos(x c)`` and ``sin(x c)`` on [0, 1]
are bounded by

    g(s, x) = sqrt((2s+1) pi / x) |J_{s+1/2}(x/2)| = sqrt(2s+1) |j_s(x/2)|,

with ``j_s`` the spherical Bessel function.  ``phi_u(x)`` is the first index
where ``g`` drops below ``u`` times its running maximum; it fixes the number
of expansion terms for the linear part (``s0``) and, with the frequency
scaled by the ansatz degree ``nu``, for the full problem (``s``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Unit round-off of IEEE double.  Half of numpy's ``finfo(float).eps``.
U_DOUBLE = 2.0**-53
MACHINE_EPS = 2.0**-52
S_CAP = 1024

_RESCALE = 1e250


class TruncationOverflow(ArithmeticError):
    """No truncation index up to the scan cap satisfies the criterion."""


@dataclass(frozen=True)
class SpectralParams:
    s0: int
    s: int
    k: int
    omega_h: float
    nu: float
    u: float = U_DOUBLE

    def __post_init__(self):
        if min(self.s0, self.s, self.k) < 1:
            raise ValueError("all counts must be >= 1")
        if self.s0 > self.s:
            raise ValueError(f"s0={self.s0} exceeds s={self.s}")


def spherical_bessel_j(s_max: int, x: float) -> np.ndarray:
    """``[j_0(x), ..., j_{s_max}(x)]`` by Miller's downward recurrence.

    The unnormalized sequence is scaled with ``sum (2n+1) j_n^2 = 1`` and the
    sign is taken from whichever of ``j_0``, ``j_1`` is larger in modulus, so
    zeros of ``sin x`` do not spoil the normalization.
    """
    if not x > 0:
        raise ValueError("x must be positive")
    if s_max < 0 or s_max > S_CAP:
        raise ValueError(f"s_max must lie in [0, {S_CAP}]")
    # The recurrence must start well past both s_max and the turning point n ~ x.
    start = max(s_max, int(math.ceil(x))) + int(math.ceil(max(20.0, x)))
    vals = np.zeros(start + 2)
    vals[start] = 1e-300
    for n in range(start, 0, -1):
        vals[n - 1] = (2 * n + 1) / x * vals[n] - vals[n + 1]
        if abs(vals[n - 1]) > _RESCALE:
            vals[n - 1 :] /= _RESCALE
    vals = vals[: start + 1]
    vals = vals / np.max(np.abs(vals))
    norm = math.sqrt(math.fsum((2 * np.arange(start + 1) + 1) * vals * vals))
    vals = vals / norm
    j0 = math.sin(x) / x
    j1 = math.sin(x) / (x * x) - math.cos(x) / x
    if abs(j0) >= abs(j1):
        sign = math.copysign(1.0, j0 * vals[0])
    else:
        sign = math.copysign(1.0, j1 * vals[1])
    out = sign * vals[: s_max + 1]
    out[np.abs(out) < 1e-308] = 0.0
    return out


def g_bound_all(s_max: int, x: float) -> np.ndarray:
    """``[g(0, x), ..., g(s_max, x)]``."""
    j = spherical_bessel_j(s_max, 0.5 * x)
    return np.sqrt(2.0 * np.arange(s_max + 1) + 1.0) * np.abs(j)


def g_bound(s: int, x: float) -> float:
    return float(g_bound_all(s, x)[s])


def phi_u(x: float, u: float = U_DOUBLE) -> int:
    """Smallest ``s0 >= 1`` with ``g(s0, x) < u * max_{j < s0} g(j, x)``."""
    if not x > 0:
        raise ValueError("x must be positive")
    if not 0 < u < 1:
        raise ValueError("u must lie in (0, 1)")
    s_max = min(S_CAP, 64 + int(2 * x))
    while True:
        g = g_bound_all(s_max, x)
        running = np.maximum.accumulate(g)
        hits = np.nonzero(g[1:] < u * running[:-1])[0]
        if hits.size:
            return int(hits[0]) + 1
        if s_max >= S_CAP:
            raise TruncationOverflow(f"no truncation index <= {S_CAP} for x={x}")
        s_max = min(S_CAP, 2 * s_max)


def select_params(omega: float, h: float, nu: float = 1.0, u: float = U_DOUBLE) -> SpectralParams:
    """(s0, s, k) for stepsize ``h`` and frequency estimate ``omega``."""
    if not (omega > 0 and h > 0):
        raise ValueError("omega and h must be positive")
    if nu < 1:
        raise ValueError("nu must be >= 1")
    x = omega * h
    s0 = phi_u(x, u)
    s = phi_u(nu * x, u)
    return SpectralParams(s0=s0, s=s, k=max(s + 2, 20), omega_h=x, nu=nu, u=u)
