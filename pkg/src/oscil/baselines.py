"""Classical second-order integrators used as baselines.

All methods advance ``(q, v)`` with ``v = q'`` for ``q'' = -A^2 q + g(q)``,
``g = -grad f``.  The trigonometric ones share the symmetric one-step form

    q1 = cos(hA) q + A^{-1} sin(hA) v + h^2/2 Psi g(q)
    v1 = -A sin(hA) q + cos(hA) v + h/2 (Psi0 g(q) + Psi1 g(q1))

with ``Psi = psi(hA)``, ``psi(x) = sinc(x) psi1(x)`` and ``psi0 = cos psi1``:

    Gautschi:   psi = sinc^2(x/2),  psi1 = tan(x/2) / (x/2)
    Deuflhard:  psi = sinc(x),      psi1 = 1

Both reduce to Stoermer-Verlet as ``hA -> 0`` and are exact when ``g = 0``.
Gautschi's ``psi1`` is singular at ``hA`` eigenvalues equal to odd multiples
of pi, where the velocity update is undefined.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import linalg
from .problems import SecondOrderProblem

METHODS = ("sv", "gautschi", "deuflhard")

_SERIES_CUT = 1e-4


class UnknownMethod(KeyError):
    pass


def sinc(x):
    """``sin(x)/x`` with the removable singularity filled in."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_CUT
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - x * x / 6.0, np.sin(safe) / safe)


def tanc_half(x):
    """``tan(x/2)/(x/2)``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < _SERIES_CUT
    half = np.where(small, 1.0, 0.5 * x)
    return np.where(small, 1.0 + x * x / 12.0, np.tan(half) / half)


@dataclass(frozen=True, eq=False)
class TrigKernel:
    """Matrix functions of ``hA`` for one ``(h, A)`` pair.

    The per-eigenvalue arrays are kept for inspection; the ``*_mat`` fields
    are the assembled symmetric matrices used by the steppers.
    """

    h: float
    eig: linalg.SymEig
    cos: np.ndarray
    sin: np.ndarray
    sinc: np.ndarray
    sinc2_half: np.ndarray
    cos_mat: np.ndarray
    sin_over_a_mat: np.ndarray  # A^{-1} sin(hA)
    a_sin_mat: np.ndarray  # A sin(hA)

    @classmethod
    def build(cls, A, h: float) -> "TrigKernel":
        eig = linalg.sym_eig(np.atleast_2d(A))
        lam = eig.eigenvalues
        x = h * lam
        s = sinc(x)
        return cls(
            h=h,
            eig=eig,
            cos=np.cos(x),
            sin=np.sin(x),
            sinc=s,
            sinc2_half=sinc(0.5 * x) ** 2,
            cos_mat=eig.matrix(np.cos(x)),
            sin_over_a_mat=eig.matrix(h * s),
            a_sin_mat=eig.matrix(lam * np.sin(x)),
        )

    def apply(self, fvals, v):
        """``f(hA) v`` given the values of ``f`` at the eigenvalues of ``hA``."""
        return self.eig.apply(fvals, v)

    def filters(self, method: str):
        """``(Psi, Psi0, Psi1)`` matrices of a trigonometric method."""
        x = self.h * self.eig.eigenvalues
        if method == "gautschi":
            psi1 = tanc_half(x)
            psi = self.sinc2_half
        elif method == "deuflhard":
            psi1 = np.ones_like(x)
            psi = self.sinc
        else:
            raise UnknownMethod(method)
        return self.eig.matrix(psi), self.eig.matrix(self.cos * psi1), self.eig.matrix(psi1)


def _g(p2: SecondOrderProblem, q):
    return -p2.grad_f(q)


def stormer_verlet_step(q, v, h: float, p2: SecondOrderProblem):
    """Leapfrog: half kick, drift, half kick."""
    v_half = v + 0.5 * h * p2.force(q)
    q1 = q + h * v_half
    return q1, v_half + 0.5 * h * p2.force(q1)


def _trig_step(q, v, g0, h, p2, kernel: TrigKernel, filt):
    Psi, Psi0, Psi1 = filt
    q1 = q @ kernel.cos_mat + v @ kernel.sin_over_a_mat + (0.5 * h * h) * (g0 @ Psi)
    g1 = _g(p2, q1)
    v1 = -(q @ kernel.a_sin_mat) + v @ kernel.cos_mat + (0.5 * h) * (g0 @ Psi0 + g1 @ Psi1)
    return q1, v1, g1


def gautschi_step(q, v, h: float, p2: SecondOrderProblem, kernel: TrigKernel):
    q = np.asarray(q, dtype=float)
    q1, v1, _ = _trig_step(q, v, _g(p2, q), h, p2, kernel, kernel.filters("gautschi"))
    return q1, v1


def deuflhard_step(q, v, h: float, p2: SecondOrderProblem, kernel: TrigKernel):
    q = np.asarray(q, dtype=float)
    q1, v1, _ = _trig_step(q, v, _g(p2, q), h, p2, kernel, kernel.filters("deuflhard"))
    return q1, v1


@dataclass
class SecondOrderTrajectory:
    t: np.ndarray
    q: np.ndarray  # (N+1, m)
    v: np.ndarray
    energy: np.ndarray


def integrate_classical(p2: SecondOrderProblem, method: str, h: float, N: int) -> SecondOrderTrajectory:
    """``N`` constant steps of ``method`` in ``METHODS``."""
    if method not in METHODS:
        raise UnknownMethod(method)
    if N < 1:
        raise ValueError("N must be >= 1")
    m = p2.m
    Q = np.empty((N + 1, m))
    V = np.empty((N + 1, m))
    q = np.array(p2.q0, dtype=float)
    v = np.array(p2.v0, dtype=float)
    Q[0], V[0] = q, v
    if method == "sv":
        force = p2.force
        a = force(q)
        for n in range(1, N + 1):
            v = v + 0.5 * h * a
            q = q + h * v
            a = force(q)
            v = v + 0.5 * h * a
            Q[n], V[n] = q, v
    else:
        kernel = TrigKernel.build(p2.A, h)
        filt = kernel.filters(method)
        g = _g(p2, q)
        for n in range(1, N + 1):
            q, v, g = _trig_step(q, v, g, h, p2, kernel, filt)
            Q[n], V[n] = q, v
    energy = np.asarray(p2.hamiltonian(Q, V), dtype=float)
    return SecondOrderTrajectory(h * np.arange(N + 1), Q, V, energy)


def exact_linear_flow(q, v, h: float, A):
    """Exact ``(q, v)`` after time ``h`` for ``q'' = -A^2 q``."""
    eig = linalg.sym_eig(np.atleast_2d(A))
    x = h * eig.eigenvalues
    q1 = eig.apply(np.cos(x), q) + eig.apply(np.sin(x) / eig.eigenvalues, v)
    v1 = -eig.apply(eig.eigenvalues * np.sin(x), q) + eig.apply(np.cos(x), v)
    return q1, v1


def observed_rate(e_coarse: float, e_fine: float, ratio: float = 2.0) -> float:
    return math.log(e_coarse / e_fine) / math.log(ratio)
