"""Benchmark problems: Duffing, Fermi-Pasta-Ulam, and a plane-wave NLS.

Second-order problems ``q'' + A^2 q + grad f(q) = 0`` are kept in their
natural (q, q') form for the classical integrators and converted to the
first-order form ``y = (q, p)``, ``p = A^{-1} q'``, for SHBVM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import linalg
from .hbvm import HamiltonianSystem, integrate
from .truncation import select_params


class ModulusOutOfRange(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SecondOrderProblem:
    """``q'' + A^2 q + grad_f(q) = 0`` with Hamiltonian ``(|q'|^2 + |Aq|^2)/2 + f(q)``."""

    A: np.ndarray
    grad_f: Callable[[np.ndarray], np.ndarray]
    f: Callable[[np.ndarray], np.ndarray]
    q0: np.ndarray
    v0: np.ndarray
    t_end: float
    nu: float = 1.0
    omega: float | None = None  # frequency estimate override
    name: str = ""

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def A2(self) -> np.ndarray:
        return self.A @ self.A

    def force(self, q):
        """``q''`` as a function of ``q``."""
        return -(q @ self.A2) - self.grad_f(q)

    def hamiltonian(self, q, v):
        Aq = q @ self.A
        return 0.5 * (np.sum(v * v, axis=-1) + np.sum(Aq * Aq, axis=-1)) + self.f(q)


@dataclass(frozen=True)
class EllipticTriple:
    sn: float | np.ndarray
    cn: float | np.ndarray
    dn: float | np.ndarray


# ---------------------------------------------------------------------------
# first-order conversion


def to_first_order(p2: SecondOrderProblem) -> HamiltonianSystem:
    A = np.asarray(p2.A, dtype=float)
    m = A.shape[0]
    try:
        A_lu = linalg.lu_factor(A)
    except linalg.SingularMatrix as exc:
        raise linalg.SingularMatrix("A must be invertible") from exc
    A_inv = linalg.lu_solve(A_lu, np.eye(m))

    def grad_f(y):
        g = np.zeros_like(y)
        g[..., :m] = p2.grad_f(y[..., :m]) @ A_inv
        return g

    def hamiltonian(y):
        Aq = y[..., :m] @ A
        Ap = y[..., m:] @ A
        return 0.5 * (np.sum(Ap * Ap, axis=-1) + np.sum(Aq * Aq, axis=-1)) + p2.f(y[..., :m])

    omega = p2.omega if p2.omega is not None else linalg.spectral_norm(A)
    big = np.zeros((2 * m, 2 * m))
    big[:m, :m] = A
    big[m:, m:] = A
    return HamiltonianSystem(big, grad_f, hamiltonian, omega=omega, nu=p2.nu, name=p2.name)


def initial_state(p2: SecondOrderProblem) -> np.ndarray:
    return np.concatenate([p2.q0, np.linalg.solve(p2.A, p2.v0)])


def velocities(p2: SecondOrderProblem, y: np.ndarray) -> np.ndarray:
    """Recover ``q'`` from scaled momenta: ``q' = A p``."""
    return y[..., p2.m :] @ p2.A


def scaled_momenta(p2: SecondOrderProblem, v: np.ndarray) -> np.ndarray:
    return np.linalg.solve(p2.A, np.asarray(v).T).T


# ---------------------------------------------------------------------------
# Duffing


def duffing(kappa: float = 7.0, beta: float = 500.0, t_end: float = 20.0) -> SecondOrderProblem:
    """``q'' = -(kappa^2 + beta^2) q + 2 kappa^2 q^3``, ``q(0) = 0``, ``q'(0) = beta``."""
    if not (kappa > 0 and beta > 0):
        raise ValueError("kappa and beta must be positive")
    k2 = kappa * kappa
    A = np.array([[math.sqrt(k2 + beta * beta)]])
    return SecondOrderProblem(
        A=A,
        grad_f=lambda q: -2.0 * k2 * q**3,
        f=lambda q: -0.5 * k2 * np.sum(q**4, axis=-1),
        q0=np.array([0.0]),
        v0=np.array([beta]),
        t_end=t_end,
        nu=3.0,
        name="duffing",
    )


def jacobi_elliptic(u, M: float, tol: float = 1e-16) -> EllipticTriple:
    """sn, cn, dn of argument ``u`` and parameter ``M = k^2`` by descending Landen / AGM.

    ``u`` may be an array.
    """
    if not 0.0 <= M < 1.0:
        raise ModulusOutOfRange(f"parameter M={M} outside [0, 1)")
    u = np.asarray(u, dtype=float)
    if M == 0.0:
        return EllipticTriple(np.sin(u), np.cos(u), np.ones_like(u))
    a = [1.0]
    c = [math.sqrt(M)]
    b = math.sqrt(1.0 - M)
    while abs(c[-1]) > tol and len(a) < 40:
        an = 0.5 * (a[-1] + b)
        c.append(0.5 * (a[-1] - b))
        b = math.sqrt(a[-1] * b)
        a.append(an)
    n = len(a) - 1
    phi = (2.0**n) * a[n] * u
    phis = [phi]
    for i in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c[i] / a[i] * np.sin(phi)))
        phis.append(phi)
    phi0 = phis[-1]
    sn = np.sin(phi0)
    cn = np.cos(phi0)
    # cn / cos(phi1 - phi0) loses digits near zeros of cn; this form does not.
    dn = np.sqrt(1.0 - M * sn * sn)
    if sn.ndim == 0:
        return EllipticTriple(float(sn), float(cn), float(dn))
    return EllipticTriple(sn, cn, dn)


def duffing_exact(t, kappa: float = 7.0, beta: float = 500.0):
    """Exact ``(q, q')`` of the Duffing problem at times ``t``."""
    e = jacobi_elliptic(beta * np.asarray(t, dtype=float), (kappa / beta) ** 2)
    return e.sn, beta * e.cn * e.dn


# ---------------------------------------------------------------------------
# Fermi-Pasta-Ulam


def fpu_omegas(m: int = 8) -> np.ndarray:
    """Stiff spring frequencies: ``10^(i-1)`` then ``(pi - 4 + i) 10^(4-i)`` for m = 8."""
    if m != 8:
        return np.array([10.0 ** (i % 4) for i in range(m)])
    w = [10.0 ** (i - 1) for i in range(1, 5)]
    w += [(math.pi - 4 + i) * 10.0 ** (4 - i) for i in range(1, 5)]
    return np.array(w)


def fpu_quartic(q):
    d = _fpu_soft_diffs(q)
    return np.sum(d**4, axis=-1)


def _fpu_soft_diffs(q):
    # q_{2i+1} - q_{2i}, i = 0..m, with q_0 = q_{2m+1} = 0 (1-based indices).
    z = np.zeros(q.shape[:-1] + (1,))
    padded = np.concatenate([z, q, z], axis=-1)
    return padded[..., 1::2] - padded[..., 0::2]


def fpu_quartic_grad(q):
    d3 = 4.0 * _fpu_soft_diffs(q) ** 3
    g = np.empty_like(q)
    g[..., 0::2] = d3[..., :-1]
    g[..., 1::2] = -d3[..., 1:]
    return g


def fpu(m: int = 8, omegas=None, t_end: float = 10.0) -> SecondOrderProblem:
    """FPU chain of ``2m`` unit masses, alternating stiff linear and soft cubic springs."""
    if m < 1:
        raise ValueError("m must be >= 1")
    omegas = fpu_omegas(m) if omegas is None else np.asarray(omegas, dtype=float)
    n = 2 * m
    S = np.zeros((n, n))
    for i, w in enumerate(omegas):
        blk = slice(2 * i, 2 * i + 2)
        S[blk, blk] = w * w * np.array([[1.0, -1.0], [-1.0, 1.0]])
    eig = linalg.sym_eig(S)
    # Zero modes of S are moved to eigenvalue 1; the shift is subtracted again in grad f.
    zero = eig.eigenvalues <= 1e-12 * max(1.0, eig.eigenvalues[-1])
    shift = eig.matrix(zero.astype(float))
    A = eig.matrix(np.sqrt(np.where(zero, 1.0, eig.eigenvalues)))
    A = 0.5 * (A + A.T)
    q0 = np.arange(n) / (2.0 * (2 * m - 1))
    return SecondOrderProblem(
        A=A,
        grad_f=lambda q: fpu_quartic_grad(q) - q @ shift,
        f=lambda q: fpu_quartic(q) - 0.5 * np.sum((q @ shift) * q, axis=-1),
        q0=q0,
        v0=np.zeros(n),
        t_end=t_end,
        nu=3.0,
        omega=float(np.max(omegas)),
        name="fpu",
    )


def fpu_potential(q, omegas=None):
    """Unshifted potential of the FPU chain (stiff springs plus quartic part)."""
    omegas = fpu_omegas(q.shape[-1] // 2) if omegas is None else omegas
    stretch = q[..., 1::2] - q[..., 0::2]
    return 0.5 * np.sum(omegas**2 * stretch**2, axis=-1) + fpu_quartic(q)


# ---------------------------------------------------------------------------
# nonlinear Schroedinger, plane-wave solution


@dataclass(frozen=True, eq=False)
class NLSData:
    r: int
    kappa: float
    D2: np.ndarray  # diagonal of D^2, ordering (c_0..c_r, s_1..s_r)
    W: np.ndarray  # basis values at the trapezoidal nodes, (n_pts, 2r+1)
    weight: float  # trapezoidal weight 2 pi / n_pts

    @property
    def n(self) -> int:
        return 2 * self.r + 1

    @property
    def mu(self) -> float:
        return self.r * self.r - self.kappa


def nls_data(r: int, kappa: float) -> NLSData:
    if r < 1:
        raise ValueError("r must be >= 1")
    j = np.arange(r + 1)
    D = np.concatenate([j, j[1:]]).astype(float)
    n_pts = 4 * r + 1
    x = 2.0 * np.pi * np.arange(n_pts) / n_pts
    norm = np.sqrt((2.0 - (j == 0)) / (2.0 * np.pi))
    C = norm * np.cos(np.outer(x, j))
    S = norm[1:] * np.sin(np.outer(x, j[1:]))
    return NLSData(r, kappa, D * D, np.hstack([C, S]), 2.0 * np.pi / n_pts)


def nls(r: int = 20, kappa: float = math.pi / 10) -> HamiltonianSystem:
    """Fourier-Galerkin semi-discretization of ``i psi_t + psi_xx + kappa |psi|^2 psi = 0``.

    State ``y = (q, p)`` with ``q`` the cosine/sine coefficients of Re psi and
    ``p`` those of Im psi.  The spatial integrals use the trapezoidal rule on
    ``4r + 1`` points, which is exact for the quartic terms.
    """
    d = nls_data(r, kappa)
    n = d.n
    lin = d.D2.copy()
    lin[0] = 1.0  # zero mode shifted to 1, compensated in grad_f
    A = np.diag(np.concatenate([lin, lin]))

    def density(y):
        U = y[..., :n] @ d.W.T
        V = y[..., n:] @ d.W.T
        return U, V, U * U + V * V

    def grad_f(y):
        U, V, R = density(y)
        g = np.empty_like(y)
        g[..., :n] = -kappa * d.weight * ((R * U) @ d.W)
        g[..., n:] = -kappa * d.weight * ((R * V) @ d.W)
        g[..., 0] -= y[..., 0]
        g[..., n] -= y[..., n]
        return g

    def hamiltonian(y):
        _, _, R = density(y)
        quad = np.sum(np.concatenate([d.D2, d.D2]) * y * y, axis=-1)
        return 0.5 * quad - 0.25 * kappa * d.weight * np.sum(R * R, axis=-1)

    return HamiltonianSystem(A, grad_f, hamiltonian, omega=float(r * r), nu=1.0, name="nls")


def nls_exact(t, r: int = 20, kappa: float = math.pi / 10) -> np.ndarray:
    """Coefficients of ``psi = exp(i (r x - mu t))``; rows follow ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    n = 2 * r + 1
    mu = r * r - kappa
    y = np.zeros((t.size, 2 * n))
    a = math.sqrt(math.pi)
    y[:, r] = a * np.cos(mu * t)  # xi_r
    y[:, n - 1] = a * np.sin(mu * t)  # eta_r
    y[:, n + r] = -a * np.sin(mu * t)  # alpha_r
    y[:, 2 * n - 1] = a * np.cos(mu * t)  # beta_r
    return y


# ---------------------------------------------------------------------------
# reference solutions


def reference_trajectory(sys: HamiltonianSystem, y0, T: float, N: int, refine: int = 8) -> np.ndarray:
    """SHBVM solution on the grid ``T n / N`` computed with stepsize ``T / (refine N)``."""
    h = T / (refine * N)
    params = select_params(sys.omega, h, sys.nu)
    traj = integrate(sys, y0, h, refine * N, params)
    return traj.y[::refine]
