"""Spectral HBVM(k, s, s0) one-step integrator for ``y' = J [A y + grad f(y)]``.

The unknowns of one step are the ``s`` Legendre coefficients ``psi_j`` of the
vector field along the step.  They solve

    G(psi) = psi - (P_s^T Omega kron I) F(e kron y0 + h (I_s kron I) psi) = 0,

with ``F`` the vector field evaluated at the ``k`` Gauss nodes, and the new
point is ``y1 = y0 + h psi_0``.  ``G = 0`` is solved by the blended
iteration, which only needs one factorization of ``I - h rho_s J A`` for the
whole integration, and is started from the solution of the linear part
truncated at ``s0`` terms.

For large ``omega h`` the blended iteration amplifies round-off transiently,
which leaves a residual well above ``u |psi|``.  A few refinement sweeps with
the exact inverse of the linear part, ``I - h X_s kron J A``, remove it; this
is what makes the energy error round-off level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np

from . import linalg, polybasis
from .truncation import U_DOUBLE, SpectralParams

log = logging.getLogger(__name__)

DEFAULT_MAX_ITER = 100


class NoConvergence(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class SolverDiverged(RuntimeError):
    def __init__(self, step: int, cause: Exception | None = None):
        super().__init__(f"solver failed at step {step}: {cause}")
        self.step = step
        self.cause = cause


class NonFiniteEvaluation(FloatingPointError):
    pass


def apply_J(v: np.ndarray) -> np.ndarray:
    """``(J_2 kron I_m) v`` along the last axis."""
    m = v.shape[-1] // 2
    return np.concatenate([v[..., m:], -v[..., :m]], axis=-1)


@dataclass(frozen=True, eq=False)
class HamiltonianSystem:
    """``y' = J [A y + grad_f(y)]`` with ``J = J_2 kron I_m``.

    ``grad_f`` and ``hamiltonian`` must accept stacked states (any leading
    axes, state along the last one).
    """

    A: np.ndarray
    grad_f: Callable[[np.ndarray], np.ndarray]
    hamiltonian: Callable[[np.ndarray], np.ndarray]
    omega: float
    nu: float = 1.0
    name: str = ""

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 2:
            raise ValueError(f"A must be square of even order, got {A.shape}")
        if np.max(np.abs(A - A.T)) > 1e-12 * max(1.0, np.max(np.abs(A))):
            raise linalg.NotSymmetric("A must be symmetric")
        object.__setattr__(self, "A", A)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.dim // 2

    @cached_property
    def JA(self) -> np.ndarray:
        return apply_J(self.A.T).T

    def rhs(self, y: np.ndarray) -> np.ndarray:
        return apply_J(y @ self.A + self.grad_f(y))


@dataclass(frozen=True, eq=False)
class CoefficientSet:
    s: int
    k: int
    quad: polybasis.QuadratureRule
    Ps: np.ndarray  # k x s, P_j(c_i)
    Is: np.ndarray  # k x s, int_0^{c_i} P_j
    Xs: np.ndarray  # s x s
    rho: float
    Xs_lu: linalg.LUFactorization
    PtO: np.ndarray  # s x k, P_s^T Omega
    rho_Xinv: np.ndarray  # rho_s X_s^{-1}, formed once from the LU factors

    @property
    def Omega(self) -> np.ndarray:
        return np.diag(self.quad.weights)


def x_matrix(s: int) -> np.ndarray:
    """Banded closed form of ``P_s^T Omega I_s``."""
    X = np.zeros((s, s))
    X[0, 0] = 0.5
    i = np.arange(1, s)
    X[i, i - 1] = polybasis.xi(i)
    X[i - 1, i] = -polybasis.xi(i)
    return X


@lru_cache(maxsize=64)
def build_coefficients(s: int, k: int) -> CoefficientSet:
    if not 1 <= s <= k:
        raise ValueError(f"need 1 <= s <= k, got s={s}, k={k}")
    quad = polybasis.gauss_rule(k)
    Ps = polybasis.legendre_all(s, quad.nodes)
    Is = polybasis.legendre_int_all(s, quad.nodes)
    PtO = Ps.T * quad.weights
    Xs = x_matrix(s)
    defect = np.max(np.abs(PtO @ Is - Xs))
    if defect > 1e-11:
        raise AssertionError(f"P^T Omega I differs from X_s by {defect:.3e} (s={s}, k={k})")
    rho = linalg.small_eigenvalue_min_modulus(Xs)
    Xs_lu = linalg.lu_factor(Xs)
    rho_Xinv = rho * linalg.lu_solve(Xs_lu, np.eye(s))
    for a in (Ps, Is, Xs, PtO, rho_Xinv):
        a.flags.writeable = False
    return CoefficientSet(s, k, quad, Ps, Is, Xs, rho, Xs_lu, PtO, rho_Xinv)


@dataclass(frozen=True, eq=False)
class BlendedWorkspace:
    """``Sigma = (I - h rho_s J A)^{-1}`` shared by every step at fixed ``h``."""

    sigma_lu: linalg.LUFactorization
    sigma_T: np.ndarray  # Sigma^T, so that row blocks map as ``blocks @ sigma_T``
    h: float
    rho: float
    tol: float
    max_iter: int
    s0: int
    refiner: LinearPartSolver | None = None
    warm_solver: LinearPartSolver | None = None
    max_refine: int = 30

    def sigma(self, blocks: np.ndarray) -> np.ndarray:
        """Apply ``Sigma`` to every row-block of an ``(n_blocks, 2m)`` array."""
        return blocks @ self.sigma_T


class LinearPartSolver:
    """Exact inverse of ``psi -> psi - h X_s psi (J A)^T``.

    When ``A = I_2 kron A_m`` the problem decouples over the eigenvectors of
    ``A_m``: mode ``d`` gives the complex system ``(I + i h d X_s) w = b_q + i b_p``.
    Other matrices fall back to one dense LU of the full Kronecker system.
    """

    def __init__(self, sys: HamiltonianSystem, h: float, coeff: CoefficientSet):
        m, s = sys.m, coeff.s
        A = sys.A
        Am = A[:m, :m]
        self._blocked = (
            not np.any(A[:m, m:]) and not np.any(A[m:, :m]) and np.array_equal(Am, A[m:, m:])
        )
        if self._blocked:
            eig = linalg.sym_eig(Am)
            self._Q = eig.eigenvectors
            d = eig.eigenvalues
            M = np.eye(s)[None] + 1j * h * d[:, None, None] * coeff.Xs[None]
            self._Minv = np.linalg.inv(M)
        else:
            self._lu = linalg.lu_factor(np.eye(s * sys.dim) - h * np.kron(coeff.Xs, sys.JA))
        self.m = m

    def solve(self, b: np.ndarray) -> np.ndarray:
        if not self._blocked:
            return linalg.lu_solve(self._lu, b.ravel()).reshape(b.shape)
        Q, m = self._Q, self.m
        w = (b[:, :m] @ Q) + 1j * (b[:, m:] @ Q)
        x = np.einsum("lij,jl->il", self._Minv, w)
        return np.concatenate([x.real @ Q.T, x.imag @ Q.T], axis=1)


def default_tol(omega: float, u: float = U_DOUBLE) -> float:
    return 10.0 * u * max(1.0, omega)


def make_workspace(
    sys: HamiltonianSystem,
    h: float,
    coeff: CoefficientSet,
    s0: int | None = None,
    tol: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    refine: bool = True,
) -> BlendedWorkspace:
    s0 = coeff.s if s0 is None else s0
    if s0 > coeff.s:
        raise ValueError(f"s0={s0} exceeds s={coeff.s}")
    M = np.eye(sys.dim) - h * coeff.rho * sys.JA
    lu = linalg.lu_factor(M)
    return BlendedWorkspace(
        sigma_lu=lu,
        sigma_T=linalg.lu_solve(lu, np.eye(sys.dim)).T.copy(),
        h=h,
        rho=coeff.rho,
        tol=default_tol(sys.omega) if tol is None else tol,
        max_iter=max_iter,
        s0=s0,
        refiner=LinearPartSolver(sys, h, coeff) if refine else None,
        warm_solver=LinearPartSolver(sys, h, build_coefficients(s0, s0)) if refine else None,
    )


@dataclass
class StepDiagnostics:
    warm_iters: int = 0
    main_iters: int = 0
    refine_iters: int = 0
    stalled: bool = False  # blended iteration handed over before converging
    final_update_norm: float = 0.0
    residual_norm: float = 0.0


def stage_states(psi, y0, h, coeff: CoefficientSet) -> np.ndarray:
    return y0 + h * (coeff.Is @ psi)


def residual_G(psi, y0, h, sys: HamiltonianSystem, coeff: CoefficientSet) -> np.ndarray:
    F = sys.rhs(stage_states(psi, y0, h, coeff))
    if not np.all(np.isfinite(F)):
        raise NonFiniteEvaluation("vector field returned non-finite values")
    return psi - coeff.PtO @ F


def blended_sweep(psi, G_val, ws: BlendedWorkspace, coeff: CoefficientSet):
    """One blended-iteration update; returns ``(psi + delta, ||delta||_inf)``."""
    eta = -G_val
    eta1 = coeff.rho_Xinv @ eta
    u = ws.sigma(eta - eta1)
    delta = ws.sigma(eta1 + u)
    return psi + delta, float(np.abs(delta).max())


# Updates that stop shrinking below STALL_FACTOR * tol are at the round-off floor.
STALL_FACTOR = 100.0
# Sweeps without a new smallest update before the blended iteration hands over,
# and the transient growth over the best update that triggers the same.
STALL_WINDOW = 5
GROWTH_LIMIT = 1e3


class _Monitor:
    """Classifies successive update norms: converged, at the floor, or stalled."""

    def __init__(self, tol: float):
        self.tol = tol
        self.prev = np.inf
        self.best = np.inf
        self.since_best = 0

    def update(self, dnorm: float, psi) -> str | None:
        scale = max(1.0, float(np.abs(psi).max()))
        prev, self.prev = self.prev, dnorm
        if dnorm < self.best:
            self.best, self.since_best = dnorm, 0
        else:
            self.since_best += 1
        if dnorm <= self.tol * scale:
            return "converged"
        if dnorm >= prev and dnorm <= STALL_FACTOR * self.tol * scale:
            return "floor"
        if self.since_best >= STALL_WINDOW or dnorm > GROWTH_LIMIT * self.best:
            return "stalled"
        return None


def _converged(dnorm, prev, psi, tol) -> bool:
    mon = _Monitor(tol)
    mon.prev = prev
    return mon.update(dnorm, psi) in ("converged", "floor")


def _warm_base(y0, JA, s0):
    base = np.zeros((s0, JA.shape[0]))
    base[0] = JA @ y0
    return base


def warm_start(y0, h, sys: HamiltonianSystem, s0: int, s: int, ws: BlendedWorkspace):
    """Initial ``psi`` from the linear part, expanded to ``s0`` terms.

    Returns ``(psi0, iterations)``.  With an exact linear solver in the
    workspace the linear problem is solved directly (one "iteration").
    Otherwise the blended iteration runs with the ``Sigma`` built from
    ``rho_s``; only the ``X`` block uses ``rho_{s0}``.
    """
    if s0 > s:
        raise ValueError(f"s0={s0} exceeds s={s}")
    psi0 = np.zeros((s, sys.dim))
    if not np.any(y0):
        return psi0, 0
    c0 = build_coefficients(s0, s0)
    JA = sys.JA
    if ws.warm_solver is not None:
        psi0[:s0] = ws.warm_solver.solve(_warm_base(y0, JA, s0))
        return psi0, 1
    # For the linear field, P^T Omega (e kron JA y0 + h I_s0 gamma JA^T) collapses
    # to e_1 kron JA y0 + h X_s0 gamma JA^T, since int_0^1 P_j = delta_j0.
    base = _warm_base(y0, JA, s0)
    gamma = np.zeros((s0, sys.dim))
    mon = _Monitor(ws.tol)
    for it in range(1, ws.max_iter + 1):
        G = gamma - base - h * (c0.Xs @ gamma) @ JA.T
        gamma, dnorm = blended_sweep(gamma, G, ws, c0)
        if not np.isfinite(dnorm):
            break
        if mon.update(dnorm, gamma) in ("converged", "floor"):
            psi0[:s0] = gamma
            return psi0, it
    raise NoConvergence(f"warm start did not converge in {ws.max_iter} sweeps (|delta|={dnorm:.3e})")


def solve_step(y0, h, sys: HamiltonianSystem, coeff: CoefficientSet, ws: BlendedWorkspace):
    """Solve ``G(psi) = 0`` for one step; returns ``(psi, diagnostics)``.

    Without a refiner only convergence of the blended iteration is accepted.
    With one, a stalled blended iteration hands its iterate over to the
    refinement sweeps, which must then reach the tolerance.
    """
    diag = StepDiagnostics()
    psi, diag.warm_iters = warm_start(y0, h, sys, ws.s0, coeff.s, ws)
    G = residual_G(psi, y0, h, sys, coeff)
    mon = _Monitor(ws.tol)
    state = None
    best = (psi, G)
    for it in range(1, ws.max_iter + 1):
        psi, dnorm = blended_sweep(psi, G, ws, coeff)
        G = residual_G(psi, y0, h, sys, coeff)
        diag.main_iters = it
        diag.final_update_norm = dnorm
        state = mon.update(dnorm, psi)
        if mon.since_best == 0:
            best = (psi, G)
        if state in ("converged", "floor"):
            break
        if state == "stalled" and ws.refiner is not None:
            psi, G = best
            break
    if ws.refiner is not None:
        diag.stalled = state not in ("converged", "floor")
        psi, G, ok = _refine(psi, G, y0, h, sys, coeff, ws, diag)
        if not ok and diag.stalled:
            state = None
    diag.residual_norm = float(np.abs(G).max())
    if state not in ("converged", "floor", "stalled"):
        raise NoConvergence(
            f"blended iteration did not converge in {diag.main_iters} sweeps "
            f"(|delta|={diag.final_update_norm:.3e})",
            diag,
        )
    return psi, diag


def _refine(psi, G, y0, h, sys, coeff, ws: BlendedWorkspace, diag: StepDiagnostics):
    """Sweeps with the exact linear inverse until the update stops shrinking.

    Returns ``(psi, G, ok)``; ``ok`` tells whether the last accepted update
    reached the round-off floor.
    """
    prev = np.inf
    for it in range(1, ws.max_refine + 1):
        delta = ws.refiner.solve(-G)
        dnorm = float(np.abs(delta).max())
        if not dnorm < prev:
            break
        psi = psi + delta
        G = residual_G(psi, y0, h, sys, coeff)
        diag.refine_iters = it
        diag.final_update_norm = dnorm
        prev = dnorm
        if dnorm <= U_DOUBLE * max(1.0, float(np.abs(psi).max())):
            break
    scale = max(1.0, float(np.abs(psi).max()))
    return psi, G, prev <= STALL_FACTOR * ws.tol * scale


def shbvm_step(y0, h, sys: HamiltonianSystem, coeff: CoefficientSet, ws: BlendedWorkspace):
    y0 = np.asarray(y0, dtype=float)
    if h == 0:
        return y0.copy(), StepDiagnostics()
    psi, diag = solve_step(y0, h, sys, coeff, ws)
    return y0 + h * psi[0], diag


def dense_output(psi, y0, h, c, coeff: CoefficientSet) -> np.ndarray:
    """Collocation polynomial ``sigma_s(c h)`` for ``c`` in [0, 1]."""
    return y0 + h * (polybasis.legendre_int_all(coeff.s, c) @ psi)


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray  # (N+1, 2m)
    energy: np.ndarray  # (N+1,)
    params: SpectralParams
    diagnostics: list[StepDiagnostics] = field(default_factory=list)

    @property
    def total_iterations(self) -> int:
        return sum(d.warm_iters + d.main_iters + d.refine_iters for d in self.diagnostics)


def integrate(
    sys: HamiltonianSystem,
    y0,
    h: float,
    N: int,
    params: SpectralParams,
    tol: float | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    refine: bool = True,
) -> Trajectory:
    """``N`` constant steps of SHBVM(k, s, s0) from ``y0``."""
    if N < 1:
        raise ValueError("N must be >= 1")
    coeff = build_coefficients(params.s, params.k)
    ws = make_workspace(sys, h, coeff, s0=params.s0, tol=tol, max_iter=max_iter, refine=refine)
    y = np.empty((N + 1, sys.dim))
    y[0] = y0
    diags = []
    for n in range(N):
        try:
            y[n + 1], d = shbvm_step(y[n], h, sys, coeff, ws)
        except (NoConvergence, NonFiniteEvaluation, linalg.LinAlgError) as exc:
            raise SolverDiverged(n + 1, exc) from exc
        diags.append(d)
    energy = np.asarray(sys.hamiltonian(y), dtype=float)
    return Trajectory(h * np.arange(N + 1), y, energy, params, diags)


def gauss_params(s: int, omega_h: float = 0.0) -> SpectralParams:
    """Parameters turning SHBVM into the s-stage Gauss method, SHBVM(s, s, s)."""
    return SpectralParams(s0=s, s=s, k=s, omega_h=omega_h, nu=1.0)
