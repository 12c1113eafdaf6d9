"""SHBVM coefficients, iteration and trajectory drivers."""

import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given
from hypothesis import strategies as st

from oscil import hbvm, linalg, problems
from oscil.polybasis import legendre_all, xi
from oscil.truncation import phi_u, select_params

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def linear_system(A, omega=None):
    A = np.asarray(A, dtype=float)
    return hbvm.HamiltonianSystem(
        A,
        grad_f=lambda y: np.zeros_like(y),
        hamiltonian=lambda y: 0.5 * np.einsum("...i,ij,...j->...", y, A, y),
        omega=linalg.spectral_norm(A) if omega is None else omega,
    )


def exact_linear(sys, y0, t):
    return scipy.linalg.expm(t * sys.JA) @ y0


def mild_duffing(kappa=0.07, beta=5.0):
    p2 = problems.duffing(kappa, beta)
    return p2, problems.to_first_order(p2), problems.initial_state(p2)


@pytest.fixture(scope="module")
def duffing_setup():
    p2 = problems.duffing()
    sys = problems.to_first_order(p2)
    h = 0.02
    params = select_params(sys.omega, h, sys.nu)
    coeff = hbvm.build_coefficients(params.s, params.k)
    return p2, sys, problems.initial_state(p2), h, params, coeff


class TestSystem:
    def test_rejects_nonsymmetric(self):
        with pytest.raises(linalg.NotSymmetric):
            linear_system([[1.0, 1.0], [0.0, 1.0]], omega=1.0)

    def test_rejects_odd_order(self):
        with pytest.raises(ValueError):
            linear_system(np.eye(3), omega=1.0)

    def test_JA_is_J_times_A(self, rng):
        B = rng.normal(size=(4, 4))
        sys = linear_system(B + B.T + 8 * np.eye(4))
        J = np.kron(J2, np.eye(2))
        np.testing.assert_allclose(sys.JA, J @ sys.A, atol=1e-14)
        y = rng.normal(size=4)
        np.testing.assert_allclose(sys.rhs(y), J @ (sys.A @ y), atol=1e-13)


class TestCoefficients:
    def test_midpoint(self):
        c = hbvm.build_coefficients(1, 1)
        np.testing.assert_array_equal(c.quad.nodes, [0.5])
        np.testing.assert_array_equal(c.Xs, [[0.5]])
        assert c.rho == 0.5

    def test_two_stage(self):
        c = hbvm.build_coefficients(2, 2)
        x = 1 / (2 * math.sqrt(3))
        np.testing.assert_allclose(c.Xs, [[0.5, -x], [x, 0.0]], atol=1e-16)
        assert c.rho == pytest.approx(1 / math.sqrt(12), rel=1e-14)

    def test_three_six(self):
        c = hbvm.build_coefficients(3, 6)
        x1, x2 = 1 / (2 * math.sqrt(3)), 1 / (2 * math.sqrt(15))
        X3 = np.array([[0.5, -x1, 0.0], [x1, 0.0, -x2], [0.0, x2, 0.0]])
        assert np.max(np.abs(c.PtO @ c.Is - X3)) <= 1e-14

    @pytest.mark.invariant
    def test_lemma_identity(self):
        for s in range(1, 51):
            for k in sorted({s, s + 2, 2 * s}):
                c = hbvm.build_coefficients(s, k)
                assert np.max(np.abs(c.PtO @ c.Is - c.Xs)) <= 1e-13, (s, k)
                assert c.rho > 0

    def test_closed_form_band(self):
        X = hbvm.x_matrix(6)
        i = np.arange(1, 6)
        np.testing.assert_array_equal(np.diag(X, -1), xi(i))
        np.testing.assert_array_equal(np.diag(X, 1), -xi(i))
        assert X[0, 0] == xi(0) == 0.5

    def test_rho_inverse(self):
        c = hbvm.build_coefficients(7, 20)
        np.testing.assert_allclose(c.rho_Xinv @ c.Xs, c.rho * np.eye(7), atol=1e-13)

    def test_rejects(self):
        with pytest.raises(ValueError):
            hbvm.build_coefficients(3, 2)


class TestResidual:
    def test_zero_fixed_point(self):
        sys = linear_system(np.eye(2))
        c = hbvm.build_coefficients(3, 5)
        G = hbvm.residual_G(np.zeros((3, 2)), np.zeros(2), 0.1, sys, c)
        np.testing.assert_array_equal(G, 0.0)

    def test_midpoint_equation(self, rng):
        p2, sys, _ = mild_duffing()
        c = hbvm.build_coefficients(1, 1)
        y0, psi, h = rng.normal(size=2), rng.normal(size=(1, 2)), 0.3
        mid = y0 + 0.5 * h * psi[0]
        expected = psi[0] - hbvm.apply_J(mid @ sys.A + sys.grad_f(mid))
        np.testing.assert_allclose(hbvm.residual_G(psi, y0, h, sys, c)[0], expected, atol=1e-14)

    def test_rotation_solution(self):
        # psi_j are the Legendre coefficients of the exact velocity along the step
        w, h = 50.0, 0.2
        sys = linear_system(w * np.eye(2))
        y0 = np.array([0.3, -1.1])
        s = phi_u(w * h)
        c = hbvm.build_coefficients(s, s + 2)
        nodes, weights = np.polynomial.legendre.leggauss(80)
        t = 0.5 * (nodes + 1.0)
        vel = np.array([sys.JA @ exact_linear(sys, y0, h * ti) for ti in t])
        psi = (legendre_all(s, t) * (0.5 * weights)[:, None]).T @ vel
        G = hbvm.residual_G(psi, y0, h, sys, c)
        assert np.max(np.abs(G)) <= 1e-12 * w * np.max(np.abs(y0))

    def test_non_finite(self):
        sys = hbvm.HamiltonianSystem(np.eye(2), lambda y: np.full_like(y, np.nan), lambda y: 0.0, omega=1.0)
        c = hbvm.build_coefficients(2, 2)
        with pytest.raises(hbvm.NonFiniteEvaluation):
            hbvm.residual_G(np.zeros((2, 2)), np.ones(2), 0.1, sys, c)


class TestBlendedSweep:
    def test_zero_residual(self, rng):
        sys = linear_system(3 * np.eye(2))
        c = hbvm.build_coefficients(4, 6)
        ws = hbvm.make_workspace(sys, 0.1, c)
        psi = rng.normal(size=(4, 2))
        new, d = hbvm.blended_sweep(psi, np.zeros_like(psi), ws, c)
        np.testing.assert_array_equal(new, psi)
        assert d == 0.0

    def test_scalar_one_stage(self, rng):
        # s = 1: rho X^{-1} = 1, so eta1 = eta, u = 0 and delta = Sigma eta
        w, h = 2.0, 0.3
        sys = linear_system(w * np.eye(2))
        c = hbvm.build_coefficients(1, 1)
        ws = hbvm.make_workspace(sys, h, c)
        G = rng.normal(size=(1, 2))
        a = 0.5 * h * w
        Sigma = np.array([[1.0, a], [-a, 1.0]]) / (1.0 + a * a)  # (I - h/2 J w)^{-1}
        new, d = hbvm.blended_sweep(np.zeros((1, 2)), G, ws, c)
        np.testing.assert_allclose(new[0], Sigma @ (-G[0]), atol=1e-14)
        assert d == pytest.approx(np.max(np.abs(Sigma @ G[0])))

    def test_sigma_matches_factorization(self, duffing_setup, rng):
        _, sys, _, h, _, c = duffing_setup
        ws = hbvm.make_workspace(sys, h, c)
        b = rng.normal(size=(3, 2))
        ref = np.array([linalg.lu_solve(ws.sigma_lu, bi) for bi in b])
        np.testing.assert_allclose(ws.sigma(b), ref, atol=1e-14)

    def test_duffing_pure_blended(self, duffing_setup):
        _, sys, y0, h, params, _ = duffing_setup
        tr = hbvm.integrate(sys, y0, h, 20, params, refine=False)
        assert max(d.warm_iters for d in tr.diagnostics) <= 40
        assert max(d.main_iters for d in tr.diagnostics) <= 30
        for d in tr.diagnostics:
            assert d.warm_iters <= hbvm.DEFAULT_MAX_ITER and d.main_iters <= hbvm.DEFAULT_MAX_ITER
            assert d.refine_iters == 0


class TestLinearPartSolver:
    def _check(self, sys, h, c, rng):
        L = hbvm.LinearPartSolver(sys, h, c)
        b = rng.normal(size=(c.s, sys.dim))
        x = L.solve(b)
        np.testing.assert_allclose(x - h * (c.Xs @ x) @ sys.JA.T, b, atol=1e-11 * max(1, h * sys.omega))

    def test_blocked(self, rng):
        p2 = problems.fpu()
        sys = problems.to_first_order(p2)
        self._check(sys, 10 / 900, hbvm.build_coefficients(47, 49), rng)

    def test_dense_fallback(self, rng):
        B = rng.normal(size=(4, 4))
        sys = linear_system(B @ B.T + np.eye(4))
        L = hbvm.LinearPartSolver(sys, 0.2, hbvm.build_coefficients(5, 7))
        assert not L._blocked
        self._check(sys, 0.2, hbvm.build_coefficients(5, 7), rng)


class TestWarmStart:
    def test_zero_state(self):
        sys = linear_system(np.eye(2))
        c = hbvm.build_coefficients(5, 7)
        ws = hbvm.make_workspace(sys, 0.1, c, s0=3)
        psi, it = hbvm.warm_start(np.zeros(2), 0.1, sys, 3, 5, ws)
        np.testing.assert_array_equal(psi, 0.0)
        assert it == 0

    @pytest.mark.parametrize("refine", [True, False])
    def test_rotation_increment(self, refine):
        w, h = 40.0, 0.25
        sys = linear_system(w * np.eye(2))
        y0 = np.array([1.0, 0.5])
        s0 = phi_u(w * h)
        c = hbvm.build_coefficients(s0 + 4, s0 + 6)
        ws = hbvm.make_workspace(sys, h, c, s0=s0, refine=refine)
        psi, _ = hbvm.warm_start(y0, h, sys, s0, c.s, ws)
        np.testing.assert_allclose(psi[0], (exact_linear(sys, y0, h) - y0) / h, atol=1e-12 * w)
        np.testing.assert_array_equal(psi[s0:], 0.0)

    def test_s0_too_large(self):
        sys = linear_system(np.eye(2))
        c = hbvm.build_coefficients(3, 5)
        with pytest.raises(ValueError):
            hbvm.make_workspace(sys, 0.1, c, s0=4)


class TestStep:
    @pytest.mark.invariant
    @given(st.integers(1, 3), st.floats(0.5, 10.0), st.integers(0, 2**31))
    def test_linear_exact(self, m, wh, seed):
        rng = np.random.default_rng(seed)
        Q, _ = np.linalg.qr(rng.normal(size=(m, m)))
        lam = rng.uniform(0.2, 1.0, size=m)
        Am = (Q * lam) @ Q.T
        A = np.kron(np.eye(2), 0.5 * (Am + Am.T))
        sys = linear_system(A)
        h = wh / sys.omega
        params = select_params(sys.omega, h)
        c = hbvm.build_coefficients(params.s, params.k)
        ws = hbvm.make_workspace(sys, h, c, s0=params.s0)
        y0 = rng.normal(size=2 * m)
        y1, _ = hbvm.shbvm_step(y0, h, sys, c, ws)
        ref = exact_linear(sys, y0, h)
        assert np.max(np.abs(y1 - ref)) <= 1e-12 * np.max(np.abs(y0))

    def test_zero_step(self, duffing_setup):
        _, sys, y0, _, params, c = duffing_setup
        ws = hbvm.make_workspace(sys, 0.02, c, s0=params.s0)
        y1, d = hbvm.shbvm_step(y0, 0.0, sys, c, ws)
        np.testing.assert_array_equal(y1, y0)
        assert d.main_iters == 0

    def test_euler_consistency(self):
        p2, sys, _ = mild_duffing()
        y0 = np.array([0.4, 0.3])
        h = 1e-6
        c = hbvm.build_coefficients(2, 4)
        y1, _ = hbvm.shbvm_step(y0, h, sys, c, hbvm.make_workspace(sys, h, c))
        euler = y0 + h * sys.rhs(y0)
        assert np.max(np.abs(y1 - euler)) <= 10 * h * h * np.max(np.abs(sys.rhs(y0))) ** 2

    @pytest.mark.invariant
    def test_fixed_point_residual(self, duffing_setup):
        _, sys, y0, h, params, c = duffing_setup
        ws = hbvm.make_workspace(sys, h, c, s0=params.s0)
        psi, d = hbvm.solve_step(y0, h, sys, c, ws)
        scale = max(1.0, np.max(np.abs(psi)))
        assert d.residual_norm <= 10 * ws.tol * scale
        assert np.max(np.abs(hbvm.residual_G(psi, y0, h, sys, c))) == d.residual_norm

    def test_no_convergence(self, duffing_setup):
        _, sys, y0, h, params, c = duffing_setup
        ws = hbvm.make_workspace(sys, h, c, s0=params.s0, max_iter=2, refine=False)
        with pytest.raises(hbvm.NoConvergence):
            hbvm.shbvm_step(y0, h, sys, c, ws)


class TestDenseOutput:
    @pytest.mark.invariant
    def test_endpoints_and_stages(self, duffing_setup):
        _, sys, y0, h, params, c = duffing_setup
        ws = hbvm.make_workspace(sys, h, c, s0=params.s0)
        psi, _ = hbvm.solve_step(y0, h, sys, c, ws)
        y1, _ = hbvm.shbvm_step(y0, h, sys, c, ws)
        np.testing.assert_allclose(hbvm.dense_output(psi, y0, h, 0.0, c), y0, atol=1e-15)
        np.testing.assert_allclose(hbvm.dense_output(psi, y0, h, 1.0, c), y1, atol=1e-15)
        stages = hbvm.stage_states(psi, y0, h, c)
        dense = hbvm.dense_output(psi, y0, h, c.quad.nodes, c)
        np.testing.assert_allclose(dense, stages, atol=1e-14)


class TestIntegrate:
    def test_single_step(self, duffing_setup):
        _, sys, y0, h, params, c = duffing_setup
        tr = hbvm.integrate(sys, y0, h, 1, params)
        y1, _ = hbvm.shbvm_step(y0, h, sys, c, hbvm.make_workspace(sys, h, c, s0=params.s0))
        np.testing.assert_array_equal(tr.y[1], y1)
        assert tr.t[-1] == h and tr.energy.shape == (2,)
        assert tr.total_iterations > 0

    def test_bad_n(self, duffing_setup):
        _, sys, y0, h, params, _ = duffing_setup
        with pytest.raises(ValueError):
            hbvm.integrate(sys, y0, h, 0, params)

    def test_divergence_reports_step(self, duffing_setup):
        _, sys, y0, h, params, _ = duffing_setup
        with pytest.raises(hbvm.SolverDiverged) as exc:
            hbvm.integrate(sys, y0, h, 3, params, max_iter=2, refine=False)
        assert exc.value.step == 1

    @pytest.mark.invariant
    def test_linear_trajectory(self):
        sys = linear_system(np.kron(np.eye(2), np.diag([1.0, 3.0])))
        y0 = np.array([1.0, -0.5, 0.25, 2.0])
        h = 10.0 / sys.omega
        tr = hbvm.integrate(sys, y0, h, 20, select_params(sys.omega, h))
        ref = np.array([exact_linear(sys, y0, t) for t in tr.t])
        assert np.max(np.abs(tr.y - ref)) <= 1e-11 * np.max(np.abs(y0))

    @pytest.mark.invariant
    def test_time_symmetry(self, duffing_setup):
        _, sys, y0, h, params, c = duffing_setup
        y1, _ = hbvm.shbvm_step(y0, h, sys, c, hbvm.make_workspace(sys, h, c, s0=params.s0))
        back, _ = hbvm.shbvm_step(y1, -h, sys, c, hbvm.make_workspace(sys, -h, c, s0=params.s0))
        assert np.max(np.abs(back - y0)) <= 1e-11 * np.max(np.abs(y0))


def _rates(sys, y0, s, k, Ns, T=1.0):
    errs = []
    ref = problems.duffing_exact
    for N in Ns:
        tr = hbvm.integrate(sys, y0, T / N, N, hbvm.SpectralParams(s, s, k, 0.0, 1.0))
        q, _ = ref(tr.t, 0.07, 5.0)
        errs.append(np.max(np.abs(tr.y[:, 0] - q)))
    errs = np.array(errs)
    return np.log2(errs[:-1] / errs[1:])


class TestOrderAndEnergy:
    @pytest.mark.invariant
    @pytest.mark.parametrize("s,Ns", [(1, [40, 80, 160, 320]), (2, [10, 20, 40, 80]), (3, [5, 10, 20, 40])])
    def test_order_2s(self, s, Ns):
        _, sys, y0 = mild_duffing()
        rates = _rates(sys, y0, s, 2 * s, Ns)
        assert np.all(np.abs(rates - 2 * s) <= 0.25), rates

    @pytest.mark.invariant
    def test_energy_conservation_degree_four(self):
        _, sys, y0 = mild_duffing()
        h = 0.05
        drift = {}
        for s, k in ((2, 4), (2, 2)):
            tr = hbvm.integrate(sys, y0, h, 100, hbvm.SpectralParams(s, s, k, 0.0, 1.0))
            drift[k] = np.max(np.abs(tr.energy - tr.energy[0])) / abs(tr.energy[0])
        assert drift[4] <= 1e-13
        assert drift[2] > 1e-13
