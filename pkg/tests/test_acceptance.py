"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line."""

import math
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

import oracles
from oscil import baselines, bench, hbvm, problems, truncation
from report import record

TABLE1 = {0.1: 9, 0.5: 11, 1: 13, 5: 20, 10: 26, 25: 40, 50: 59, 75: 76, 100: 93}


def test_criterion_01_truncation_table():
    t0 = time.perf_counter()
    got = {x: truncation.phi_u(float(x), truncation.MACHINE_EPS) for x in TABLE1}
    dt = time.perf_counter() - t0
    worst = max(abs(got[x] - s) for x, s in TABLE1.items())
    ok = worst <= 1 and dt < 1.0
    record(1, ok, f"phi_u at u=2^-52 {list(got.values())}, max |diff| {worst}, {dt:.2f}s")
    assert ok


def test_criterion_02_bessel_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for x in (1.0, 5.0, 10.0):
        ic, is_ = oracles.legendre_fourier_mp(10, x, k=64)
        g = truncation.g_bound_all(10, x)
        mask = g > 1e-12
        worst = max(worst, float(np.max(np.abs(ic**2 + is_**2 - g**2)[mask] / g[mask] ** 2)))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 1.0
    record(2, ok, f"max rel. deviation {worst:.2e} (64-point Gauss, extended precision), {dt:.2f}s")
    assert ok


def test_criterion_03_coefficient_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for s in range(1, 51):
        for k in {s, s + 2, max(20, s + 2)}:
            c = hbvm.build_coefficients(s, k)
            worst = max(worst, float(np.max(np.abs(c.PtO @ c.Is - c.Xs))))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-13 and dt < 5.0
    record(3, ok, f"max |P^T Omega I - X_s| {worst:.2e}, {dt:.2f}s")
    assert ok


def test_criterion_04_duffing_shbvm():
    t0 = time.perf_counter()
    rec = bench.run_solve(bench.RunConfig("duffing", "shbvm", 1000))
    dt = time.perf_counter() - t0
    ok = (rec.s0, rec.s, rec.k) == (26, 44, 46) and rec.e_q <= 1e-9 and rec.e_H <= 1e-13 and dt < 60
    record(4, ok, f"(s0,s,k)=({rec.s0},{rec.s},{rec.k}) e_q={rec.e_q:.2e} e_H={rec.e_H:.2e}, {dt:.1f}s")
    assert ok


def test_criterion_05_gauss_orders():
    t0 = time.perf_counter()
    p2 = problems.duffing(0.07, 5.0)
    sys = problems.to_first_order(p2)
    y0 = problems.initial_state(p2)
    grids = {1: 800, 2: 200, 3: 100, 4: 80}
    all_rates = {}
    for s, N0 in grids.items():
        errs = []
        for N in (N0, 2 * N0, 4 * N0, 8 * N0):
            tr = hbvm.integrate(sys, y0, 20.0 / N, N, hbvm.gauss_params(s))
            q, _ = problems.duffing_exact(tr.t, 0.07, 5.0)
            errs.append(np.max(np.abs(tr.y[:, 0] - q)))
        all_rates[s] = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    dt = time.perf_counter() - t0
    ok = all(abs(r - 2 * s) <= 0.25 for s, rs in all_rates.items() for r in rs) and dt < 60
    summary = " ".join(f"s={s}:" + "/".join(f"{r:.2f}" for r in rs) for s, rs in all_rates.items())
    record(5, ok, f"rates {summary}, {dt:.1f}s")
    assert ok


def test_criterion_06_classical_orders():
    t0 = time.perf_counter()
    p2 = problems.duffing()
    errs = {}
    for method in ("sv", "gautschi"):
        for N in (1_250_000, 2_500_000):
            tr = baselines.integrate_classical(p2, method, 20.0 / N, N)
            q, _ = problems.duffing_exact(tr.t)
            errs[method, N] = float(np.max(np.abs(tr.q[:, 0] - q)))
            del tr
    dt = time.perf_counter() - t0
    rates = {m: math.log2(errs[m, 1_250_000] / errs[m, 2_500_000]) for m in ("sv", "gautschi")}
    ratio = errs["sv", 1_250_000] / errs["gautschi", 1_250_000]
    ok = all(abs(r - 2.0) <= 0.15 for r in rates.values()) and ratio >= 1e2 and dt < 600
    record(6, ok, f"SV e_q={errs['sv', 1_250_000]:.2e} rate {rates['sv']:.2f}; Gautschi "
                  f"e_q={errs['gautschi', 1_250_000]:.2e} rate {rates['gautschi']:.2f}; ratio {ratio:.0f}, {dt:.0f}s")
    assert ok


def test_criterion_07_trig_linear_exactness():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    m = 4
    Q, _ = np.linalg.qr(rng.normal(size=(m, m)))
    lam = np.array([0.3, 1.0, 2.5, 10.0])
    A = (Q * lam) @ Q.T
    A = 0.5 * (A + A.T)
    h = 50.0 / lam.max()
    p2 = problems.SecondOrderProblem(A, lambda q: 0 * q, lambda q: 0 * q[..., 0], np.zeros(m), np.zeros(m), 1.0)
    q, v = rng.normal(size=m), rng.normal(size=m)
    qe, ve = baselines.exact_linear_flow(q, v, h, A)
    k = baselines.TrigKernel.build(A, h)
    worst = 0.0
    for step in (baselines.gautschi_step, baselines.deuflhard_step):
        q1, v1 = step(q, v, h, p2, k)
        worst = max(worst, np.linalg.norm(np.r_[q1 - qe, v1 - ve]) / np.linalg.norm(np.r_[qe, ve]))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-12 and dt < 1.0
    record(7, ok, f"omega*h=50, max rel. deviation from exact rotation {worst:.2e}, {dt:.2f}s")
    assert ok


def test_criterion_08_fpu_shbvm():
    t0 = time.perf_counter()
    rec = bench.run_solve(bench.RunConfig("fpu", "shbvm", 900))
    dt = time.perf_counter() - t0
    ok = (rec.s0, rec.s, rec.k) == (28, 47, 49) and rec.e_q <= 1e-8 and rec.e_H <= 1e-13 and dt < 120
    record(8, ok, f"(s0,s,k)=({rec.s0},{rec.s},{rec.k}) e_y={rec.e_q:.2e} (q,q': {rec.e_y_velocity:.2e}) "
                  f"e_H={rec.e_H:.2e}, {dt:.1f}s incl. h/8 reference")
    assert ok


def test_criterion_09_nls_shbvm():
    t0 = time.perf_counter()
    rec = bench.run_solve(bench.RunConfig("nls", "shbvm", 250))
    dt = time.perf_counter() - t0
    ok = (rec.s, rec.k) == (24, 26) and rec.s0 == rec.s and rec.e_q <= 1e-9 and rec.e_H <= 1e-13 and dt < 60
    record(9, ok, f"(s0,s,k)=({rec.s0},{rec.s},{rec.k}) e_y={rec.e_q:.2e} e_H={rec.e_H:.2e}, {dt:.1f}s")
    assert ok


def test_criterion_10_energy_theorem():
    t0 = time.perf_counter()
    p2 = problems.duffing(0.07, 5.0)
    sys = problems.to_first_order(p2)
    y0 = problems.initial_state(p2)
    drift = {}
    for k in (4, 2):
        tr = hbvm.integrate(sys, y0, 0.05, 200, hbvm.SpectralParams(2, 2, k, 0.0, 1.0))
        drift[k] = float(np.max(np.abs(tr.energy - tr.energy[0])) / abs(tr.energy[0]))
    dt = time.perf_counter() - t0
    ok = drift[4] <= 1e-13 and drift[2] > drift[4] and dt < 10
    record(10, ok, f"HBVM(4,2) drift {drift[4]:.2e}, HBVM(2,2) drift {drift[2]:.2e}, {dt:.2f}s")
    assert ok


def test_criterion_11_property_suite():
    t0 = time.perf_counter()
    res = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-m", "invariant", "-p", "no:cacheprovider", str(Path(__file__).parent)],
        capture_output=True, text=True, check=False,
    )
    dt = time.perf_counter() - t0
    tail = res.stdout.strip().splitlines()[-1] if res.stdout.strip() else res.stderr.strip()[-200:]
    ok = res.returncode == 0 and dt < 60
    record(11, ok, f"invariant-marked tests: {tail}, {dt:.1f}s")
    assert ok, res.stdout[-3000:]
