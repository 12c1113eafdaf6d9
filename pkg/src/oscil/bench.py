"""Benchmark harness: single runs, error tables and figure data as CSV."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import baselines, hbvm, linalg, polybasis, problems, truncation

log = logging.getLogger(__name__)

CSV_HEADER = ["N", "time_s", "e_q", "e_p", "e_H", "rate_q", "rate_p", "rate_H", "s0", "s", "k"]

PROBLEMS = ("duffing", "fpu", "nls")
T_END = {"duffing": 20.0, "fpu": 10.0, "nls": 5.0}
FPU_REF_STEPS = 16000


class UnknownProblem(KeyError):
    pass


class UnknownTable(KeyError):
    pass


class UnknownFigure(KeyError):
    pass


@dataclass
class RunConfig:
    problem: str
    method: str
    N: int
    t_end: float | None = None
    nu: float | None = None
    omega: float | str = "auto"
    u: float = truncation.U_DOUBLE
    out_path: str | None = None

    def __post_init__(self):
        if self.problem not in PROBLEMS:
            raise UnknownProblem(self.problem)
        parse_method(self.method)
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.t_end is None:
            self.t_end = T_END[self.problem]
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")

    @property
    def h(self) -> float:
        return self.t_end / self.N


@dataclass
class BenchRecord:
    """One table row.  For problems measured by ``e_y`` the value sits in ``e_q``."""

    N: int
    wall_time_s: float
    e_q: float
    e_p: float | None
    e_H: float
    e_H_abs: float
    s0: int | None = None
    s: int | None = None
    k: int | None = None
    rate_q: float | None = None
    rate_p: float | None = None
    rate_H: float | None = None
    rate_generalized: bool = False
    e_y_velocity: float | None = None  # FPU e_y in (q, q') variables

    def csv_row(self) -> list[str]:
        vals = [self.N, self.wall_time_s, self.e_q, self.e_p, self.e_H,
                self.rate_q, self.rate_p, self.rate_H, self.s0, self.s, self.k]
        return [_fmt(v) for v in vals]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def parse_method(method: str) -> tuple[str, int | None]:
    """``'gauss-3' -> ('gauss', 3)``; other names pass through."""
    if method in baselines.METHODS or method == "shbvm":
        return method, None
    if method.startswith("gauss-"):
        try:
            s = int(method[6:])
        except ValueError:
            s = 0
        if s >= 1:
            return "gauss", s
    raise baselines.UnknownMethod(method)


# ---------------------------------------------------------------------------
# errors


def compute_errors(traj, ref, hamiltonian):
    """``(e_q, e_p, e_H, e_H_abs)``.

    ``traj`` and ``ref`` are ``(q, p)`` pairs of arrays on the same time grid
    (``p`` may be ``None`` to get ``e_p = None``); ``hamiltonian`` is the
    sequence ``H(y_n)`` along ``traj``.
    """
    q, p = traj
    q_ref, p_ref = ref
    q, q_ref = np.asarray(q, dtype=float), np.asarray(q_ref, dtype=float)
    if q.shape != q_ref.shape:
        raise linalg.DimensionMismatch(f"trajectory {q.shape} vs reference {q_ref.shape}")
    e_q = float(np.max(np.abs(q - q_ref)))
    e_p = None
    if p is not None:
        p, p_ref = np.asarray(p, dtype=float), np.asarray(p_ref, dtype=float)
        if p.shape != p_ref.shape:
            raise linalg.DimensionMismatch(f"trajectory {p.shape} vs reference {p_ref.shape}")
        e_p = float(np.max(np.abs(p - p_ref)))
    H = np.asarray(hamiltonian, dtype=float)
    e_H_abs = float(np.max(np.abs(H - H[0])))
    return e_q, e_p, e_H_abs / abs(H[0]), e_H_abs


# ---------------------------------------------------------------------------
# problems and references


def _second_order(problem: str) -> problems.SecondOrderProblem:
    if problem == "duffing":
        return problems.duffing()
    if problem == "fpu":
        return problems.fpu()
    raise baselines.UnknownMethod(f"{problem} has no second-order form")


def first_order_system(cfg: RunConfig):
    """``(HamiltonianSystem, y0)`` with the config's overrides applied."""
    if cfg.problem == "nls":
        sys = problems.nls()
        y0 = problems.nls_exact(0.0)[0]
    else:
        p2 = _second_order(cfg.problem)
        sys = problems.to_first_order(p2)
        y0 = problems.initial_state(p2)
    changes = {}
    if cfg.omega != "auto":
        changes["omega"] = float(cfg.omega)
    if cfg.nu is not None:
        changes["nu"] = float(cfg.nu)
    if changes:
        sys = dataclasses.replace(sys, **changes)
    return sys, y0


@lru_cache(maxsize=4)
def _fpu_fine_reference(t_end: float, n_ref: int) -> np.ndarray:
    sys, y0 = first_order_system(RunConfig("fpu", "shbvm", 1, t_end=t_end))
    h = t_end / n_ref
    traj = hbvm.integrate(sys, y0, h, n_ref, truncation.select_params(sys.omega, h, sys.nu))
    return traj.y


def fpu_reference(N: int, t_end: float = 10.0):
    """Reference ``(index, y_ref)``: states of the ``N``-step grid it covers.

    Small ``N`` get an SHBVM run with stepsize ``h/8`` on every grid point;
    otherwise a cached fine run is compared on the grid points shared by both.
    """
    if 8 * N <= FPU_REF_STEPS:
        sys, y0 = first_order_system(RunConfig("fpu", "shbvm", 1, t_end=t_end))
        return np.arange(N + 1), problems.reference_trajectory(sys, y0, t_end, N, refine=8)
    g = math.gcd(N, FPU_REF_STEPS)
    fine = _fpu_fine_reference(t_end, FPU_REF_STEPS)
    return np.arange(0, N + 1, N // g), fine[:: FPU_REF_STEPS // g]


# ---------------------------------------------------------------------------
# single runs


def run_solve(cfg: RunConfig) -> BenchRecord:
    kind, stages = parse_method(cfg.method)
    h = cfg.h
    if kind in baselines.METHODS:
        p2 = _second_order(cfg.problem)
        t0 = time.perf_counter()
        tr = baselines.integrate_classical(p2, kind, h, cfg.N)
        wall = time.perf_counter() - t0
        y = np.concatenate([tr.q, problems.scaled_momenta(p2, tr.v)], axis=1)
        rec = _errors_for(cfg, tr.t, y, tr.energy, wall, p2)
        if cfg.out_path:
            write_csv(cfg.out_path, [rec])
        return rec
    sys, y0 = first_order_system(cfg)
    if kind == "gauss":
        params = hbvm.gauss_params(stages, sys.omega * h)
    else:
        params = truncation.select_params(sys.omega, h, sys.nu, cfg.u)
    t0 = time.perf_counter()
    tr = hbvm.integrate(sys, y0, h, cfg.N, params)
    wall = time.perf_counter() - t0
    p2 = None if cfg.problem == "nls" else _second_order(cfg.problem)
    rec = _errors_for(cfg, tr.t, tr.y, tr.energy, wall, p2)
    rec.s0, rec.s, rec.k = params.s0, params.s, params.k
    if cfg.out_path:
        write_csv(cfg.out_path, [rec])
    return rec


def _errors_for(cfg: RunConfig, t, y, energy, wall, p2) -> BenchRecord:
    if cfg.problem == "duffing":
        q_ex, v_ex = problems.duffing_exact(t)
        v = problems.velocities(p2, y)[:, 0]
        e_q, e_p, e_H, e_H_abs = compute_errors((y[:, 0], v), (q_ex, v_ex), energy)
        return BenchRecord(cfg.N, wall, e_q, e_p, e_H, e_H_abs)
    if cfg.problem == "nls":
        ref = problems.nls_exact(t)
        e_y, _, e_H, e_H_abs = compute_errors((y, None), (ref, None), energy)
        return BenchRecord(cfg.N, wall, e_y, None, e_H, e_H_abs)
    idx, ref = fpu_reference(cfg.N, cfg.t_end)
    e_y, _, e_H, e_H_abs = compute_errors((y[idx], None), (ref, None), energy)
    m = p2.m
    qv = np.concatenate([y[idx, :m], problems.velocities(p2, y[idx])], axis=1)
    qv_ref = np.concatenate([ref[:, :m], problems.velocities(p2, ref)], axis=1)
    rec = BenchRecord(cfg.N, wall, e_y, None, e_H, e_H_abs)
    rec.e_y_velocity = float(np.max(np.abs(qv - qv_ref)))
    return rec


# ---------------------------------------------------------------------------
# tables

_DUFFING_CLASSICAL = {
    "sv": [1_250_000, 2_500_000, 5_000_000, 10_000_000, 20_000_000],
    "gautschi": [1_250_000, 2_500_000, 5_000_000, 10_000_000, 20_000_000],
    "deuflhard": [625_000, 1_250_000, 2_500_000, 5_000_000, 10_000_000],
}
_DUFFING_GAUSS = {
    "gauss-1": [1_250_000, 2_500_000, 5_000_000, 10_000_000, 20_000_000],
    "gauss-2": [200_000, 400_000, 800_000, 1_600_000],
    "gauss-3": [25_000, 50_000, 100_000, 200_000],
    "gauss-4": [12_500, 25_000, 50_000, 100_000],
}
_FPU_CLASSICAL = {
    "sv": [10_000 * j for j in (16, 32, 64, 128, 256)],
    "gautschi": [10_000 * j for j in (1, 2, 4, 8, 16, 32, 64, 128)],
    "deuflhard": [10_000 * j for j in (1, 2, 4, 8, 16, 32, 64, 128)],
}
_FPU_GAUSS = {
    "gauss-1": [10_000 * j for j in (32, 64, 128, 256)],
    "gauss-2": [10_000 * j for j in (4, 8, 16, 32, 64, 128)],
    "gauss-3": [10_000 * j for j in (1, 2, 4, 8, 16, 32)],
    "gauss-4": [10_000 * j for j in (1, 2, 4, 8, 16)],
}
_NLS_GAUSS = {
    "gauss-1": [1_000 * j for j in (16, 32, 64, 128, 256, 512, 1024)],
    "gauss-2": [1_000 * j for j in (4, 8, 16, 32, 64, 128, 256)],
    "gauss-3": [10_000 * j for j in (2, 4, 8, 16, 32, 64, 128)],
    "gauss-4": [1_000 * j for j in (1, 2, 4, 8, 16, 32)],
}

TABLES = {
    "duffing-classical": ("duffing", _DUFFING_CLASSICAL),
    "duffing-gauss": ("duffing", _DUFFING_GAUSS),
    "duffing-shbvm": ("duffing", {"shbvm": list(range(800, 1501, 100))}),
    "fpu-classical": ("fpu", _FPU_CLASSICAL),
    "fpu-gauss": ("fpu", _FPU_GAUSS),
    "fpu-shbvm": ("fpu", {"shbvm": list(range(500, 1501, 100))}),
    "nls-gauss": ("nls", _NLS_GAUSS),
    "nls-shbvm": ("nls", {"shbvm": list(range(200, 501, 50))}),
}

# Step budgets for desk-scale rows: explicit methods are cheap per step.
DESK_CAP_EXPLICIT = 2_500_000
DESK_CAP_IMPLICIT = 250_000


def desk_rows(method: str, rows: list[int]) -> list[int]:
    """First two rows of a method, halved together until they fit the budget."""
    if method == "shbvm":
        return list(rows)
    cap = DESK_CAP_EXPLICIT if method in baselines.METHODS else DESK_CAP_IMPLICIT
    pair = list(rows[:2])
    while pair[-1] > cap and pair[0] % 2 == 0:
        pair = [n // 2 for n in pair]
    return pair


def table_rows(table_id: str, scale: str = "desk") -> tuple[str, dict[str, list[int]]]:
    if table_id not in TABLES:
        raise UnknownTable(table_id)
    if scale not in ("desk", "full"):
        raise ValueError("scale must be 'desk' or 'full'")
    problem, rows = TABLES[table_id]
    if scale == "full":
        return problem, {m: list(r) for m, r in rows.items()}
    return problem, {m: desk_rows(m, r) for m, r in rows.items()}


def attach_rates(records: list[BenchRecord]) -> None:
    """Fill rates from each row to the previous one."""
    for prev, rec in zip(records, records[1:]):
        ratio = rec.N / prev.N
        rec.rate_generalized = ratio != 2
        if rec.rate_generalized:
            log.warning("N=%d: generalized rate over ratio %.4g", rec.N, ratio)
        rec.rate_q = _rate(prev.e_q, rec.e_q, ratio)
        rec.rate_p = _rate(prev.e_p, rec.e_p, ratio)
        rec.rate_H = _rate(prev.e_H, rec.e_H, ratio)


def _rate(e_coarse, e_fine, ratio):
    if e_coarse is None or e_fine is None or e_coarse <= 0 or e_fine <= 0:
        return None
    return math.log(e_coarse / e_fine) / math.log(ratio)


def run_table(table_id: str, out_dir="results", scale: str = "desk", plot: bool = True) -> dict[str, Path]:
    """Run every row of a table; one CSV (and PNG) per method.  Returns the CSV paths."""
    problem, rows = table_rows(table_id, scale)
    out_dir = Path(out_dir)
    out: dict[str, Path] = {}
    for method, Ns in rows.items():
        recs = []
        for N in Ns:
            log.info("%s %s N=%d", table_id, method, N)
            recs.append(run_solve(RunConfig(problem, method, N)))
        if method != "shbvm":
            attach_rates(recs)
        path = out_dir / f"{table_id}_{method}.csv"
        write_csv(path, recs)
        if plot:
            from . import plotting

            plotting.plot_table(path, recs, title=f"{table_id} {method}")
        out[method] = path
    return out


def write_csv(path, records: list[BenchRecord]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in records:
            w.writerow(r.csv_row())
    return path


def read_csv(path) -> list[dict[str, str]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# figures

FIGURES = ("g-bound", "phi-u", "time-vs-N")


def legendre_fourier_integrals(s_max: int, x: float, k: int = 64):
    """``|int_0^1 P_j(c) cos(x c) dc|`` and the ``sin`` analogue, ``j <= s_max``."""
    rule = polybasis.gauss_rule(k)
    P = polybasis.legendre_all(s_max + 1, rule.nodes)
    w = rule.weights[:, None]
    ic = np.sum(w * P * np.cos(x * rule.nodes)[:, None], axis=0)
    is_ = np.sum(w * P * np.sin(x * rule.nodes)[:, None], axis=0)
    return np.abs(ic), np.abs(is_)


def g_bound_data(omega_hs=(1.0, 5.0, 10.0), s_max: int = 40):
    rows = []
    for x in omega_hs:
        ic, is_ = legendre_fourier_integrals(s_max, x)
        g = truncation.g_bound_all(s_max, x)
        rows += [(x, j, ic[j], is_[j], g[j]) for j in range(s_max + 1)]
    return ["omega_h", "s", "int_cos", "int_sin", "g"], rows


def phi_u_data(u: float = truncation.U_DOUBLE, grid=None):
    grid = np.round(np.arange(0.1, 100.0 + 1e-9, 0.1), 10) if grid is None else grid
    return ["omega_h", "phi_u"], [(float(x), truncation.phi_u(float(x), u)) for x in grid]


def time_vs_n_data(Ns=range(800, 1501, 100)):
    rows = []
    for N in Ns:
        rec = run_solve(RunConfig("duffing", "shbvm", N))
        rows.append((N, rec.wall_time_s, rec.e_q))
    return ["N", "time_s", "e_q"], rows


def run_figure(figure_id: str, out_dir="results", plot: bool = True) -> Path:
    if figure_id == "g-bound":
        header, rows = g_bound_data()
    elif figure_id == "phi-u":
        header, rows = phi_u_data()
    elif figure_id == "time-vs-N":
        header, rows = time_vs_n_data()
    else:
        raise UnknownFigure(figure_id)
    path = Path(out_dir) / f"{figure_id}.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    if plot:
        from . import plotting

        plotting.plot_figure(figure_id, path, header, rows)
    return path


def params_command(omega_h: float, nu: float = 1.0, u: float = truncation.U_DOUBLE) -> str:
    p = truncation.select_params(omega_h, 1.0, nu, u)
    return f"s0={p.s0} s={p.s} k={p.k} u={p.u!r}"
