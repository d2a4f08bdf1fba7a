"""Picard solver for theta_t = P_t psi + Theta(theta)_t with window gluing.

The Young-Volterra integral is evaluated on the finest mesh of the averaged
field's time grid, where it reduces to the spectral recurrence

    Theta_hat_{i+1} = exp(-lambda dt) (Theta_hat_i + FFT(xi * X_{t_i, t_{i+1}}(theta_i))).

Windows are dyadic blocks of cells.  The history of earlier windows enters
the next window's free term as P_{t-a} theta_a.
"""
from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .averaged import AveragedField, RangeError, ValueGrid, compute_averaged_field
from .semigroup import FracHeatOp
from .sewing import SingularHolderPath, fitted_decay_rate, singular_holder_seminorm
from .spectral import (SpectralGrid, TorusField, dealiased_product_values, write_field)


class DivergenceError(RuntimeError):
    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics


class InvarianceError(RuntimeError):
    pass


class BlowUpError(RuntimeError):
    pass


@dataclass(frozen=True)
class Exponents:
    beta: float
    vartheta: float
    gamma: float
    sigma: float
    kappa: float = 3.0


@dataclass(eq=False)
class MSHEProblem:
    alpha: float
    xi: TorusField
    psi: TorusField
    averaged: AveragedField
    omega: np.ndarray
    exponents: Exponents
    T: float
    averaged_drift: AveragedField | None = None
    rebuild: object = None  # optional callable x_max -> (averaged, averaged_drift)
    omega_fine: tuple | None = None  # (t, values) the tables were built from

    def __post_init__(self):
        e = self.exponents
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not 0 <= e.vartheta < e.beta < self.alpha - e.vartheta:
            raise ValueError(f"need vartheta < beta < alpha - vartheta, got beta={e.beta}, "
                             f"vartheta={e.vartheta}")
        if not 1 - e.gamma < e.sigma < e.gamma - self.rho:
            raise ValueError(f"need 1 - gamma < sigma < gamma - rho, got sigma={e.sigma}, "
                             f"gamma={e.gamma}, rho={self.rho:.4g}")
        if not self.xi.grid.compatible(self.psi.grid):
            raise ValueError("xi and psi live on different grids")
        if not np.isclose(self.averaged.T, self.T):
            raise ValueError("averaged field horizon differs from T")
        self.omega = np.asarray(self.omega, dtype=float)
        if self.omega.shape != (self.averaged.n_t,):
            raise ValueError("omega must be sampled on the averaged-field time grid")
        if self.averaged_drift is not None and self.averaged_drift.n_t != self.averaged.n_t:
            raise ValueError("drift table must share the time grid")

    @property
    def rho(self) -> float:
        return (self.exponents.beta + self.exponents.vartheta) / self.alpha

    @property
    def epsilon(self) -> float:
        return self.exponents.gamma - self.rho - self.exponents.sigma

    @property
    def grid(self) -> SpectralGrid:
        return self.psi.grid

    @property
    def n_cells(self) -> int:
        return self.averaged.n_t - 1

    @property
    def dt(self) -> float:
        return self.averaged.dt


@dataclass(frozen=True)
class SolverConfig:
    picard_tol: float = 1e-8
    k_max: int = 50
    safety: float = 0.5
    tau_min_fraction: float = 2.0**-14
    n_out: int = 64
    glue_tol: float = 1e-11
    contraction_floor: float = 1e-13
    probe_rounds: int = 30


@dataclass
class WindowDiagnostics:
    window_id: int
    start: float
    tau: float
    cells: int
    picard_iters: int
    contraction_factors: list
    converged: bool
    c_hat: float
    tau_bound: float
    ball_radius: float
    sewing_increments: list = field(default_factory=list)

    @property
    def contraction_max(self) -> float:
        return max(self.contraction_factors) if self.contraction_factors else 0.0

    @property
    def sewing_levels(self) -> int:
        return len(self.sewing_increments)


@dataclass(eq=False)
class Solution:
    t_grid: np.ndarray
    theta: np.ndarray          # (n_t, n) values on the full mesh
    omega: np.ndarray
    grid: SpectralGrid
    sigma: float
    windows: list
    diagnostics: list
    status: str
    out_index: np.ndarray
    glue_gaps: list = field(default_factory=list)

    @property
    def u_values(self) -> np.ndarray:
        return self.theta + self.omega[: self.theta.shape[0], None]

    @property
    def t_out(self):
        return self.t_grid[self.out_index]

    def theta_path(self, idx=None) -> SingularHolderPath:
        idx = np.arange(self.theta.shape[0]) if idx is None else idx
        return SingularHolderPath(self.t_grid[idx],
                                  [TorusField(self.grid, self.theta[i]) for i in idx],
                                  self.sigma)

    def field_at(self, i) -> TorusField:
        return TorusField(self.grid, self.u_values[i])


def tau_bound(p_semi, C, eps, p0=0.0):
    """Largest window allowed by the contraction condition; C may be a function."""
    c = C(1.0 + p0 + p_semi) if callable(C) else C
    if c <= 0:
        return np.inf
    return (4.0 * (1.0 + p_semi) * c) ** (-1.0 / eps)


class _Engine:
    def __init__(self, problem: MSHEProblem):
        self.pb = problem
        grid = problem.grid
        self.n = grid.n
        self.heat = FracHeatOp(problem.alpha, grid)
        self.decay = np.exp(-self.heat.symbol * problem.dt)
        self.xi_spec = np.fft.fft(problem.xi.values) / self.n
        self.A = problem.averaged
        self.B = problem.averaged_drift

    def set_tables(self, A, B):
        self.A, self.B = A, B

    def forcing(self, i0, theta):
        """Spectra of the per-cell forcing for cells i0 .. i0 + len(theta) - 1."""
        cells = np.arange(i0, i0 + theta.shape[0])[:, None]
        xg = self.A.eval_diff(cells, cells + 1, theta)
        spec = dealiased_product_values(self.xi_spec, np.fft.fft(xg, axis=1) / self.n, self.n)
        if self.B is not None:
            xb = self.B.eval_diff(cells, cells + 1, theta)
            spec = spec + np.fft.fft(xb, axis=1) / self.n
        return spec

    def volterra(self, forcing):
        m = forcing.shape[0]
        out = np.zeros((m + 1, self.n), dtype=complex)
        acc = np.zeros(self.n, dtype=complex)
        for i in range(m):
            acc = self.decay * (acc + forcing[i])
            out[i + 1] = acc
        return np.fft.ifft(out * self.n, axis=1).real

    def Theta(self, i0, theta):
        """Theta over cells starting at i0, driven by theta at left endpoints."""
        return self.volterra(self.forcing(i0, theta[:-1]))

    def free_term(self, theta_a, m):
        spec = np.fft.fft(theta_a) / self.n
        k = np.arange(m + 1)[:, None]
        return np.fft.ifft(spec[None, :] * self.decay[None, :] ** k * self.n, axis=1).real

    def dyadic_levels(self, i0, theta):
        """|I_{n+1} - I_n| at the window end over dyadic partitions of the window."""
        m = theta.shape[0] - 1
        top = int(np.log2(m))
        dt = self.pb.dt
        b = m
        estimates = []
        for lev in range(top + 1):
            step = m // 2**lev
            starts = np.arange(0, m, step)
            rows = theta[starts]
            u = (i0 + starts)[:, None]
            xg = self.A.eval_diff(u, u + step, rows)
            spec = dealiased_product_values(self.xi_spec, np.fft.fft(xg, axis=1) / self.n, self.n)
            if self.B is not None:
                spec = spec + np.fft.fft(self.B.eval_diff(u, u + step, rows), axis=1) / self.n
            lag = (b - starts)[:, None] * dt
            total = (spec * np.exp(-self.heat.symbol[None, :] * lag)).sum(axis=0)
            estimates.append(np.fft.ifft(total * self.n).real)
        return [float(np.abs(estimates[k + 1] - estimates[k]).max())
                for k in range(len(estimates) - 1)]


def _window_seminorm(values, dt, sigma):
    n_t = values.shape[0]
    times = np.arange(n_t) * dt
    s, t = times[:, None], times[None, :]
    gap = np.where(t > s, t - s, 1.0)
    ratio = np.where(t > s, s / gap, 0.0)
    W = np.where(ratio >= 1.0, ratio**sigma, 1.0)
    best = 0.0
    for i in range(n_t - 1):
        d = np.abs(values[i + 1:] - values[i]).max(axis=1)
        best = max(best, float((d * W[i, i + 1:]).max()))
    return best


def _pow2_floor(k):
    return 1 << (int(k).bit_length() - 1)


def _choose_window(eng, pb, cfg, i0, theta_a, remaining):
    """Probe loop for the window length; returns (cells, c_hat, tau_bound)."""
    sigma, eps, dt = pb.exponents.sigma, pb.epsilon, pb.dt
    m = _pow2_floor(remaining)
    c_hat, bound = 0.0, np.inf
    for _ in range(cfg.probe_rounds):
        p = eng.free_term(theta_a, m)
        th = eng.Theta(i0, p)
        p_semi = _window_seminorm(p, dt, sigma)
        tau_p = m * dt
        c_hat = _window_seminorm(th, dt, sigma) / ((1.0 + p_semi) * tau_p**eps)
        bound = cfg.safety * tau_bound(p_semi, c_hat, eps)
        if bound >= tau_p or m == 1:
            break
        m = max(1, _pow2_floor(max(1, int(bound / dt))))
    return m, c_hat, bound


def local_solve(problem: MSHEProblem, config: SolverConfig, i0: int, theta_a,
                window_id=0, engine=None):
    """Picard iteration on one dyadic window starting at grid index i0."""
    eng = engine or _Engine(problem)
    pb, cfg = problem, config
    dt, sigma = pb.dt, pb.exponents.sigma
    remaining = pb.n_cells - i0
    m, c_hat, bound = _choose_window(eng, pb, cfg, i0, theta_a, remaining)
    tau = m * dt
    p = eng.free_term(theta_a, m)
    theta = p.copy()
    incs, factors = [], []
    converged = False
    radius = 0.0
    for k in range(cfg.k_max):
        _check_range(eng.A, theta)
        new = p + eng.Theta(i0, theta)
        diff = new - theta
        inc = _window_seminorm(diff, dt, sigma)
        end_gap = float(np.abs(diff[-1]).max())
        if incs and incs[-1] > cfg.contraction_floor and inc > cfg.contraction_floor:
            factors.append(inc / incs[-1])
        incs.append(inc)
        theta = new
        radius = _window_seminorm(theta - p, dt, sigma)
        if radius > 1.0:
            raise InvarianceError(f"window {window_id}: iterate left the unit ball "
                                  f"around p (radius {radius:.3g})")
        if len(factors) >= 2 and factors[-1] >= 1 and factors[-2] >= 1:
            diag = WindowDiagnostics(window_id, i0 * dt, tau, m, k + 1, factors, False,
                                     c_hat, bound, radius)
            raise DivergenceError(f"window {window_id}: contraction factor >= 1 twice "
                                  f"({factors[-2]:.3g}, {factors[-1]:.3g})", diag)
        if inc < cfg.picard_tol and end_gap < cfg.glue_tol:
            converged = True
            break
    diag = WindowDiagnostics(window_id, i0 * dt, tau, m, k + 1, factors, converged,
                             c_hat, bound, radius, eng.dyadic_levels(i0, theta))
    return theta, diag


def _check_range(A, theta):
    A.check_range(theta)


def solve_mshe(problem: MSHEProblem, config: SolverConfig | None = None) -> Solution:
    cfg = config or SolverConfig()
    pb = problem
    eng = _Engine(pb)
    N = pb.n_cells
    if N % cfg.n_out:
        raise ValueError(f"{N} cells cannot host {cfg.n_out} aligned output times")
    theta = np.zeros((N + 1, pb.grid.n))
    theta[0] = pb.psi.values
    windows, diags = [], []
    i0, wid = 0, 0
    status = "complete"
    tau_min = cfg.tau_min_fraction * pb.T
    while i0 < N:
        try:
            vals, diag = local_solve(pb, cfg, i0, theta[i0], wid, eng)
        except RangeError:
            if pb.rebuild is None:
                raise
            A, B = pb.rebuild(2.0 * eng.A.value_grid.x_max)
            eng.set_tables(A, B)
            continue
        if diag.tau < tau_min and diag.tau_bound < tau_min:
            status = "horizon_reached"
            break
        m = diag.cells
        theta[i0: i0 + m + 1] = vals
        windows.append((i0 * pb.dt, diag.tau))
        diags.append(diag)
        i0 += m
        wid += 1
    n_done = i0 + 1
    out_index = np.arange(0, N + 1, N // cfg.n_out)
    out_index = out_index[out_index < n_done]
    sol = Solution(pb.averaged.t_grid, theta[:n_done], pb.omega, pb.grid,
                   pb.exponents.sigma, windows, diags, status, out_index)
    sol.glue_gaps = glue_gaps(pb, sol, eng)
    return sol


def solve_drifted(problem: MSHEProblem, config: SolverConfig | None = None) -> Solution:
    if problem.averaged_drift is None:
        raise ValueError("drifted solve needs an averaged drift table")
    return solve_mshe(problem, config)


def global_theta(problem: MSHEProblem, solution: Solution, engine=None) -> np.ndarray:
    """P_t psi + Theta(theta)_t over the whole mesh, for the solved path."""
    eng = engine or _Engine(problem)
    th = solution.theta
    m = th.shape[0] - 1
    return eng.free_term(problem.psi.values, m) + eng.Theta(0, th)


def residuals(problem: MSHEProblem, solution: Solution, engine=None) -> np.ndarray:
    """sup_x |theta_t - P_t psi - Theta(theta)_t| at each output time."""
    full = global_theta(problem, solution, engine)
    return np.abs(solution.theta - full).max(axis=1)[solution.out_index]


def glue_gaps(problem, solution, engine=None):
    """Mismatch at each glue point between the carried state and a global recomputation."""
    full = global_theta(problem, solution, engine)
    pts = [int(round(s / problem.dt)) for s, _ in solution.windows[1:]]
    return [float(np.abs(solution.theta[i] - full[i]).max()) for i in pts]


def reference_step(heat, xi_spec, n, g, b, omega_fn=None):
    def step(u, t, dt):
        shift = 0.0 if omega_fn is None else omega_fn(t)
        spec_u = np.fft.fft(u) / n
        E = np.exp(-heat.symbol * dt)
        f = np.zeros(n, dtype=complex)
        if g is not None:
            gv = np.fft.fft(g(u + shift)) / n
            f = f + dealiased_product_values(xi_spec, gv, n)
        if b is not None:
            f = f + np.fft.fft(b(u + shift)) / n
        return np.fft.ifft(E * (spec_u + dt * f) * n).real
    return step


def _euler_path(step, u0, T, n_t, guard):
    dt = T / n_t
    out = [u0]
    u = u0
    for i in range(n_t):
        u = step(u, i * dt, dt)
        if not np.all(np.isfinite(u)) or np.abs(u).max() > guard:
            raise BlowUpError(f"reference solution exceeded {guard} at t={(i + 1) * dt:.4g}")
        out.append(u)
    return np.array(out)


def classical_reference_solve(alpha, xi, g, psi: TorusField, T, n_t, richardson=True,
                              b=None, omega=None, guard=1e6):
    """Exponential Euler for u = P_t psi + int P_{t-s}(xi g(u_s) + b(u_s)) ds.

    With ``richardson`` the result is 2 u^{dt/2} - u^{dt} on the coarse times.
    ``omega`` (callable of t) shifts the argument of g and b.
    """
    grid = psi.grid
    n = grid.n
    heat = FracHeatOp(alpha, grid)
    xi_spec = np.fft.fft(xi.values if isinstance(xi, TorusField) else xi) / n
    step = reference_step(heat, xi_spec, n, g, b, omega)
    coarse = _euler_path(step, psi.values, T, n_t, guard)
    if not richardson:
        return coarse
    fine = _euler_path(step, psi.values, T, 2 * n_t, guard)[::2]
    return 2.0 * fine - coarse


def self_convergence_order(alpha, xi, g, psi, T, dts):
    sols = [classical_reference_solve(alpha, xi, g, psi, T, int(round(T / d)), False)[-1]
            for d in dts]
    e1 = np.abs(sols[0] - sols[1]).max()
    e2 = np.abs(sols[1] - sols[2]).max()
    return float(np.log2(e1 / e2))


# --- problem builders ------------------------------------------------------

def band_limited_xi(grid: SpectralGrid, modes=3, seed=0) -> TorusField:
    """Random trigonometric polynomial of low degree normalised to sup norm 1."""
    rng = np.random.default_rng(seed)
    x = grid.points
    v = sum(rng.standard_normal() * np.cos(2 * np.pi * k * x / grid.period)
            + rng.standard_normal() * np.sin(2 * np.pi * k * x / grid.period)
            for k in range(1, modes + 1))
    return TorusField(grid, v / np.abs(v).max())


def build_problem(g_func, omega_t, omega_v, grid: SpectralGrid, psi, xi, T, n_cells,
                  exponents: Exponents, alpha=2.0, x_max=2 * np.pi, m=512, b_func=None,
                  method="cubic") -> MSHEProblem:
    """Assemble a problem from a value function g, a fine path and the state grids."""
    t_grid = np.linspace(0.0, T, n_cells + 1)
    ratio = (omega_t.size - 1) // n_cells
    omega_coarse = omega_v[::ratio]

    def tables(xm):
        vg = ValueGrid(xm, m)
        A = compute_averaged_field(g_func(vg.points), (omega_t, omega_v), vg, t_grid, method,
                                   gamma_declared=exponents.gamma,
                                   kappa_declared=exponents.kappa)
        B = None
        if b_func is not None:
            B = compute_averaged_field(b_func(vg.points), (omega_t, omega_v), vg, t_grid,
                                       method, gamma_declared=exponents.gamma,
                                       kappa_declared=exponents.kappa)
        return A, B

    A, B = tables(x_max)
    return MSHEProblem(alpha, xi, psi, A, omega_coarse, exponents, T, B, rebuild=tables,
                       omega_fine=(omega_t, omega_v))


def zero_path(T, n_fine):
    return np.linspace(0.0, T, n_fine + 1), np.zeros(n_fine + 1)


def smooth_problem(n=256, T=0.1, n_cells=1024, ratio=4, g=np.sin, b=None, m=512,
                   exponents=None, xi_seed=0, omega=None) -> MSHEProblem:
    grid = SpectralGrid(n)
    psi = TorusField.from_function(grid, lambda x: np.cos(2 * np.pi * x))
    xi = band_limited_xi(grid, seed=xi_seed)
    ex = exponents or Exponents(beta=0.5, vartheta=0.1, gamma=1.0, sigma=0.35)
    ot, ov = omega if omega is not None else zero_path(T, n_cells * ratio)
    return build_problem(g, ot, ov, grid, psi, xi, T, n_cells, ex, m=m, b_func=b)


# --- stability -------------------------------------------------------------

def mollify(values, vgrid: ValueGrid, width):
    if width == 0:
        return np.asarray(values, float).copy()
    sp = vgrid.spectral
    mult = np.exp(-0.5 * (sp.angular * width) ** 2)
    return np.fft.ifft(np.fft.fft(values) * mult).real


def averaged_distance(A1: AveragedField, A2: AveragedField, gamma, orders=(0, 1, 2)):
    """C^gamma_T C^k proxy: max over dyadic gaps and derivative orders of sup|D^k diff| / gap^gamma."""
    n = A1.n_t - 1
    best = 0.0
    for k in orders:
        D = A1.derivative(k) - A2.derivative(k)
        step = n
        while step >= 1:
            inc = np.abs(D[step:] - D[:-step]).max()
            best = max(best, inc / (step * A1.dt) ** gamma)
            step //= 2
    return float(best)


@dataclass
class StabilityRow:
    width: float
    averaged_error: float
    solution_error: float

    @property
    def ratio(self):
        return self.solution_error / self.averaged_error if self.averaged_error > 0 else np.nan


def stability_experiment(problem: MSHEProblem, g_samples, widths, config=None):
    """Re-solve with mollified g on the same path; compare table and solution errors."""
    cfg = config or SolverConfig()
    A0 = problem.averaged
    vg = A0.value_grid
    if problem.omega_fine is None:
        raise ValueError("problem lacks the fine path needed to rebuild tables")
    fine_t, fine_w = problem.omega_fine
    base = solve_mshe(problem, cfg)
    rows = []
    sigma = problem.exponents.sigma
    for h in widths:
        gh = mollify(g_samples, vg, h)
        Ah = compute_averaged_field(gh, (fine_t, fine_w), vg, A0.t_grid, A0.metadata["method"],
                                    A0.weight, A0.gamma_declared, A0.kappa_declared)
        ph = MSHEProblem(problem.alpha, problem.xi, problem.psi, Ah, problem.omega,
                         problem.exponents, problem.T, problem.averaged_drift,
                         omega_fine=problem.omega_fine)
        sol = solve_mshe(ph, cfg)
        k = min(sol.theta.shape[0], base.theta.shape[0])
        err = _window_seminorm(sol.theta[:k] - base.theta[:k], problem.dt, sigma)
        rows.append(StabilityRow(h, averaged_distance(Ah, A0, problem.exponents.gamma), err))
    return rows


# --- output ----------------------------------------------------------------

def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def write_solution(sol: Solution, out_dir, tag=""):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    starts = np.array([s for s, _ in sol.windows])
    with open(out / "solution_manifest.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "filename", "window_id"])
        for k, i in enumerate(sol.out_index):
            t = float(sol.t_grid[i])
            name = f"u_{k:03d}.nyvf"
            write_field(out / name, sol.field_at(i))
            wid = int(np.searchsorted(starts, t + 1e-12, side="right") - 1) if starts.size else 0
            wr.writerow([repr(t), name, max(wid, 0)])
    with open(out / "diagnostics.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["window_id", "tau", "picard_iters", "contraction_max", "sewing_levels"])
        for d in sol.diagnostics:
            wr.writerow([d.window_id, repr(float(d.tau)), d.picard_iters,
                         repr(float(d.contraction_max)), d.sewing_levels])


def seminorm_spot_check(sol: Solution, sigmas, stride=None):
    idx = np.arange(0, sol.theta.shape[0], stride or max(1, sol.theta.shape[0] // 128))
    path = sol.theta_path(idx)
    return {s: singular_holder_seminorm(path, sigma=s) for s in sigmas}


def sewing_rate(diag: WindowDiagnostics) -> float:
    return fitted_decay_rate(diag.sewing_increments, lo=0)
