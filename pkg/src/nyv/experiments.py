"""Experiment pipelines shared by the command line, scripts and acceptance tests."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import averaged as av
from .config import ExperimentConfig
from .noise import (LFSMKernel, sample_lfsm, sample_lfsm_batch, sample_stable_increments,
                    sample_white_noise)
from .semigroup import FracHeatOp, SingularVolterraOp, refinement_stability, \
    verify_kernel_hypothesis
from .sewing import SingularHolderPath, sewing_integral
from .solver import (Exponents, SolverConfig, band_limited_xi, build_problem, solve_mshe,
                     stability_experiment, zero_path)
from .spectral import SpectralGrid, TorusField, Weight, dealiased_product_values

COMMAND_DEFAULTS = {
    "regularity": dict(horizon_t=0.01, n_t=513, g_kind="weierstrass", g_scale=1.0,
                       samples=20),
    "tails": dict(hurst=0.4, g_kind="weierstrass", g_scale=1.0, samples=5000, value_m=512),
    "convergence": dict(horizon_t=0.05, grid_n=64, n_cells=2048, value_m=256,
                        g_kind="weierstrass", g_scale=1.0, beta=0.3, vartheta=0.2,
                        gamma=0.75, sigma=0.26, sewing_levels=11),
    "stability": dict(horizon_t=0.1, grid_n=64, n_cells=512, g_kind="step", g_scale=1.0),
    "verify-ops": dict(beta=0.8, vartheta=0.55, samples=3),
    "lfsm": dict(horizon_t=1.0, n_t=257, samples=4000, hurst=0.4, alpha=1.5),
}


def config_for(command: str, **overrides) -> ExperimentConfig:
    cfg = ExperimentConfig(command=command)
    for k, v in {**COMMAND_DEFAULTS.get(command, {}), **overrides}.items():
        setattr(cfg, k, v)
    return cfg


def g_function(cfg: ExperimentConfig, vgrid: av.ValueGrid | None = None):
    """Value function g as a callable of value-grid points."""
    a = cfg.g_scale
    kind = cfg.g_kind
    if kind == "sin":
        return lambda x: a * np.sin(x)
    if kind == "step":
        return lambda x: a * np.tanh(np.sin(x) / cfg.step_delta)
    if kind == "zero":
        return lambda x: np.zeros_like(x)
    if kind == "one":
        return lambda x: np.full_like(x, a)
    if kind == "weierstrass":
        def g(x):
            P = 2.0 * cfg.x_max
            top = int(np.log2(cfg.value_m)) - 2
            return a * sum(2.0 ** (-cfg.g_kappa * k) * np.cos(2 * np.pi * 2**k * x / P)
                           for k in range(1, top + 1))
        return g
    raise ValueError(f"unknown g_kind {kind!r}")


def drift_function(cfg: ExperimentConfig):
    if cfg.drift_kind == "none":
        return None
    base = {"sin": np.sin, "cos": np.cos}[cfg.drift_kind]
    return lambda x: cfg.drift_scale * base(x)


def make_xi(cfg: ExperimentConfig, grid: SpectralGrid) -> TorusField:
    if cfg.xi_kind == "smooth":
        return cfg.xi_scale * band_limited_xi(grid, cfg.xi_modes, cfg.seed_base)
    if cfg.xi_kind == "white":
        return cfg.xi_scale * sample_white_noise(grid, cfg.seeds()["noise"]).field
    if cfg.xi_kind == "one":
        return TorusField.constant(grid, cfg.xi_scale)
    raise ValueError(f"unknown xi_kind {cfg.xi_kind!r}")


def make_psi(cfg: ExperimentConfig, grid: SpectralGrid) -> TorusField:
    if cfg.psi_kind == "cos":
        return TorusField.from_function(grid, lambda x: np.cos(2 * np.pi * x))
    if cfg.psi_kind == "zero":
        return TorusField.zeros(grid)
    raise ValueError(f"unknown psi_kind {cfg.psi_kind!r}")


def make_path(cfg: ExperimentConfig, n_fine: int, seed=None):
    T = cfg.horizon_t
    if cfg.omega_kind == "zero":
        return zero_path(T, n_fine)
    p = sample_lfsm(cfg.alpha, cfg.hurst, T, n_fine + 1, cfg.tail_vmax or None,
                    cfg.seeds()["path"] if seed is None else seed)
    return p.t_grid, p.values


def exponents_of(cfg: ExperimentConfig) -> Exponents:
    return Exponents(cfg.beta, cfg.vartheta, cfg.gamma, cfg.sigma, cfg.kappa)


def build_from_config(cfg: ExperimentConfig, g=None):
    grid = SpectralGrid(cfg.grid_n)
    ot, ov = make_path(cfg, cfg.n_cells * cfg.path_ratio)
    return build_problem(g or g_function(cfg), ot, ov, grid, make_psi(cfg, grid),
                         make_xi(cfg, grid), cfg.horizon_t, cfg.n_cells, exponents_of(cfg),
                         alpha=cfg.alpha, x_max=cfg.x_max, m=cfg.value_m,
                         b_func=drift_function(cfg))


def solver_config(cfg: ExperimentConfig):
    return SolverConfig(picard_tol=cfg.picard_tol, k_max=cfg.k_max, safety=cfg.safety,
                        n_out=cfg.n_out)


def simulate(cfg: ExperimentConfig):
    pb = build_from_config(cfg)
    return pb, solve_mshe(pb, solver_config(cfg))


# --- averaged-field regularity ---------------------------------------------

@dataclass
class RegularityResult:
    gamma_hats: list
    gains: list
    gaps: np.ndarray
    mean_norms: np.ndarray
    kappa_eval: float

    @property
    def gamma_hat(self):
        return float(np.mean(self.gamma_hats))

    @property
    def gain_hat(self):
        return float(np.mean(self.gains))


def regularity_ensemble(cfg: ExperimentConfig) -> RegularityResult:
    vg = av.ValueGrid(cfg.x_max, cfg.value_m)
    g = g_function(cfg)(vg.points)
    t_grid = np.linspace(0.0, cfg.horizon_t, cfg.n_t)
    weight = Weight(cfg.weight_kind, cfg.weight_lambda) if cfg.weight_kind != "constant" \
        else Weight()
    if cfg.g_kind == "weierstrass":
        kappa_in = cfg.g_kappa
    else:
        kappa_in = av.holder_exponent_estimate(vg.field(g), *av.default_block_range(vg.spectral))
    kappa_eval = kappa_in + cfg.nu / (2.0 * cfg.hurst)
    ker = LFSMKernel(cfg.alpha, cfg.hurst, cfg.horizon_t, (cfg.n_t - 1) * cfg.path_ratio + 1,
                     cfg.tail_vmax or None)
    gam, gains, norms = [], [], []
    for k in range(cfg.samples):
        path = ker.sample(cfg.seeds()["path"] + k)
        A = av.compute_averaged_field(g, path, vg, t_grid, weight=weight)
        tr = av.estimate_time_regularity(A, kappa_eval)
        gam.append(tr.gamma_hat)
        gains.append(av.estimate_space_gain(A, g).gain)
        norms.append(tr.norms)
    return RegularityResult(gam, gains, tr.gaps, np.mean(norms, axis=0), kappa_eval)


def tails(cfg: ExperimentConfig) -> av.TailReport:
    vg = av.ValueGrid(cfg.x_max, cfg.value_m)
    g = g_function(cfg)(vg.points)
    return av.tail_check_blocks(g, vg, cfg.block_j, cfg.tail_s, cfg.tail_t, cfg.alpha,
                                cfg.hurst, cfg.nu, cfg.samples, cfg.seeds()["path"],
                                cfg.tail_n_fine)


# --- sewing ----------------------------------------------------------------

@dataclass
class SewingSetup:
    S: SingularVolterraOp
    X: av.AveragedDriver
    y: SingularHolderPath
    heat: FracHeatOp
    psi: TorusField
    path: tuple
    T: float


def sewing_setup(cfg: ExperimentConfig, g=None) -> SewingSetup:
    grid = SpectralGrid(cfg.grid_n)
    heat = FracHeatOp(cfg.alpha, grid)
    xi = TorusField.from_function(
        grid, lambda x: 0.6 * np.cos(2 * np.pi * x) + 0.4 * np.sin(4 * np.pi * x))
    S = SingularVolterraOp(heat, xi, cfg.beta, cfg.vartheta)
    vg = av.ValueGrid(cfg.x_max, cfg.value_m)
    gv = (g or g_function(cfg))(vg.points)
    T = cfg.horizon_t
    t_grid = np.linspace(0.0, T, cfg.n_cells + 1)
    ot, ov = make_path(cfg, cfg.n_cells * cfg.path_ratio)
    A = av.compute_averaged_field(gv, (ot, ov), vg, t_grid, gamma_declared=cfg.gamma)
    psi = TorusField.from_function(grid, lambda x: 0.5 * np.cos(2 * np.pi * x))
    y = SingularHolderPath.from_function(t_grid, lambda t: heat.apply(t, psi), cfg.sigma)
    return SewingSetup(S, av.AveragedDriver(A, cfg.gamma), y, heat, psi, (ot, ov), T)


def sewing_convergence(cfg: ExperimentConfig):
    st = sewing_setup(cfg)
    levels = min(cfg.sewing_levels, int(np.log2(cfg.n_cells)))
    return sewing_integral(st.S, st.X, st.y, st.T, n_max=levels, tol=0.0)


def riemann_oracle(st: SewingSetup, g_func):
    """Fine left-point sum of S_{T-r} g(y_r + omega_r) dr on the path's own grid."""
    ot, ov = st.path
    n = st.psi.grid.n
    r = ot[:-1]
    dr = np.diff(ot)
    psi_spec = np.fft.fft(st.psi.values)
    sym = st.heat.symbol
    out = np.zeros(n, dtype=complex)
    xi_spec = np.fft.fft(st.S.xi.values) / n
    for lo in range(0, r.size, 4096):
        rr = r[lo:lo + 4096]
        Y = np.fft.ifft(psi_spec[None, :] * np.exp(-sym[None, :] * rr[:, None]), axis=1).real
        G = g_func(Y + ov[lo:lo + rr.size, None]) * dr[lo:lo + rr.size, None]
        spec = dealiased_product_values(xi_spec, np.fft.fft(G, axis=1) / n, n)
        out += (spec * np.exp(-sym[None, :] * (st.T - rr)[:, None])).sum(axis=0)
    return TorusField(st.psi.grid, np.fft.ifft(out * n).real)


def smooth_sewing_oracle(cfg: ExperimentConfig):
    """Sup distance between the sewing integral and the fine Riemann oracle."""
    g = np.sin
    st = sewing_setup(cfg, g)
    levels = int(np.log2(cfg.n_cells))
    val, rep = sewing_integral(st.S, st.X, st.y, st.T, n_max=levels, tol=0.0)
    return (val - riemann_oracle(st, g)).sup_norm(), rep


# --- kernel hypothesis -----------------------------------------------------

def kernel_refinement(ns=(256, 512, 1024), beta=0.8, vartheta=0.55, n_samples=3, seed=7,
                      t_grid=None):
    t_grid = np.geomspace(1e-3, 1e-1, 6) if t_grid is None else t_grid
    reports = []
    for n in ns:
        grid = SpectralGrid(n)
        xi = sample_white_noise(grid, seed).field
        op = SingularVolterraOp(FracHeatOp(2.0, grid), xi, beta, vartheta)
        us = [band_limited_xi(grid, modes=4, seed=s) for s in range(n_samples)]
        reports.append(verify_kernel_hypothesis(op, beta, us, t_grid))
    return reports, refinement_stability(reports)


# --- stability -------------------------------------------------------------

def stability(cfg: ExperimentConfig):
    pb = build_from_config(cfg)
    vg = pb.averaged.value_grid
    widths = [w * vg.h for w in cfg.width_list()]
    return stability_experiment(pb, g_function(cfg)(vg.points), widths, solver_config(cfg))


# --- LFSM laws -------------------------------------------------------------

def fbm_covariance(t, hurst):
    s, u = np.meshgrid(t, t, indexing="ij")
    return 0.5 * (s ** (2 * hurst) + u ** (2 * hurst) - np.abs(s - u) ** (2 * hurst))


@dataclass
class CovarianceCheck:
    times: np.ndarray
    empirical: np.ndarray
    scale: float
    max_rel_error: float


def lfsm_covariance_check(hurst=0.3, n_paths=4000, n_points=15, refine=8, T=1.0,
                          seed_base=0) -> CovarianceCheck:
    """Empirical covariance of alpha = 2 paths against c * fBm covariance.

    Paths are simulated ``refine`` times finer than the comparison grid; t = 0 is
    dropped because both sides vanish there.  Errors are scaled by c*sqrt(F_ss F_tt).
    """
    paths = sample_lfsm_batch(2.0, hurst, T, n_points * refine + 1, n_paths, seed_base)
    X = paths[:, refine::refine]
    t = np.linspace(0.0, T, n_points + 1)[1:]
    C = X.T @ X / n_paths
    F = fbm_covariance(t, hurst)
    c = float(np.mean(np.diag(C) / np.diag(F)))
    d = np.sqrt(np.diag(F))
    err = np.abs(C - c * F) / (c * np.outer(d, d))
    return CovarianceCheck(t, C, c, float(err.max()))


def self_similarity_exponent(alpha, hurst, n_paths=4000, n_t=257, T=1.0, q=0.9,
                             indices=(32, 64, 128, 256), seed_base=0):
    """Slope of log quantile_q |L_t| against log t; equals H for an H-self-similar law."""
    paths = sample_lfsm_batch(alpha, hurst, T, n_t, n_paths, seed_base)
    t = np.linspace(0.0, T, n_t)
    idx = np.asarray(indices)
    qs = np.quantile(np.abs(paths[:, idx]), q, axis=0)
    return float(np.polyfit(np.log(t[idx]), np.log(qs), 1)[0]), dict(zip(t[idx], qs))


def levy_collapse_exact(alpha=1.5, n_t=257, T=1.0, seed=0) -> bool:
    """At H = 1/alpha the path must be the plain cumulative sum of its increments."""
    p = sample_lfsm(alpha, 1.0 / alpha, T, n_t, seed=seed)
    inc = sample_stable_increments(alpha, T / (n_t - 1), n_t - 1, seed).values
    return bool(np.array_equal(p.values, np.concatenate([[0.0], np.cumsum(inc)])))
