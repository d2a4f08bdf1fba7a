"""The averaged field A(t, x) = int_0^t g(x + omega_r) dr on a periodised value domain."""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .noise import LFSMKernel
from .spectral import (CONSTANT_WEIGHT, InsufficientDataError, SpectralGrid, TorusField,
                       Weight, besov_norm, block_multiplier, holder_exponent_estimate)

TABLE_MAGIC = b"NYVA"
TABLE_VERSION = 1
_HEADER = "<4sIQQdd"


class RangeError(ValueError):
    pass


@dataclass(frozen=True)
class ValueGrid:
    x_max: float
    m: int

    def __post_init__(self):
        if self.m < 64 or self.m & (self.m - 1):
            raise ValueError(f"value grid size must be a power of 2 and >= 64, got {self.m}")
        if not self.x_max > 0:
            raise ValueError("x_max must be positive")

    @cached_property
    def spectral(self) -> SpectralGrid:
        return SpectralGrid(self.m, 2.0 * self.x_max, -self.x_max)

    @property
    def points(self) -> np.ndarray:
        return self.spectral.points

    @property
    def h(self) -> float:
        return 2.0 * self.x_max / self.m

    @property
    def safe(self) -> float:
        return 0.5 * self.x_max

    def field(self, values) -> TorusField:
        return TorusField(self.spectral, values)


class PeriodicCubic:
    """Periodic C^2 cubic splines for every row of a table on a value grid.

    Rows may be evaluated at row-dependent points, which is what the solver
    needs when y differs from one time to the next.
    """

    def __init__(self, vgrid: ValueGrid, table):
        table = np.atleast_2d(np.asarray(table, dtype=float))
        self.vgrid = vgrid
        x = np.append(vgrid.points, vgrid.x_max)
        y = np.concatenate([table, table[:, :1]], axis=1).T
        self.coef = CubicSpline(x, y, axis=0, bc_type="periodic").c  # (4, m, rows)

    def __call__(self, rows, pts):
        vg = self.vgrid
        u = (np.asarray(pts, dtype=float) + vg.x_max) / vg.h
        fl = np.floor(u)
        s = (u - fl) * vg.h
        idx = fl.astype(np.int64) % vg.m
        c = self.coef[:, idx, rows]
        return ((c[0] * s + c[1]) * s + c[2]) * s + c[3]


def spectral_derivative_table(vgrid: ValueGrid, table, order: int):
    k = np.fft.rfftfreq(vgrid.m, d=1.0 / vgrid.m)
    mult = (1j * 2.0 * np.pi * k / (2.0 * vgrid.x_max)) ** order
    if order % 2:
        mult[-1] = 0.0
    return np.fft.irfft(np.fft.rfft(table, axis=-1) * mult, n=vgrid.m, axis=-1)


@dataclass(eq=False)
class AveragedField:
    value_grid: ValueGrid
    t_grid: np.ndarray
    table: np.ndarray
    weight: Weight = CONSTANT_WEIGHT
    gamma_declared: float = 0.75
    kappa_declared: float = 3.0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=float)
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        if self.table.shape != (self.t_grid.size, self.value_grid.m):
            raise ValueError("table shape does not match the grids")
        self._splines = {}
        self._derivs = {0: self.table}

    @property
    def T(self) -> float:
        return float(self.t_grid[-1])

    @property
    def dt(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    @property
    def n_t(self) -> int:
        return self.t_grid.size

    def index_of(self, t: float) -> int:
        i = int(round(t / self.dt))
        if i < 0 or i >= self.n_t or abs(self.t_grid[i] - t) > 1e-9 * self.dt:
            raise ValueError(f"time {t} is not on the averaged-field grid")
        return i

    def derivative(self, order: int) -> np.ndarray:
        if order not in self._derivs:
            self._derivs[order] = spectral_derivative_table(self.value_grid, self.table, order)
        return self._derivs[order]

    def spline(self, order: int = 0) -> PeriodicCubic:
        if order not in self._splines:
            self._splines[order] = PeriodicCubic(self.value_grid, self.derivative(order))
        return self._splines[order]

    def check_range(self, values, margin=None):
        safe = self.value_grid.safe if margin is None else margin
        lo, hi = float(np.min(values)), float(np.max(values))
        if lo < -safe or hi > safe:
            bad = lo if -lo > hi else hi
            raise RangeError(f"value {bad:.6g} outside the safe box [-{safe:.6g}, {safe:.6g}]")

    def eval_diff(self, i, j, pts, order=0):
        """(D^order A[j] - D^order A[i]) at pts; i, j may be arrays broadcast with pts."""
        sp = self.spline(order)
        return sp(j, pts) - sp(i, pts)

    def slice_field(self, i) -> TorusField:
        return self.value_grid.field(self.table[i])

    def diff_field(self, i, j) -> TorusField:
        return self.value_grid.field(self.table[j] - self.table[i])

    def write(self, path):
        with open(path, "wb") as fh:
            fh.write(struct.pack(_HEADER, TABLE_MAGIC, TABLE_VERSION, self.n_t,
                                 self.value_grid.m, self.T, self.value_grid.x_max))
            fh.write(np.ascontiguousarray(self.table, dtype="<f8").tobytes())

    @classmethod
    def read(cls, path, **kw) -> "AveragedField":
        data = open(path, "rb").read()
        size = struct.calcsize(_HEADER)
        magic, version, n_t, m, T, x_max = struct.unpack(_HEADER, data[:size])
        if magic != TABLE_MAGIC or version != TABLE_VERSION:
            raise ValueError(f"{path}: not an averaged-field dump")
        table = np.frombuffer(data[size:], dtype="<f8").reshape(n_t, m)
        return cls(ValueGrid(x_max, int(m)), np.linspace(0, T, n_t), table.copy(), **kw)


def _path_arrays(omega):
    if hasattr(omega, "t_grid"):
        return np.asarray(omega.t_grid, float), np.asarray(omega.values, float)
    t, v = omega
    return np.asarray(t, float), np.asarray(v, float)


def _nesting_ratio(t_fine, t_grid):
    n_f, n_c = t_fine.size - 1, t_grid.size - 1
    if n_c < 1 or n_f % n_c or n_f // n_c < 4 or not np.isclose(t_fine[-1], t_grid[-1]):
        raise ValueError(f"path grid ({n_f} steps) must refine the table grid ({n_c} steps) "
                         "by an integer ratio >= 4 over the same horizon")
    return n_f // n_c


def compute_averaged_field(g, omega, value_grid: ValueGrid, t_grid, method="cubic",
                           weight=CONSTANT_WEIGHT, gamma_declared=0.75,
                           kappa_declared=3.0) -> AveragedField:
    """Left-rule quadrature of g(x + omega_r) on the fine path grid.

    ``g`` holds samples on ``value_grid``.  ``method="cubic"`` interpolates g
    with a periodic cubic spline; ``method="fourier"`` uses the exact
    trigonometric interpolant, so block projections commute with averaging.
    """
    g = np.asarray(g.values if isinstance(g, TorusField) else g, dtype=float)
    if g.shape != (value_grid.m,):
        raise ValueError("g must be sampled on the value grid")
    t_grid = np.asarray(t_grid, dtype=float)
    t_fine, w = _path_arrays(omega)
    ratio = _nesting_ratio(t_fine, t_grid)
    if np.max(np.abs(w)) + value_grid.safe > value_grid.x_max:
        raise RangeError(f"path range {np.max(np.abs(w)):.4g} leaves no room in x_max="
                         f"{value_grid.x_max}; periodisation would wrap")
    dr = np.diff(t_fine)
    left = w[:-1]
    if method == "cubic":
        sp = PeriodicCubic(value_grid, g)
        pts = value_grid.points[None, :] + left[:, None]
        vals = sp(0, pts) * dr[:, None]
        cum = np.cumsum(vals, axis=0)
    elif method == "fourier":
        cum = _fourier_cumulative(value_grid, g, left, dr)
    else:
        raise ValueError(f"unknown method {method!r}")
    table = np.vstack([np.zeros(value_grid.m), cum[ratio - 1::ratio]])
    return AveragedField(value_grid, t_grid, table, weight, gamma_declared, kappa_declared,
                         {"method": method, "ratio": ratio})


def _fourier_cumulative(vgrid, g, left, dr):
    m = vgrid.m
    ghat = np.fft.rfft(g)
    k = np.fft.rfftfreq(m, d=1.0 / m)
    omega_k = 2.0 * np.pi * k / (2.0 * vgrid.x_max)
    # Nyquist term is not shift-covariant for real fields; drop it.
    ghat[-1] = 0.0
    phase = np.exp(1j * np.outer(left, omega_k)) * dr[:, None]
    return np.fft.irfft(np.cumsum(phase, axis=0) * ghat, n=m, axis=-1)


def lift_apply(A: AveragedField, s: float, t: float, theta: TorusField) -> TorusField:
    i, j = A.index_of(s), A.index_of(t)
    if i > j:
        raise ValueError("need s <= t")
    A.check_range(theta.values)
    return TorusField(theta.grid, A.eval_diff(i, j, theta.values))


def lift_gradient(A: AveragedField, s: float, t: float, theta: TorusField) -> TorusField:
    i, j = A.index_of(s), A.index_of(t)
    if i > j:
        raise ValueError("need s <= t")
    A.check_range(theta.values)
    return TorusField(theta.grid, A.eval_diff(i, j, theta.values, order=1))


def _fit_window(scales):
    return slice(2, len(scales) - 2) if len(scales) >= 7 else slice(0, len(scales))


@dataclass
class TimeRegularity:
    gamma_hat: float
    gaps: np.ndarray
    norms: np.ndarray

    def rows(self):
        return list(zip(self.gaps, self.norms))


def estimate_time_regularity(A: AveragedField, kappa_eval: float,
                             weight: Weight | None = None) -> TimeRegularity:
    """Slope of log mean C^kappa(w) norm of A[t]-A[s] against log |t-s| over dyadic gaps."""
    if A.n_t < 64:
        raise ValueError("need n_t >= 64")
    w = A.weight if weight is None else weight
    n = A.n_t - 1
    gaps, norms = [], []
    step = n // 2
    while step >= 1:
        vals = [besov_norm(A.diff_field(i, i + step), kappa_eval, w=w).value
                for i in range(0, n - step + 1, step)]
        gaps.append(step * A.dt)
        norms.append(np.mean(vals))
        step //= 2
    gaps, norms = np.array(gaps), np.array(norms)
    if not np.all(norms > 0):
        raise ValueError("averaged field increments vanish; regularity undefined")
    sl = _fit_window(gaps)
    slope = np.polyfit(np.log(gaps[sl]), np.log(norms[sl]), 1)[0]
    return TimeRegularity(float(slope), gaps, norms)


@dataclass
class SpaceGain:
    kappa_in: float
    kappa_out: float
    saturated: bool

    @property
    def gain(self) -> float:
        return self.kappa_out - self.kappa_in


def default_block_range(grid: SpectralGrid):
    return 1, grid.j_max - 2


def estimate_space_gain(A: AveragedField, g, j_lo=None, j_hi=None, i_t=-1) -> SpaceGain:
    gf = g if isinstance(g, TorusField) else A.value_grid.field(g)
    lo, hi = default_block_range(gf.grid)
    j_lo = lo if j_lo is None else j_lo
    j_hi = hi if j_hi is None else j_hi
    k_in = holder_exponent_estimate(gf, j_lo, j_hi)
    out = A.slice_field(i_t)
    try:
        k_out = holder_exponent_estimate(out, j_lo, j_hi)
        saturated = False
    except InsufficientDataError:
        k_out, saturated = np.inf, True
    return SpaceGain(k_in, k_out, saturated)


def weierstrass(vgrid: ValueGrid, kappa: float, n_terms: int | None = None) -> np.ndarray:
    """sum_m 2^(-kappa m) cos(2 pi 2^m x / period) up to the grid's band."""
    top = int(np.log2(vgrid.m)) - 2 if n_terms is None else n_terms
    x = vgrid.points
    P = 2.0 * vgrid.x_max
    return sum(2.0 ** (-kappa * k) * np.cos(2 * np.pi * 2**k * x / P) for k in range(1, top + 1))


@dataclass
class TailReport:
    ratios: np.ndarray
    quantiles: dict
    slope: float
    intercept: float
    r2: float


def block_integral_norms(g, vgrid: ValueGrid, j: int, s_idx: int, t_idx: int, paths, dt):
    """sup_x |int_s^t Delta_j g(x + L_r) dr| for each path, computed mode by mode."""
    m = vgrid.m
    mult = block_multiplier(vgrid.spectral, j)
    ghat = np.fft.fft(np.asarray(g, float)) / m * mult
    active = np.nonzero(np.abs(ghat) > 0)[0]
    if active.size == 0:
        raise ValueError(f"block {j} of g is identically zero")
    omega_k = vgrid.spectral.angular[active]
    out = []
    for w in paths:
        seg = np.asarray(w)[s_idx:t_idx]
        phase = np.exp(1j * np.outer(seg, omega_k)).sum(axis=0) * dt
        spec = np.zeros(m, dtype=complex)
        spec[active] = ghat[active] * phase
        out.append(np.max(np.abs(np.fft.ifft(spec * m).real)))
    return np.asarray(out)


def tail_regression(ratios, q_lo=0.5, q_hi=0.999):
    r = np.sort(np.asarray(ratios, float))
    n = r.size
    surv = 1.0 - np.arange(n) / n
    lo, hi = int(q_lo * n), int(q_hi * n)
    x2, y = r[lo:hi] ** 2, np.log(surv[lo:hi])
    slope, intercept = np.polyfit(x2, y, 1)
    pred = slope * x2 + intercept
    ss_res = np.sum((y - pred) ** 2)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(intercept), float(r2)


def tail_check_blocks(g, vgrid: ValueGrid, j, s, t, alpha, hurst, nu, n_samples, seed,
                      n_fine=1024, paths=None) -> TailReport:
    """Normalised block ratios over independent LFSM paths on [0, T=t] with n_fine steps.

    ``paths`` may override the sampled ensemble (rows on the same grid).
    """
    if n_samples < 2000 and paths is None:
        raise ValueError("need n_samples >= 2000")
    dt = t / n_fine
    s_idx, t_idx = int(round(s / dt)), n_fine
    if paths is None:
        ker = LFSMKernel(alpha, hurst, t, n_fine + 1)
        paths = (ker.sample(seed + k).values for k in range(n_samples))
    norms = block_integral_norms(g, vgrid, j, s_idx, t_idx, paths, dt)
    gb = TorusField(vgrid.spectral, g).apply_multiplier(block_multiplier(vgrid.spectral, j))
    scale = (t - s) ** (1.0 - nu / 2.0) * 2.0 ** (-j * nu / (2.0 * hurst)) * gb.sup_norm()
    ratios = norms / scale
    qs = (0.5, 0.9, 0.99, 0.999)
    quant = dict(zip(qs, np.quantile(ratios, qs)))
    if np.ptp(ratios) == 0:
        return TailReport(ratios, quant, 0.0, 0.0, 0.0)
    slope, icpt, r2 = tail_regression(ratios)
    return TailReport(ratios, quant, slope, icpt, r2)


def write_regularity(path_csv, path_summary, rows, summary: dict):
    with open(path_csv, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["scale", "norm"])
        for a, b in rows:
            wr.writerow([repr(float(a)), repr(float(b))])
    with open(path_summary, "w") as fh:
        for k, v in summary.items():
            fh.write(f"{k} = {v}\n")


@dataclass(eq=False)
class AveragedDriver:
    """Non-linear driver X_{s,t}(y) = A[t](y) - A[s](y) on fields y."""

    A: AveragedField
    gamma: float | None = None

    def __post_init__(self):
        if self.gamma is None:
            self.gamma = self.A.gamma_declared

    def _idx(self, s, t):
        return self.A.index_of(s), self.A.index_of(t)

    def increment(self, s, t, y: TorusField) -> TorusField:
        i, j = self._idx(s, t)
        return TorusField(y.grid, self.A.eval_diff(i, j, y.values))

    def directional(self, s, t, y: TorusField, direction: TorusField) -> TorusField:
        i, j = self._idx(s, t)
        return TorusField(y.grid, self.A.eval_diff(i, j, y.values, 1) * direction.values)

    def increment_values(self, i, j, yvals, order=0):
        return self.A.eval_diff(i, j, yvals, order)

    @cached_property
    def holder_constants(self):
        """max over dyadic gaps and pairs of sup|D^k(A_t - A_s)| / |t-s|^gamma, k = 0..2."""
        A = self.A
        n = A.n_t - 1
        consts = []
        for k in range(3):
            D = A.derivative(k)
            best, step = 0.0, n
            while step >= 1:
                inc = np.abs(D[step:] - D[:-step]).max()
                best = max(best, inc / (step * A.dt) ** self.gamma)
                step //= 2
            consts.append(best)
        return consts

    def growth(self, z: float) -> float:
        return self.A.weight.inverse_sup(z) * max(self.holder_constants)
