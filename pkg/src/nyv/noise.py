"""Stable Levy increments, linear fractional stable motion and spatial white noise.

Convention: the driving process has E[exp(i z L_t)] = exp(-|z|^alpha t), so
for alpha = 2 it is a Brownian motion with variance 2t.

Random streams come from Philox seeded through ``SeedSequence(seed,
spawn_key=(stream,))``.  Stream 0 drives L, stream 1 the tail process L~,
stream 2 spatial white noise.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .spectral import SpectralGrid, TorusField

STREAM_DRIVING = 0
STREAM_TAIL = 1
STREAM_WHITE = 2

TAIL_GROWTH = 1.05


def rng_for(seed: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & (2**64 - 1), spawn_key=(stream,))
    return np.random.Generator(np.random.Philox(ss))


def standard_stable(alpha: float, size, rng: np.random.Generator) -> np.ndarray:
    """Symmetric alpha-stable draws with characteristic function exp(-|z|^alpha)."""
    if not 0 < alpha <= 2:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    if alpha == 2:
        return rng.standard_normal(size) * np.sqrt(2.0)
    u = rng.uniform(-np.pi / 2, np.pi / 2, size)
    if alpha == 1:
        return np.tan(u)
    e = rng.standard_exponential(size)
    return (np.sin(alpha * u) / np.cos(u) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * u) / e) ** ((1.0 - alpha) / alpha))


@dataclass(frozen=True, eq=False)
class StableIncrements:
    alpha: float
    dt: float
    values: np.ndarray
    seed: int


def sample_stable_increments(alpha, dt, n, seed, stream=STREAM_DRIVING) -> StableIncrements:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if n < 1:
        raise ValueError("need n >= 1")
    x = standard_stable(alpha, n, rng_for(seed, stream))
    return StableIncrements(alpha, dt, dt ** (1.0 / alpha) * x, seed)


def _cell_integral(a, b, d):
    """Exact integral of u^d over [a, b], a >= 0, d > -1."""
    return (b ** (d + 1.0) - a ** (d + 1.0)) / (d + 1.0)


def _cell_averages(n, dt, d):
    # W[k] = average of u^d over [k dt, (k+1) dt]
    k = np.arange(n + 1, dtype=float)
    p = k ** (d + 1.0)
    return dt**d * np.diff(p) / (d + 1.0)


def tail_cells(T, dt, tail_vmax):
    """Cell edges of the tail integral: uniform dt cells up to T then geometric."""
    n_uni = int(round(T / dt))
    edges = list(np.arange(n_uni + 1) * dt)
    h = dt
    while edges[-1] < tail_vmax:
        h *= TAIL_GROWTH
        edges.append(min(edges[-1] + h, tail_vmax))
    return np.asarray(edges), n_uni


def _is_levy(alpha, hurst):
    return abs(hurst - 1.0 / alpha) < 1e-14


@dataclass(frozen=True)
class LFSMKernel:
    """Deterministic part of the moving-average discretisation."""

    alpha: float
    hurst: float
    T: float
    n_t: int
    tail_vmax: float | None = None

    def __post_init__(self):
        if not 0 < self.hurst < 1 and not _is_levy(self.alpha, self.hurst):
            raise ValueError(f"hurst must lie in (0, 1) or equal 1/alpha, got {self.hurst}")
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if self.n_t < 2:
            raise ValueError("need n_t >= 2")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.tail_vmax is None:
            object.__setattr__(self, "tail_vmax", 50.0 * self.T)
        if self.d <= -1.0:
            raise ValueError(f"kernel exponent {self.d} <= -1 is not locally integrable")

    @property
    def d(self) -> float:
        return self.hurst - 1.0 / self.alpha

    @property
    def levy(self) -> bool:
        return _is_levy(self.alpha, self.hurst)

    @property
    def dt(self) -> float:
        return self.T / (self.n_t - 1)

    @cached_property
    def t_grid(self):
        return np.linspace(0.0, self.T, self.n_t)

    @cached_property
    def W(self):
        return _cell_averages(2 * self.n_t, self.dt, self.d)

    @cached_property
    def tail_layout(self):
        return tail_cells(self.T, self.dt, self.tail_vmax)

    @cached_property
    def geo_weights(self):
        edges, n_uni = self.tail_layout
        a, b = edges[n_uni:-1], edges[n_uni + 1:]
        tt = self.t_grid[:, None]
        d = self.d
        return (_cell_integral(tt + a, tt + b, d) - _cell_integral(a, b, d)) / (b - a)

    def draw(self, seed):
        inc = sample_stable_increments(self.alpha, self.dt, self.n_t - 1, seed).values
        if self.levy:
            return inc, None
        widths = np.diff(self.tail_layout[0])
        tail_inc = widths ** (1.0 / self.alpha) * standard_stable(
            self.alpha, widths.size, rng_for(seed, STREAM_TAIL))
        return inc, tail_inc

    def drive_part(self, inc):
        # value at t_i: sum_{m<i} W[i-1-m] inc[m]
        n = self.n_t
        return np.concatenate([[0.0], np.convolve(self.W[: n - 1], inc)[: n - 1]])

    def tail_part(self, tail_inc):
        """sum_k avg_k[(t+v)^d - v^d] dL~_k at every grid time."""
        n = self.n_t
        _, n_uni = self.tail_layout
        uni = tail_inc[:n_uni]
        # On uniform cells the average of (t_i + v)^d over cell k is W[i+k].
        hankel = np.convolve(self.W[: 2 * n], uni[::-1])[n_uni - 1: n_uni - 1 + n]
        out = hankel - np.dot(self.W[:n_uni], uni) + self.geo_weights @ tail_inc[n_uni:]
        out[0] = 0.0
        return out

    def sample(self, seed) -> "LFSMPath":
        inc, tail_inc = self.draw(seed)
        if self.levy:
            values = np.concatenate([[0.0], np.cumsum(inc)])
            tail = np.zeros(self.n_t)
            bound = 0.0
        else:
            tail = self.tail_part(tail_inc)
            values = self.drive_part(inc) + tail
            bound = float(self.tail_vmax**self.d)
        meta = {"kernel_exponent": self.d, "tail_truncation_bound": bound}
        return LFSMPath(self.alpha, self.hurst, self.t_grid, values, self.tail_vmax, seed,
                        inc, tail, meta)


@dataclass(frozen=True, eq=False)
class LFSMPath:
    alpha: float
    hurst: float
    t_grid: np.ndarray
    values: np.ndarray
    tail_vmax: float
    seed: int
    increments: np.ndarray = field(repr=False, default=None)
    tail_values: np.ndarray = field(repr=False, default=None)
    metadata: dict = field(default_factory=dict)

    @property
    def T(self) -> float:
        return float(self.t_grid[-1])

    @property
    def dt(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    @property
    def exponent(self) -> float:
        return self.hurst - 1.0 / self.alpha

    def index_of(self, t: float) -> int:
        i = int(round(t / self.dt))
        if i < 0 or i >= self.t_grid.size or abs(self.t_grid[i] - t) > 1e-9 * self.dt + 1e-15:
            raise ValueError(f"time {t} is not on the path grid")
        return i

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["t", "value"])
            for t, v in zip(self.t_grid, self.values):
                wr.writerow([repr(float(t)), repr(float(v))])


def sample_lfsm(alpha, hurst, T, n_t, tail_vmax=None, seed=0) -> LFSMPath:
    """Moving-average LFSM with kernel-averaged weights on a uniform grid."""
    return LFSMKernel(alpha, hurst, T, n_t, tail_vmax).sample(seed)


def sample_lfsm_batch(alpha, hurst, T, n_t, n_paths, seed_base=0, tail_vmax=None):
    """Paths for seeds seed_base .. seed_base + n_paths - 1, one per row."""
    ker = LFSMKernel(alpha, hurst, T, n_t, tail_vmax)
    return np.stack([ker.sample(seed_base + k).values for k in range(n_paths)])


def lfsm_weights(path: LFSMPath, i: int) -> np.ndarray:
    """Weights on driving increments 0..i-1 for the value at grid index i."""
    if _is_levy(path.alpha, path.hurst):
        return np.ones(i)
    return _cell_averages(i, path.dt, path.exponent)[::-1]


def decompose_lfsm(path: LFSMPath, s: float, r: float):
    """Split L_r into the part driven by increments in (s, r] and the rest."""
    i_s, i_r = path.index_of(s), path.index_of(r)
    if not i_s < i_r:
        raise ValueError("need s < r")
    w = lfsm_weights(path, i_r)
    independent = float(np.dot(w[i_s:], path.increments[i_s:i_r]))
    measurable = float(np.dot(w[:i_s], path.increments[:i_s]) + path.tail_values[i_r])
    return independent, measurable


@dataclass(frozen=True, eq=False)
class WhiteNoiseField:
    field: TorusField
    regularity_target: float = -0.5


def sample_white_noise(grid: SpectralGrid, seed: int, stream=STREAM_WHITE) -> WhiteNoiseField:
    rng = rng_for(seed, stream)
    n = grid.n
    h = n // 2
    spec = np.zeros(n, dtype=complex)
    z = (rng.standard_normal(h - 1) + 1j * rng.standard_normal(h - 1)) / np.sqrt(2.0)
    spec[1:h] = z
    spec[h + 1:] = np.conj(z[::-1])
    spec[h] = rng.standard_normal()
    spec /= np.sqrt(grid.period)
    return WhiteNoiseField(TorusField.from_spectrum(grid, spec))


def ensemble_quantiles(samples_by_scale: dict, quantiles) -> list:
    rows = []
    for scale, vals in samples_by_scale.items():
        qs = np.quantile(np.asarray(vals), quantiles)
        rows.extend((scale, q, v) for q, v in zip(quantiles, qs))
    return rows


def write_ensemble_csv(path, rows):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["scale", "quantile", "value"])
        for scale, q, v in rows:
            wr.writerow([repr(float(scale)), repr(float(q)), repr(float(v))])
