"""Periodic spectral fields, Littlewood-Paley blocks and weighted Besov norms.

Fields live on a uniform grid of a 1-D torus of length ``period``.  The
spectrum is stored with the normalisation ``spectrum = fft(values) / n`` so
that ``spectrum[k]`` is the Fourier coefficient of ``exp(2 pi i k x / period)``.
"""
from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

FIELD_MAGIC = b"NYVF"
FIELD_VERSION = 1

# Dyadic partition constants, in units of the fundamental angular frequency.
CHI_INNER = 3.0 / 4.0
CHI_OUTER = 4.0 / 3.0


class GridMismatchError(ValueError):
    pass


class OutOfBandError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


class SupportError(ValueError):
    pass


def _check_finite(values, what="input"):
    if np.isnan(values).any():
        raise ValueError(f"NaN in {what}")


@dataclass(frozen=True)
class SpectralGrid:
    n: int
    period: float = 1.0
    origin: float = 0.0

    def __post_init__(self):
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"grid size must be a power of 2 and >= 8, got {self.n}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")

    @property
    def dx(self) -> float:
        return self.period / self.n

    @cached_property
    def points(self) -> np.ndarray:
        return self.origin + np.arange(self.n) * self.dx

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer mode numbers in FFT order; index n/2 holds -n/2."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)

    @cached_property
    def angular(self) -> np.ndarray:
        return 2.0 * np.pi * self.modes / self.period

    @property
    def fundamental(self) -> float:
        return 2.0 * np.pi / self.period

    @property
    def j_max(self) -> int:
        return int(np.log2(self.n)) - 1

    def compatible(self, other: "SpectralGrid") -> bool:
        return self.n == other.n and np.isclose(self.period, other.period)


@dataclass(frozen=True, eq=False)
class TorusField:
    grid: SpectralGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        _check_finite(v, "field values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid, func):
        return cls(grid, func(grid.points))

    @classmethod
    def from_spectrum(cls, grid, spectrum):
        return cls(grid, np.fft.ifft(np.asarray(spectrum) * grid.n).real)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.n, float(c)))

    @cached_property
    def spectrum(self) -> np.ndarray:
        s = np.fft.fft(self.values) / self.grid.n
        s.setflags(write=False)
        return s

    def apply_multiplier(self, mult) -> "TorusField":
        return TorusField.from_spectrum(self.grid, self.spectrum * mult)

    def derivative(self, order=1) -> "TorusField":
        mult = (1j * self.grid.angular) ** order
        if order % 2:
            mult[self.grid.n // 2] = 0.0
        return self.apply_multiplier(mult)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2_norm(self) -> float:
        return float(np.sqrt(np.sum(self.values**2) * self.grid.dx))

    def _other_values(self, other):
        if isinstance(other, TorusField):
            if not self.grid.compatible(other.grid):
                raise GridMismatchError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return TorusField(self.grid, self.values + self._other_values(other))

    __radd__ = __add__

    def __sub__(self, other):
        return TorusField(self.grid, self.values - self._other_values(other))

    def __mul__(self, c):
        if isinstance(c, TorusField):
            return NotImplemented
        return TorusField(self.grid, self.values * c)

    __rmul__ = __mul__

    def __neg__(self):
        return TorusField(self.grid, -self.values)


@dataclass(frozen=True)
class Weight:
    """Admissible weight: constant, or polynomial ``(1+|x|^2)^(-lam/2)``."""

    kind: str = "constant"
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in ("constant", "polynomial"):
            raise ValueError(f"unknown weight kind {self.kind!r}")

    @property
    def lam_prime(self) -> float:
        return abs(self.lam) if self.kind == "polynomial" else 0.0

    @property
    def admissibility_constant(self) -> float:
        return 2.0 ** (3.0 * self.lam_prime / 4.0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.ones_like(x)
        return (1.0 + x * x) ** (-self.lam / 2.0)

    def inverse_sup(self, z: float) -> float:
        """sup of 1/w over |x| <= z."""
        if self.kind == "constant":
            return 1.0
        return float(max((1.0 + z * z) ** (self.lam / 2.0), 1.0))


CONSTANT_WEIGHT = Weight()


def _smooth_step(x):
    # 0 for x <= 0, 1 for x >= 1, C-infinity in between.
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


def chi(r):
    """Low-frequency cutoff: 1 on |r| <= 3/4, 0 on |r| >= 4/3."""
    r = np.abs(np.asarray(r, dtype=float))
    return _smooth_step((CHI_OUTER - r) / (CHI_OUTER - CHI_INNER))


def phi(r):
    """Dyadic annulus bump supported in 3/4 <= |r| <= 8/3."""
    return chi(np.asarray(r, dtype=float) / 2.0) - chi(r)


def block_multiplier(grid: SpectralGrid, j: int) -> np.ndarray:
    if j < -1:
        raise OutOfBandError(f"block index must be >= -1, got {j}")
    if j > grid.j_max:
        raise OutOfBandError(f"block {j} beyond j_max={grid.j_max} for n={grid.n}")
    r = np.abs(grid.angular) / grid.fundamental
    if j == -1:
        return chi(r)
    return phi(r / 2.0**j)


def block_indices(grid: SpectralGrid) -> range:
    return range(-1, grid.j_max + 1)


def lp_block(f: TorusField, j: int) -> TorusField:
    return f.apply_multiplier(block_multiplier(f.grid, j))


def lp_blocks(f: TorusField) -> list[TorusField]:
    return [lp_block(f, j) for j in block_indices(f.grid)]


def lp_norm(values, grid: SpectralGrid, p=np.inf, w: Weight | None = None) -> float:
    v = np.abs(values)
    if w is not None:
        v = v * w(grid.points)
    if np.isinf(p):
        return float(v.max())
    return float((np.sum(v**p) * grid.dx) ** (1.0 / p))


def _lq(seq, q):
    seq = np.asarray(seq, dtype=float)
    if np.isinf(q):
        return float(seq.max())
    return float(np.sum(seq**q) ** (1.0 / q))


@dataclass
class BesovProfile:
    block_norms: np.ndarray
    kappa: float
    p: float
    q: float
    value: float
    j: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.j is None:
            self.j = np.arange(-1, len(self.block_norms) - 1)

    def rescaled(self, kappa) -> float:
        """Besov value for the same blocks at another regularity index."""
        return _lq(2.0 ** (self.j * kappa) * self.block_norms, self.q)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["j", "block_norm"])
            for j, b in zip(self.j, self.block_norms):
                wr.writerow([int(j), repr(float(b))])


def besov_norm(f: TorusField, kappa: float, p=np.inf, q=np.inf,
               w: Weight | None = None) -> BesovProfile:
    if not (p >= 1 and q >= 1):
        raise ValueError("p and q must be in [1, inf]")
    js = np.arange(-1, f.grid.j_max + 1)
    norms = np.array([lp_norm(lp_block(f, j).values, f.grid, p, w) for j in js])
    value = _lq(2.0 ** (js * kappa) * norms, q)
    return BesovProfile(norms, kappa, p, q, value, js)


def holder_norm(f: TorusField, beta: float, w: Weight | None = None) -> float:
    """The C^beta = B^beta_{inf,inf} norm."""
    return besov_norm(f, beta, np.inf, np.inf, w).value


def _loglog_slope(x, y):
    slope, _ = np.polyfit(np.asarray(x, float), np.asarray(y, float), 1)
    return float(slope)


def holder_exponent_estimate(f: TorusField, j_lo: int, j_hi: int) -> float:
    """Negated least-squares slope of log2 ||Delta_j f||_inf over [j_lo, j_hi]."""
    if not j_lo < j_hi <= f.grid.j_max:
        raise OutOfBandError(f"need j_lo < j_hi <= {f.grid.j_max}, got [{j_lo}, {j_hi}]")
    js = np.arange(j_lo, j_hi + 1)
    norms = np.array([lp_block(f, j).sup_norm() for j in js])
    floor = 1e-12 * max(f.sup_norm(), np.finfo(float).tiny)
    keep = norms > floor
    if keep.sum() < 3:
        raise InsufficientDataError(
            f"only {int(keep.sum())} nonzero blocks in [{j_lo}, {j_hi}]; need 3")
    return -_loglog_slope(js[keep], np.log2(norms[keep]))


def _pad_spectrum(c, m):
    n = c.size
    out = np.zeros(m, dtype=complex)
    h = n // 2
    out[:h] = c[:h]
    out[m - h + 1:] = c[h + 1:]
    out[h] = 0.5 * c[h]
    out[m - h] = 0.5 * c[h]
    return out


def _truncate_spectrum(c, n):
    m = c.size
    h = n // 2
    out = np.zeros(n, dtype=complex)
    out[:h] = c[:h]
    out[h + 1:] = c[m - h + 1:]
    out[h] = c[h] + c[m - h]
    return out


def dealiased_product_values(a_spec, b_spec, n):
    """3/2-rule product of two (batched) spectra, returns the product spectrum."""
    m = 3 * n // 2
    a = np.fft.ifft(_pad_batch(a_spec, m), axis=-1).real * m
    b = np.fft.ifft(_pad_batch(b_spec, m), axis=-1).real * m
    prod = np.fft.fft(a * b, axis=-1) / m
    return _truncate_batch(prod, n)


def _pad_batch(c, m):
    c = np.asarray(c)
    if c.ndim == 1:
        return _pad_spectrum(c, m)
    n = c.shape[-1]
    h = n // 2
    out = np.zeros(c.shape[:-1] + (m,), dtype=complex)
    out[..., :h] = c[..., :h]
    out[..., m - h + 1:] = c[..., h + 1:]
    out[..., h] = 0.5 * c[..., h]
    out[..., m - h] = 0.5 * c[..., h]
    return out


def _truncate_batch(c, n):
    if c.ndim == 1:
        return _truncate_spectrum(c, n)
    m = c.shape[-1]
    h = n // 2
    out = np.zeros(c.shape[:-1] + (n,), dtype=complex)
    out[..., :h] = c[..., :h]
    out[..., h + 1:] = c[..., m - h + 1:]
    out[..., h] = c[..., h] + c[..., m - h]
    return out


def dealiased_product(xi: TorusField, f: TorusField) -> TorusField:
    if not xi.grid.compatible(f.grid):
        raise GridMismatchError("product of fields on different grids")
    spec = dealiased_product_values(xi.spectrum, f.spectrum, f.grid.n)
    return TorusField.from_spectrum(f.grid, spec)


@dataclass(frozen=True)
class BernsteinReport:
    ratio: float
    lower_ratio: float
    upper_ratio: float


def bernstein_check(f: TorusField, a: float, c1: float = CHI_INNER,
                    c2: float = 8.0 / 3.0) -> BernsteinReport:
    """Derivative-to-field ratios for a field with spectrum in the annulus a*[c1, c2].

    ``a`` is measured in cycles per period.  ``ratio`` is ||f'||/(a ||f||);
    ``lower_ratio``/``upper_ratio`` are the min/max over derivative orders 1..3 of
    (||D^n f|| / (a^n ||f||))^(1/n).
    """
    spec = f.spectrum
    amp = np.abs(spec)
    if amp.max() == 0.0:
        raise SupportError("empty spectrum")
    kabs = np.abs(f.grid.modes)
    active = amp > 1e-12 * amp.max()
    if np.any((kabs[active] < c1 * a) | (kabs[active] > c2 * a)):
        raise SupportError(f"spectrum not supported in the annulus {a}*[{c1}, {c2}]")
    base = f.sup_norm()
    per_order = [(f.derivative(n).sup_norm() / (a**n * base)) ** (1.0 / n) for n in (1, 2, 3)]
    return BernsteinReport(per_order[0], min(per_order), max(per_order))


def write_field(path, f: TorusField):
    header = struct.pack("<4sIQd", FIELD_MAGIC, FIELD_VERSION, f.grid.n, f.grid.period)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.asarray(f.values, dtype="<f8").tobytes())


def read_field(path, origin=0.0) -> TorusField:
    data = Path(path).read_bytes()
    size = struct.calcsize("<4sIQd")
    magic, version, n, period = struct.unpack("<4sIQd", data[:size])
    if magic != FIELD_MAGIC:
        raise ValueError(f"{path}: bad magic {magic!r}")
    if version != FIELD_VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    values = np.frombuffer(data[size:], dtype="<f8")
    if values.size != n:
        raise ValueError(f"{path}: expected {n} values, found {values.size}")
    return TorusField(SpectralGrid(int(n), period, origin), values.astype(float))
