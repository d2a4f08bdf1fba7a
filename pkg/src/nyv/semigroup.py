"""Fractional heat semigroup and the singular operator S_t = P_t(xi .)."""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field

import numpy as np

from .spectral import (GridMismatchError, SpectralGrid, TorusField, dealiased_product,
                       holder_norm)

DEFAULT_THETA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class FracHeatOp:
    alpha: float
    grid: SpectralGrid

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")

    @property
    def symbol(self) -> np.ndarray:
        return np.abs(self.grid.angular) ** self.alpha

    def multiplier(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError(f"heat semigroup needs t >= 0, got {t}")
        if t == 0:
            return np.ones(self.grid.n)
        return np.exp(-self.symbol * t)

    def apply(self, t: float, f: TorusField) -> TorusField:
        if not self.grid.compatible(f.grid):
            raise GridMismatchError("field and semigroup grids differ")
        if t == 0:
            return f
        return f.apply_multiplier(self.multiplier(t))


def heat_apply(op: FracHeatOp, t: float, f: TorusField) -> TorusField:
    return op.apply(t, f)


@dataclass(frozen=True, eq=False)
class SingularVolterraOp:
    heat: FracHeatOp
    xi: TorusField
    beta: float
    vartheta: float

    def __post_init__(self):
        if not self.beta > self.vartheta >= 0:
            raise ValueError(f"need beta > vartheta >= 0, got beta={self.beta}, "
                             f"vartheta={self.vartheta}")
        if not 0 <= self.rho < 1:
            raise ValueError(f"singularity rho={self.rho} outside [0, 1)")
        if not self.heat.grid.compatible(self.xi.grid):
            raise GridMismatchError("noise and semigroup grids differ")

    @property
    def rho(self) -> float:
        return (self.beta + self.vartheta) / self.heat.alpha

    @property
    def grid(self) -> SpectralGrid:
        return self.heat.grid

    def multiply(self, f: TorusField) -> TorusField:
        return dealiased_product(self.xi, f)

    def apply(self, t: float, f: TorusField) -> TorusField:
        if t <= 0:
            raise ValueError(f"singular operator is evaluated only for t > 0, got {t}")
        return self.heat.apply(t, self.multiply(f))

    def apply_spectrum(self, t, spec):
        """Semigroup part only, on an already multiplied spectrum."""
        return spec * self.heat.multiplier(t)


def singular_apply(op: SingularVolterraOp, t: float, f: TorusField) -> TorusField:
    return op.apply(t, f)


@dataclass
class KernelReport:
    rows: list = field(default_factory=list)

    def add(self, estimate_id, theta, theta_prime, ratios):
        r = np.asarray(ratios, dtype=float)
        self.rows.append({
            "estimate_id": estimate_id, "theta": theta, "theta_prime": theta_prime,
            "max_ratio": float(r.max()) if r.size else 0.0,
            "median_ratio": float(np.median(r)) if r.size else 0.0,
            "n_samples": int(r.size),
        })

    def max_ratio(self, estimate_id, theta=None, theta_prime=None) -> float:
        vals = [r["max_ratio"] for r in self.rows if r["estimate_id"] == estimate_id
                and (theta is None or r["theta"] == theta)
                and (theta_prime is None or r["theta_prime"] == theta_prime)]
        return max(vals)

    def keys(self):
        return [(r["estimate_id"], r["theta"], r["theta_prime"]) for r in self.rows]

    def to_csv(self, path):
        cols = ["estimate_id", "theta", "theta_prime", "max_ratio", "median_ratio", "n_samples"]
        with open(path, "w", newline="") as fh:
            wr = csv.DictWriter(fh, cols, lineterminator="\n")
            wr.writeheader()
            wr.writerows(self.rows)


def verify_kernel_hypothesis(op: SingularVolterraOp, beta: float, sample_fields,
                             t_grid, theta_grid=DEFAULT_THETA_GRID,
                             norm=None) -> KernelReport:
    """Measure the three increment ratios of a rho-singular operator.

    Ratios are taken in the C^beta norm unless ``norm`` is given.  Zero samples
    contribute ratio 0.
    """
    if not sample_fields:
        raise ValueError("need at least one sample field")
    t_grid = np.sort(np.asarray(t_grid, dtype=float))
    if t_grid[0] <= 0:
        raise ValueError("t_grid must lie in (0, T]")
    if norm is None:
        def norm(f):
            return holder_norm(f, beta)
    rho = op.rho
    ratios_i = []
    ratios_ii = {th: [] for th in theta_grid}
    ratios_iii = {(th, thp): [] for th in theta_grid for thp in theta_grid}

    for u in sample_fields:
        base = norm(u)
        xu = op.multiply(u)
        # Cache S_r u for every time difference we need.
        cache = {}

        def s_of(r):
            if r not in cache:
                cache[r] = op.heat.apply(r, xu)
            return cache[r]

        for t in t_grid:
            ratios_i.append(0.0 if base == 0 else norm(s_of(t)) * t**rho / base)
        for s, t in itertools.combinations(t_grid, 2):
            val = 0.0 if base == 0 else norm(s_of(t) - s_of(s)) / base
            for th in theta_grid:
                ratios_ii[th].append(val * s ** (th + rho) / (t - s) ** th)
        for s, t, tp, tau in itertools.combinations(t_grid, 4):
            if tp <= t:
                continue
            if base == 0:
                val = 0.0
            else:
                rect = (s_of(tau - t) - s_of(tau - s)) - (s_of(tp - t) - s_of(tp - s))
                val = norm(rect) / base
            for th, thp in ratios_iii:
                w = (tp - t) ** (th + thp + rho) / ((tau - tp) ** thp * (t - s) ** th)
                ratios_iii[(th, thp)].append(val * w)

    rep = KernelReport()
    rep.add("i", 0.0, 0.0, ratios_i)
    for th, r in ratios_ii.items():
        rep.add("ii", th, 0.0, r)
    for (th, thp), r in ratios_iii.items():
        rep.add("iii", th, thp, r)
    return rep


def refinement_stability(reports) -> dict:
    """For each estimate key, max over refinement levels divided by the median."""
    keys = reports[0].keys()
    out = {}
    for k in keys:
        vals = np.array([rep.max_ratio(*k) for rep in reports])
        med = np.median(vals)
        out[k] = float(vals.max() / med) if med > 0 else (0.0 if vals.max() == 0 else np.inf)
    return out
