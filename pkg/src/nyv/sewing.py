"""Singular Hoelder seminorms and the dyadic non-linear Young-Volterra integral."""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .spectral import TorusField


class ExponentError(ValueError):
    pass


def sup_norm(f: TorusField) -> float:
    return f.sup_norm()


def validate_exponents(gamma, rho, sigma):
    """Constraints under which the dyadic sums converge."""
    problems = []
    if not gamma > 0.5:
        problems.append(f"gamma={gamma} must exceed 1/2")
    if not 0 < sigma < gamma - rho:
        problems.append(f"sigma={sigma} must lie in (0, gamma - rho = {gamma - rho:.4g})")
    if not sigma + gamma > 1:
        problems.append(f"sigma + gamma = {sigma + gamma:.4g} must exceed 1")
    if problems:
        raise ExponentError("; ".join(problems))
    return gamma - rho - sigma


# --- paths -----------------------------------------------------------------

@dataclass(eq=False)
class SingularHolderPath:
    t_grid: np.ndarray
    fields: list
    sigma: float
    cached_seminorm: float | None = None

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        if len(self.fields) != self.t_grid.size:
            raise ValueError("one field per time point required")
        g0 = self.fields[0].grid
        if any(not f.grid.compatible(g0) for f in self.fields):
            raise ValueError("all fields must share one grid")

    @classmethod
    def from_function(cls, t_grid, func, sigma):
        return cls(t_grid, [func(t) for t in t_grid], sigma)

    @property
    def dt(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0])

    def index_of(self, t: float) -> int:
        i = int(round((t - self.t_grid[0]) / self.dt))
        if i < 0 or i >= self.t_grid.size or abs(self.t_grid[i] - t) > 1e-9 * self.dt:
            raise ValueError(f"time {t} is not on the path grid")
        return i

    def at(self, t: float) -> TorusField:
        return self.fields[self.index_of(t)]

    def values(self) -> np.ndarray:
        return np.stack([f.values for f in self.fields])

    def seminorm(self, norm=None) -> float:
        if norm is None and self.cached_seminorm is not None:
            return self.cached_seminorm
        val = singular_holder_seminorm(self, norm=norm)
        if norm is None:
            self.cached_seminorm = val
        return val

    def sup(self) -> float:
        return max(f.sup_norm() for f in self.fields)


def _pair_weights(times, sigma):
    s, t = times[:, None], times[None, :]
    gap = t - s
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(gap > 0, s / np.where(gap > 0, gap, 1.0), 0.0)
    return np.where((ratio >= 1.0), ratio**sigma, 1.0)


def _pair_norms(y: SingularHolderPath, norm=None):
    n = y.t_grid.size
    out = np.zeros((n, n))
    if norm is None:
        V = y.values()
        for i in range(n - 1):
            out[i, i + 1:] = np.abs(V[i + 1:] - V[i]).max(axis=1)
    else:
        for i in range(n - 1):
            for j in range(i + 1, n):
                out[i, j] = norm(y.fields[j] - y.fields[i])
    return out


def singular_holder_seminorm(y: SingularHolderPath, norm=None, sigma=None) -> float:
    """max over grid pairs s < t of |y_t - y_s| (s/(t-s))^zeta*, zeta* in {0, sigma}.

    Times are measured from the path's own origin t_grid[0].
    """
    sigma = y.sigma if sigma is None else sigma
    if y.t_grid.size < 2:
        raise ValueError("need at least two time points")
    times = y.t_grid - y.t_grid[0]
    D = _pair_norms(y, norm)
    W = _pair_weights(times, sigma)
    return float(np.max(np.triu(D * W, 1)))


def seminorm_bruteforce(y: SingularHolderPath, n_zeta=101, norm=None) -> float:
    times = y.t_grid - y.t_grid[0]
    D = _pair_norms(y, norm)
    s, t = times[:, None], times[None, :]
    gap = np.where(t > s, t - s, 1.0)
    best = 0.0
    for z in np.linspace(0.0, y.sigma, n_zeta):
        with np.errstate(divide="ignore"):
            W = np.where(t > s, (s / gap) ** z, 0.0)
        # s = 0 pairs only enter at zeta = 0 (0^0 = 1)
        best = max(best, float(np.max(np.triu(D * W, 1))))
    return best


# --- operators and drivers -------------------------------------------------

@dataclass(frozen=True, eq=False)
class IdentityOperator:
    rho: float = 0.0

    def apply(self, t, f):
        return f


@dataclass(frozen=True, eq=False)
class SemigroupOperator:
    """Plain heat semigroup as a singular operator (rho = 0 unless declared)."""

    heat: object
    rho: float = 0.0

    def apply(self, t, f):
        return self.heat.apply(t, f)


@dataclass(eq=False)
class LinearDriver:
    """X_{s,t}(y) = (t - s) c y."""

    c: float = 1.0
    gamma: float = 1.0

    def increment(self, s, t, y):
        return (t - s) * self.c * y

    def directional(self, s, t, y, d):
        return (t - s) * self.c * d

    def growth(self, z):
        return abs(self.c)


@dataclass(eq=False)
class FunctionDriver:
    """X_{s,t}(y) = (t - s) f(y) for a smooth scalar f applied pointwise."""

    f: object
    df: object
    gamma: float = 1.0
    bound: float = 1.0

    def increment(self, s, t, y):
        return TorusField(y.grid, (t - s) * self.f(y.values))

    def directional(self, s, t, y, d):
        return TorusField(y.grid, (t - s) * self.df(y.values) * d.values)

    def growth(self, z):
        return self.bound


@dataclass(eq=False)
class ZeroDriver:
    gamma: float = 1.0

    def increment(self, s, t, y):
        return TorusField.zeros(y.grid)

    def directional(self, s, t, y, d):
        return TorusField.zeros(y.grid)

    def growth(self, z):
        return 0.0


@dataclass(eq=False)
class CombinedDriver:
    """sum_k a_k X^k."""

    terms: list

    @property
    def gamma(self):
        return min(X.gamma for _, X in self.terms)

    def increment(self, s, t, y):
        out = TorusField.zeros(y.grid)
        for a, X in self.terms:
            out = out + a * X.increment(s, t, y)
        return out

    def directional(self, s, t, y, d):
        out = TorusField.zeros(y.grid)
        for a, X in self.terms:
            out = out + a * X.directional(s, t, y, d)
        return out

    def growth(self, z):
        return sum(abs(a) * X.growth(z) for a, X in self.terms)


# --- dyadic sums -----------------------------------------------------------

def _pairwise_sum(terms):
    """Fixed left-to-right pairwise tree for reproducible accumulation."""
    terms = list(terms)
    if not terms:
        return None
    while len(terms) > 1:
        nxt = [terms[k] + terms[k + 1] for k in range(0, len(terms) - 1, 2)]
        if len(terms) % 2:
            nxt.append(terms[-1])
        terms = nxt
    return terms[0]


def partition(a, b, level):
    return np.linspace(a, b, 2**level + 1)


def dyadic_sum(S, X, y: SingularHolderPath, a, b, tau, level, tau_p=None, points=None):
    """sum over [u,v] in a partition of [a,b] of (S_{tau-u} - S_{tau_p-u}) X_{u,v}(y_u)."""
    pts = partition(a, b, level) if points is None else points
    terms = []
    for u, v in zip(pts[:-1], pts[1:]):
        xv = X.increment(u, v, y.at(u))
        term = S.apply(tau - u, xv)
        if tau_p is not None:
            term = term - S.apply(tau_p - u, xv)
        terms.append(term)
    return _pairwise_sum(terms)


@dataclass
class ConvergenceReport:
    increments: list = field(default_factory=list)
    estimate_norms: list = field(default_factory=list)
    level: int = 0
    converged: bool = False
    predicted_rate: float | None = None

    @property
    def rate(self) -> float:
        return fitted_decay_rate(self.increments)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["level", "increment_norm", "cumulative_estimate_norm"])
            for n, (inc, est) in enumerate(zip(self.increments, self.estimate_norms)):
                wr.writerow([n, repr(float(inc)), repr(float(est))])


def fitted_decay_rate(increments, lo=4, hi=None) -> float:
    inc = np.asarray(increments, float)
    hi = inc.size - 1 if hi is None else min(hi, inc.size - 1)
    lv = np.arange(lo, hi + 1)
    vals = inc[lo:hi + 1]
    keep = vals > 0
    if keep.sum() < 2:
        return np.inf
    return float(-np.polyfit(lv[keep], np.log2(vals[keep]), 1)[0])


def _snap(y, t):
    try:
        y.index_of(t)
        return t
    except ValueError:
        i = int(round((t - y.t_grid[0]) / y.dt))
        i = min(max(i, 0), y.t_grid.size - 1)
        warnings.warn(f"time {t} snapped to grid time {y.t_grid[i]}")
        return float(y.t_grid[i])


def sewing_integral(S, X, y: SingularHolderPath, t, n_max=10, tol=1e-10, sigma=None,
                    validate=True, start=0.0):
    """Dyadic approximation of Theta(y)_t = lim sum S_{t-u} X_{u,v}(y_u) over [start, t]."""
    sigma = y.sigma if sigma is None else sigma
    predicted = validate_exponents(X.gamma, S.rho, sigma) if validate else None
    t = _snap(y, t)
    rep = ConvergenceReport(predicted_rate=predicted)
    if t == start:
        return TorusField.zeros(y.fields[0].grid), rep
    prev = dyadic_sum(S, X, y, start, t, t, 0)
    rep.estimate_norms.append(prev.sup_norm())
    for n in range(1, n_max + 1):
        cur = dyadic_sum(S, X, y, start, t, t, n)
        inc = (cur - prev).sup_norm()
        rep.increments.append(inc)
        rep.estimate_norms.append(cur.sup_norm())
        if inc < tol:
            rep.level, rep.converged = n - 1, True
            return prev, rep
        prev = cur
    rep.level = n_max
    return prev, rep


def sewing_rectangle(S, X, y, s, t, tau_p, tau, level=10):
    """Theta_s^t(y)_{tau', tau} at a fixed dyadic level."""
    if not s <= t <= tau_p <= tau:
        raise ValueError("need s <= t <= tau' <= tau")
    grid = y.fields[0].grid
    if tau_p == tau or s == t:
        return TorusField.zeros(grid)
    return dyadic_sum(S, X, y, s, t, tau, level, tau_p=tau_p)


def additivity_check(S, X, y, s, t, level=10) -> float:
    """|Theta_t - Theta_s - Theta_s^t(y)_t - Theta_0^s(y)_{s,t}| with each piece dyadic at `level`."""
    if not 0 < s < t:
        raise ValueError("need 0 < s < t")
    th_t = dyadic_sum(S, X, y, 0.0, t, t, level)
    th_s = dyadic_sum(S, X, y, 0.0, s, s, level)
    right = dyadic_sum(S, X, y, s, t, t, level)
    rect = dyadic_sum(S, X, y, 0.0, s, t, level, tau_p=s)
    return (th_t - th_s - right - rect).sup_norm()


def sewing_path(S, X, y, t_eval, level):
    """Theta(y) at each time of t_eval (level-n sums), as a SingularHolderPath."""
    grid = y.fields[0].grid
    fields = [TorusField.zeros(grid) if t == 0 else dyadic_sum(S, X, y, 0.0, t, t, level)
              for t in t_eval]
    return SingularHolderPath(np.asarray(t_eval), fields, y.sigma)


@dataclass
class StabilityReport:
    diff_norm: float
    diff_seminorm: float
    bound: float
    ratio: float


def stability_diff(S, X1, X2, y1, y2, t, level=8, n_eval=9, validate=True):
    """Theta^1(y^1)_t - Theta^2(y^2)_t and its seminorm against the stability bound."""
    if validate:
        validate_exponents(min(X1.gamma, X2.gamma), S.rho, y1.sigma)
    if not np.allclose(y1.t_grid, y2.t_grid):
        raise ValueError("paths must share a time grid")
    diff = dyadic_sum(S, X1, y1, 0.0, t, t, level) - dyadic_sum(S, X2, y2, 0.0, t, t, level)
    t_eval = np.linspace(0.0, t, n_eval)
    p1, p2 = sewing_path(S, X1, y1, t_eval, level), sewing_path(S, X2, y2, t_eval, level)
    dpath = SingularHolderPath(t_eval, [a - b for a, b in zip(p1.fields, p2.fields)], y1.sigma)
    semi = dpath.seminorm()
    z = max(y1.sup(), y2.sup())
    sig = y1.sigma
    dy = SingularHolderPath(y1.t_grid, [a - b for a, b in zip(y1.fields, y2.fields)], sig)
    h = max(X1.growth(z), X2.growth(z))
    h_diff = CombinedDriver([(1.0, X1), (-1.0, X2)]).growth(z)
    s1, s2 = y1.seminorm(), y2.seminorm()
    y0 = (y1.fields[0] - y2.fields[0]).sup_norm()
    bound = (h * (s1 + s2) * (y0 + dy.seminorm()) + h_diff * max(s1, s2)) \
        * t ** (min(X1.gamma, X2.gamma) - S.rho + sig)
    if bound > 0:
        ratio = semi / bound
    else:
        ratio = 0.0 if semi == 0 else np.inf
    return diff, StabilityReport(diff.sup_norm(), semi, bound, ratio)
