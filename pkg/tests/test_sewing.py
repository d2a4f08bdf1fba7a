import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nyv.semigroup import FracHeatOp
from nyv.sewing import (CombinedDriver, ExponentError, FunctionDriver, IdentityOperator,
                        LinearDriver, SemigroupOperator, SingularHolderPath, ZeroDriver,
                        _pairwise_sum, additivity_check, dyadic_sum, fitted_decay_rate,
                        seminorm_bruteforce, sewing_integral, sewing_rectangle,
                        singular_holder_seminorm, stability_diff, validate_exponents)
from nyv.spectral import SpectralGrid, TorusField

GRID = SpectralGrid(16)


def mode(k=1, a=1.0):
    return TorusField.from_function(GRID, lambda x: a * np.cos(2 * np.pi * k * x))


def const_path(f, T=1.0, n=64, sigma=0.4):
    return SingularHolderPath(np.linspace(0, T, n + 1), [f] * (n + 1), sigma)


def test_validate_exponents():
    assert np.isclose(validate_exponents(1.0, 0.3, 0.35), 0.35)
    for args in [(0.4, 0.0, 0.7), (0.75, 0.25, 0.2), (0.75, 0.25, 0.6)]:
        with pytest.raises(ExponentError):
            validate_exponents(*args)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.05, 0.95), st.integers(3, 12))
def test_seminorm_reduction_matches_bruteforce(seed, sigma, n):
    rng = np.random.default_rng(seed)
    y = SingularHolderPath(np.sort(rng.uniform(0, 1, n)) if seed % 2 else np.linspace(0, 1, n),
                           [TorusField(GRID, v) for v in rng.standard_normal((n, 16))], sigma)
    assert abs(singular_holder_seminorm(y) - seminorm_bruteforce(y)) <= 1e-12


def test_seminorm_of_linear_path():
    # y_t = t c: increments |t-s|, pair weight >= 1 only when s >= t - s
    t = np.linspace(0, 1, 9)
    y = SingularHolderPath(t, [TorusField.constant(GRID, s) for s in t], 0.5)
    assert np.isclose(y.seminorm(), 1.0)
    assert y.seminorm() == y.cached_seminorm


def test_identity_operator_integral_is_exact():
    y = const_path(mode(2))
    val, rep = sewing_integral(IdentityOperator(), LinearDriver(3.0), y, 1.0, n_max=5,
                               validate=False)
    assert np.allclose(val.values, 3.0 * mode(2).values, atol=1e-13)
    assert rep.converged


def test_semigroup_integral_converges_at_rate_one():
    heat = FracHeatOp(2.0, GRID)
    y = const_path(mode(1), T=0.05, n=1024)
    val, rep = sewing_integral(SemigroupOperator(heat), LinearDriver(1.0), y, 0.05, n_max=10,
                               tol=0.0)
    lam = (2 * np.pi) ** 2
    exact = (1 - np.exp(-lam * 0.05)) / lam * mode(1).values
    assert np.abs(val.values - exact).max() < 1e-4
    assert abs(rep.rate - 1.0) < 0.1


def test_zero_and_combined_drivers():
    y = const_path(mode(1))
    z = dyadic_sum(IdentityOperator(), ZeroDriver(), y, 0, 1, 1, 3)
    assert z.sup_norm() == 0
    comb = CombinedDriver([(2.0, LinearDriver(1.0)), (-1.0, LinearDriver(2.0))])
    assert comb.increment(0, 0.5, mode(1)).sup_norm() == 0
    assert comb.growth(1.0) == 4.0


def test_function_driver_directional_is_derivative():
    X = FunctionDriver(np.sin, np.cos)
    y, d = mode(1, 0.3), mode(2, 1.0)
    eps = 1e-6
    fd = (X.increment(0, 1, y + eps * d).values - X.increment(0, 1, y - eps * d).values) / (2 * eps)
    assert np.allclose(fd, X.directional(0, 1, y, d).values, atol=1e-8)


def test_rectangle_degenerate_and_order():
    y = const_path(mode(1))
    S = SemigroupOperator(FracHeatOp(2.0, GRID))
    assert sewing_rectangle(S, LinearDriver(), y, 0, 0.5, 0.75, 0.75).sup_norm() == 0
    with pytest.raises(ValueError):
        sewing_rectangle(S, LinearDriver(), y, 0, 0.5, 0.25, 0.75)


def test_additivity_defect_shrinks():
    y = const_path(mode(1), T=0.05, n=512)
    S = SemigroupOperator(FracHeatOp(2.0, GRID))
    X = FunctionDriver(np.sin, np.cos)
    coarse = additivity_check(S, X, y, 0.025, 0.05, level=3)
    fine = additivity_check(S, X, y, 0.025, 0.05, level=8)
    assert fine < coarse / 10


def test_off_grid_time_snaps_with_warning():
    y = const_path(mode(1))
    with pytest.warns(UserWarning):
        sewing_integral(IdentityOperator(), LinearDriver(), y, 0.501, n_max=2, validate=False)


def test_stability_diff_of_identical_inputs():
    y = const_path(mode(1), T=0.05, n=128)
    S = SemigroupOperator(FracHeatOp(2.0, GRID))
    X = FunctionDriver(np.sin, np.cos)
    _, rep = stability_diff(S, X, X, y, y, 0.05, level=4, validate=False)
    assert rep.diff_norm == 0 and rep.ratio == 0


def test_pairwise_sum_order_fixed():
    v = [0.1 * k for k in range(7)]
    assert _pairwise_sum(v) == ((v[0] + v[1]) + (v[2] + v[3])) + ((v[4] + v[5]) + v[6])
    assert _pairwise_sum([]) is None


def test_fitted_rate_of_geometric_sequence():
    assert np.isclose(fitted_decay_rate([2.0**(-0.7 * n) for n in range(10)]), 0.7)
