import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nyv import averaged as av
from nyv.noise import sample_lfsm
from nyv.solver import zero_path
from nyv.spectral import SpectralGrid, TorusField

VG = av.ValueGrid(2 * np.pi, 128)


def test_value_grid_geometry():
    assert np.isclose(VG.h, 4 * np.pi / 128)
    assert np.isclose(VG.points[0], -2 * np.pi)
    assert VG.safe == np.pi
    with pytest.raises(ValueError):
        av.ValueGrid(1.0, 100)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3.0, 3.0), st.integers(1, 3))
def test_spline_reproduces_smooth_function(x, k):
    sp = av.PeriodicCubic(VG, np.sin(k * VG.points))
    assert abs(sp(0, np.array([x]))[0] - np.sin(k * x)) < 1e-4


def test_zero_path_gives_linear_in_time():
    t = np.linspace(0, 0.1, 9)
    A = av.compute_averaged_field(np.sin(VG.points), zero_path(0.1, 64), VG, t)
    assert np.allclose(A.table, t[:, None] * np.sin(VG.points)[None, :], atol=1e-13)
    assert A.metadata == {"method": "cubic", "ratio": 8}


def test_constant_path_shifts():
    t = np.linspace(0, 1, 5)
    ft = np.linspace(0, 1, 21)
    A = av.compute_averaged_field(np.cos(VG.points), (ft, np.full(21, 0.7)), VG, t,
                                  method="fourier")
    assert np.allclose(A.table[-1], np.cos(VG.points + 0.7), atol=1e-12)


def test_cubic_and_fourier_agree_on_smooth_g():
    p = sample_lfsm(2.0, 1 / 3, 0.05, 257, seed=3)
    t = np.linspace(0, 0.05, 65)
    g = np.sin(VG.points)
    a = av.compute_averaged_field(g, p, VG, t, "cubic")
    b = av.compute_averaged_field(g, p, VG, t, "fourier")
    assert np.abs(a.table - b.table).max() < 1e-5


def test_nesting_and_range_errors():
    with pytest.raises(ValueError):
        av.compute_averaged_field(np.sin(VG.points), zero_path(1, 12), VG, np.linspace(0, 1, 5))
    big = (np.linspace(0, 1, 17), np.full(17, 5.0))
    with pytest.raises(av.RangeError):
        av.compute_averaged_field(np.sin(VG.points), big, VG, np.linspace(0, 1, 5))


def test_check_range_names_extremum():
    A = av.compute_averaged_field(np.sin(VG.points), zero_path(1, 16), VG, np.linspace(0, 1, 5))
    with pytest.raises(av.RangeError, match="-4"):
        A.check_range(np.array([-4.0, 1.0]))


def test_lift_apply_and_gradient():
    t = np.linspace(0, 0.1, 9)
    A = av.compute_averaged_field(np.sin(VG.points), zero_path(0.1, 64), VG, t)
    grid = SpectralGrid(32)
    theta = TorusField.from_function(grid, lambda x: np.cos(2 * np.pi * x))
    out = av.lift_apply(A, 0.025, 0.1, theta)
    assert np.allclose(out.values, 0.075 * np.sin(theta.values), atol=1e-5)
    d = av.lift_gradient(A, 0.0, 0.1, theta)
    assert np.allclose(d.values, 0.1 * np.cos(theta.values), atol=1e-4)
    with pytest.raises(ValueError):
        av.lift_apply(A, 0.1, 0.0, theta)


def test_table_roundtrip(tmp_path):
    A = av.compute_averaged_field(np.sin(VG.points), zero_path(1, 16), VG, np.linspace(0, 1, 5))
    A.write(tmp_path / "a.nyva")
    B = av.AveragedField.read(tmp_path / "a.nyva")
    assert np.array_equal(A.table, B.table) and B.value_grid == VG


def test_time_regularity_of_linear_table():
    # A(t) = t g has increments exactly proportional to the gap
    A = av.compute_averaged_field(np.sin(VG.points), zero_path(1, 512), VG, np.linspace(0, 1, 129))
    tr = av.estimate_time_regularity(A, 0.5)
    assert np.isclose(tr.gamma_hat, 1.0)


def test_weierstrass_regularity():
    vg = av.ValueGrid(2 * np.pi, 2048)
    w = av.weierstrass(vg, 0.5)
    est = av.holder_exponent_estimate(vg.field(w), *av.default_block_range(vg.spectral))
    assert abs(est - 0.5) < 0.1


def test_space_gain_positive_for_rough_path():
    vg = av.ValueGrid(2 * np.pi, 512)
    g = av.weierstrass(vg, 0.5)
    p = sample_lfsm(2.0, 1 / 3, 0.1, 1025, seed=0)
    A = av.compute_averaged_field(g, p, vg, np.linspace(0, 0.1, 257))
    assert av.estimate_space_gain(A, g).gain > 0.3


def test_block_norms_match_direct_average():
    vg = av.ValueGrid(2 * np.pi, 256)
    g = av.weierstrass(vg, 0.5)
    p = sample_lfsm(2.0, 0.4, 1.0, 129, seed=5)
    dt = p.dt
    got = av.block_integral_norms(g, vg, 4, 32, 128, [p.values], dt)[0]
    blk = vg.field(g).apply_multiplier(av.block_multiplier(vg.spectral, 4))
    ref = sum(np.fft.ifft(blk.spectrum * np.exp(1j * vg.spectral.angular * p.values[i])).real
              * 256 for i in range(32, 128)) * dt
    assert np.isclose(got, np.abs(ref).max())


def test_tail_regression_gaussian():
    r = np.abs(np.random.default_rng(0).standard_normal(20000))
    slope, _, r2 = av.tail_regression(r)
    assert slope < 0 and r2 > 0.95


def test_driver_increment_and_constants():
    t = np.linspace(0, 0.1, 9)
    A = av.compute_averaged_field(np.sin(VG.points), zero_path(0.1, 64), VG, t)
    X = av.AveragedDriver(A, 1.0)
    grid = SpectralGrid(16)
    y = TorusField.constant(grid, 0.5)
    assert np.allclose(X.increment(0.0, 0.1, y).values, 0.1 * np.sin(0.5), atol=1e-6)
    # |D^k (t-s) sin| / |t-s| = 1 for every k
    assert np.allclose(X.holder_constants, 1.0, atol=1e-3)
