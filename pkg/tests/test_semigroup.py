import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nyv.semigroup import (FracHeatOp, SingularVolterraOp, heat_apply, refinement_stability,
                           singular_apply, verify_kernel_hypothesis)
from nyv.solver import band_limited_xi
from nyv.spectral import SpectralGrid, TorusField, holder_norm


def mode(grid, k):
    return TorusField.from_function(grid, lambda x: np.cos(2 * np.pi * k * x))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.2, 2.0), st.integers(0, 31), st.floats(1e-5, 0.05))
def test_heat_on_mode_exact(alpha, k, t):
    g = SpectralGrid(64)
    out = heat_apply(FracHeatOp(alpha, g), t, mode(g, k))
    assert np.allclose(out.values, np.exp(-(2 * np.pi * k) ** alpha * t) * mode(g, k).values,
                       rtol=1e-12, atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 2.0), st.floats(0, 0.01), st.floats(0, 0.01), st.integers(0, 999))
def test_semigroup_law(alpha, s, t, seed):
    g = SpectralGrid(64)
    op = FracHeatOp(alpha, g)
    f = TorusField(g, np.random.default_rng(seed).standard_normal(64))
    lhs = op.apply(s + t, f).values
    rhs = op.apply(s, op.apply(t, f)).values
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_heat_identity_and_contraction():
    g = SpectralGrid(32)
    op = FracHeatOp(2.0, g)
    f = TorusField(g, np.random.default_rng(0).standard_normal(32))
    assert op.apply(0.0, f) is f
    assert op.apply(0.01, f).l2_norm() <= f.l2_norm()
    with pytest.raises(ValueError):
        op.multiplier(-1.0)
    with pytest.raises(ValueError):
        FracHeatOp(2.5, g)


def test_singular_operator_rho_and_domain():
    g = SpectralGrid(32)
    xi = mode(g, 1)
    S = SingularVolterraOp(FracHeatOp(2.0, g), xi, 0.8, 0.55)
    assert np.isclose(S.rho, 0.675)
    with pytest.raises(ValueError):
        S.apply(0.0, xi)
    with pytest.raises(ValueError):
        SingularVolterraOp(FracHeatOp(2.0, g), xi, 0.3, 0.5)


def test_singular_on_constant_noise_is_heat():
    g = SpectralGrid(64)
    heat = FracHeatOp(2.0, g)
    S = SingularVolterraOp(heat, TorusField.constant(g, 1.0), 0.5, 0.1)
    f = mode(g, 3)
    assert np.allclose(singular_apply(S, 0.01, f).values, heat.apply(0.01, f).values,
                       atol=1e-14)


def test_schauder_blowup_rate():
    # ||P_t f||_{C^beta} ~ t^{-rho} ||f||_{C^{-vartheta}} with rho=(beta+vartheta)/2
    g = SpectralGrid(1024)
    heat = FracHeatOp(2.0, g)
    f = TorusField(g, np.random.default_rng(3).standard_normal(1024))
    ts = np.geomspace(1e-5, 1e-4, 4)
    vals = [holder_norm(heat.apply(t, f), 0.8) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(vals), 1)[0]
    assert -0.8 < slope < -0.25


def test_kernel_ratios_finite_and_keyed():
    g = SpectralGrid(128)
    op = SingularVolterraOp(FracHeatOp(2.0, g), band_limited_xi(g, seed=2), 0.8, 0.55)
    rep = verify_kernel_hypothesis(op, 0.8, [band_limited_xi(g, 4, s) for s in range(2)],
                                   np.geomspace(1e-3, 1e-1, 5))
    keys = rep.keys()
    assert ("i", 0.0, 0.0) in keys and ("iii", 0.5, 0.25) in keys
    assert len(keys) == 1 + 5 + 25
    assert all(np.isfinite(r["max_ratio"]) for r in rep.rows)
    stab = refinement_stability([rep, rep])
    assert all(np.isclose(v, 1.0) for v in stab.values() if v)


def test_kernel_zero_sample_gives_zero():
    g = SpectralGrid(32)
    op = SingularVolterraOp(FracHeatOp(2.0, g), mode(g, 1), 0.8, 0.55)
    rep = verify_kernel_hypothesis(op, 0.8, [TorusField.zeros(g)], [0.01, 0.02, 0.03, 0.04])
    assert rep.max_ratio("i") == 0.0


def test_kernel_report_csv(tmp_path):
    g = SpectralGrid(32)
    op = SingularVolterraOp(FracHeatOp(2.0, g), mode(g, 1), 0.8, 0.55)
    rep = verify_kernel_hypothesis(op, 0.8, [mode(g, 2)], [0.01, 0.02, 0.03, 0.04])
    rep.to_csv(tmp_path / "k.csv")
    head = (tmp_path / "k.csv").read_text().splitlines()[0]
    assert head == "estimate_id,theta,theta_prime,max_ratio,median_ratio,n_samples"
