import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cohertest import simulate, specdens
from cohertest.errors import ParameterError
from cohertest.simulate import DgpSpec, gen_innovations
from cohertest.specdens import LagWindowSpec


def _log_s(phi, psi, nu):
    return np.log(simulate.arma_spectral_density(phi, psi, nu))


def test_lag_window_defaults():
    assert LagWindowSpec.default(10_000).l_max == 10
    assert LagWindowSpec.default(2000).l_max == 6
    assert LagWindowSpec.smoothness(1000, 1.0).l_max == 10
    with pytest.raises(ParameterError):
        LagWindowSpec(0)


def test_autocov_examples():
    x = gen_innovations(2, 50, seed=1)
    r0 = specdens.autocov(x, 0, 0)
    assert r0.imag == 0 and r0.real >= 0
    ones = np.ones((1, 20))
    for l in range(5):
        assert specdens.autocov(ones, 0, l) == pytest.approx((20 - l) / 20)
    assert specdens.autocov(x, 1, -3) == np.conj(specdens.autocov(x, 1, 3))
    with pytest.raises(ParameterError):
        specdens.autocov(x, 0, 50)


def test_autocov_matrix_matches_scalar():
    x = gen_innovations(3, 40, seed=2)
    r = specdens.autocov_matrix(x, 4)
    for m in range(3):
        for l in range(5):
            assert r[m, l] == pytest.approx(specdens.autocov(x, m, l), abs=1e-14)


def test_white_noise_flat():
    acc = 0.0
    spec = LagWindowSpec(5)
    for r in range(50):
        acc += specdens.lag_window_sd(gen_innovations(1, 2000, seed=r), 0, 0.2, spec)[0]
    assert abs(acc / 50 - 1) < 0.1


def test_real_series_zero_derivative_at_origin():
    y = gen_innovations(1, 500, seed=3).real.astype(complex)
    _, ds = specdens.lag_window_sd(y, 0, 0.0, LagWindowSpec(8))
    assert abs(ds) < 1e-12


def test_ar1_spectrum_at_zero():
    spec = DgpSpec("dgp1", phi=0.5, psi=0.0)
    y = simulate.simulate_panel(spec, 1, 10**5, seed=4)
    s, _ = specdens.lag_window_sd(y, 0, 0.0, LagWindowSpec(20))
    assert abs(s / 4.0 - 1) < 0.1


def test_zero_lag_identity():
    x = gen_innovations(2, 300, seed=5)
    spec = LagWindowSpec(7, floor_eps=0.0)
    r = specdens.autocov_matrix(x, spec.l_max)
    nus = np.arange(64) / 64
    s, _, _ = specdens.lag_window_from_autocov(r, nus, 0.0)
    # the mean over an equispaced grid integrates trigonometric polynomials exactly
    np.testing.assert_allclose(s.mean(axis=1), r[:, 0].real, rtol=1e-12)


def test_clamping():
    r = np.array([[1.0, 0.9, 0.0]])  # s(1/2) = 1 - 1.8 < 0
    s, _, clamped = specdens.lag_window_from_autocov(r, [0.5], 1e-6)
    assert clamped[0, 0] and s[0, 0] == 1e-6


def test_rhat_white_noise():
    # M = floor(5000**(2/3)); the estimation noise of r_hat falls like 1/M
    vals = [specdens.rhat(gen_innovations(292, 5000, seed=r), 0.3, LagWindowSpec.default(5000))
            for r in range(10)]
    assert np.mean(vals) <= 0.05


def test_rhat_identical_channels():
    y = simulate.simulate_panel(DgpSpec("dgp1", phi=0.4), 1, 3000, seed=6)
    panel = np.repeat(y, 5, axis=0)
    spec = LagWindowSpec(6)
    s, ds = specdens.lag_window_sd(y, 0, 0.2, spec)
    assert specdens.rhat(panel, 0.2, spec) == pytest.approx((ds / s) ** 2, rel=1e-12)


def test_rhat_approaches_oracle():
    spec = DgpSpec("dgp1", phi=0.1, psi=0.5)
    vals = [specdens.rhat(simulate.simulate_panel(spec, 30, 10_000, seed=7, rep=r), 0.3,
                          LagWindowSpec(10)) for r in range(5)]
    assert abs(np.mean(vals) / specdens.oracle_r(0.1, 0.5, 0.3) - 1) < 0.15


def test_rhat_permutation_invariant():
    panel = simulate.simulate_panel(DgpSpec("dgp1", coef_mode="uniform"), 8, 400, seed=8)
    perm = np.random.default_rng(0).permutation(8)
    spec = LagWindowSpec(4)
    nus = np.array([0.1, 0.33])
    np.testing.assert_allclose(specdens.rhat(panel[perm], nus, spec),
                               specdens.rhat(panel, nus, spec), rtol=1e-12)


def test_oracle_examples():
    assert specdens.oracle_r(0.0, 0.0, 0.37) == 0.0
    assert specdens.oracle_r(0.3, -0.2, 0.0) == 0.0
    h = 1e-5
    fd = (_log_s(0.1, 0.5, 0.25 + h) - _log_s(0.1, 0.5, 0.25 - h)) / (2 * h)
    assert abs(specdens.oracle_r(0.1, 0.5, 0.25) - fd**2) <= 1e-6
    with pytest.raises(ParameterError):
        specdens.oracle_r(1.0, 0.0, 0.1)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_log_derivative_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    phi, psi = rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)
    nu = np.linspace(0.0, 1.0, 100, endpoint=False)
    h = 1e-6
    fd = (_log_s(phi, psi, nu + h) - _log_s(phi, psi, nu - h)) / (2 * h)
    g = specdens.arma_log_derivative(phi, psi, nu)
    assert np.max(np.abs(g - fd)) <= 1e-6 * max(1.0, np.max(np.abs(fd)))
    np.testing.assert_allclose(specdens.oracle_r(phi, psi, nu), g**2, rtol=1e-12, atol=1e-15)


def test_mixed_oracle_reduces_to_independent():
    w = np.eye(4)
    phi = np.array([0.1, 0.2, -0.3, 0.4])
    psi = np.array([0.5, 0.0, 0.1, -0.2])
    nus = np.array([0.05, 0.3])
    np.testing.assert_allclose(specdens.mixed_oracle_r(w, phi, psi, nus),
                               specdens.oracle_r(phi, psi, nus), rtol=1e-12)
