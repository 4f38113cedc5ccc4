import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from cohertest import rmt
from cohertest.errors import CapabilityError, DegenerateVarianceError, DomainError, ParameterError
from cohertest.rmt import TestFunction

C_GRID = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9]
QUAD = TestFunction.quadratic()


def _quad_moment(c, k):
    lm, lp = rmt.support(c)
    val, _ = integrate.quad(lambda x: x**k * rmt.mp_density(c, x), lm, lp,
                            epsabs=1e-14, epsrel=1e-12, limit=200)
    return val


# -- Marchenko-Pastur law ------------------------------------------------------


def test_density_zero_outside_support():
    lm, lp = rmt.support(0.3)
    assert rmt.mp_density(0.3, lm - 1e-3) == 0.0
    assert rmt.mp_density(0.3, lp + 1e-3) == 0.0
    assert rmt.mp_density(0.3, 10.0) == 0.0


@pytest.mark.parametrize("c", [0.1, 0.5, 0.9])
def test_density_integrates_to_one(c):
    assert abs(_quad_moment(c, 0) - 1.0) < 1e-8


def test_density_closed_form_at_one():
    c = 0.25
    lm, lp = (1 - 0.5) ** 2, (1 + 0.5) ** 2
    expected = np.sqrt((lp - 1.0) * (1.0 - lm)) / (2 * np.pi * c * 1.0)
    assert abs(rmt.mp_density(c, 1.0) - expected) < 1e-12


@pytest.mark.parametrize("c", C_GRID)
def test_first_two_moments(c):
    assert rmt.mp_moment(c, 1) == 1.0
    assert abs(rmt.mp_moment(c, 2) - (1 + c)) < 1e-15


def test_third_moment():
    assert abs(rmt.mp_moment(0.5, 3) - 2.75) < 1e-14


@pytest.mark.parametrize("c", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("k", range(1, 7))
def test_moments_match_quadrature(c, k):
    q = _quad_moment(c, k)
    assert abs(rmt.mp_moment(c, k) - q) <= 1e-8 * abs(q)


def test_moment_out_of_range():
    with pytest.raises(ParameterError):
        rmt.mp_moment(0.5, 13)


# -- Stieltjes transforms ---------------------------------------------------------


def test_t_real_point():
    c = 0.25
    t = rmt.stieltjes_t(c, -1.0)
    lm, lp = rmt.support(c)
    q, _ = integrate.quad(lambda x: rmt.mp_density(c, x) / (x + 1.0), lm, lp, epsabs=1e-13)
    assert abs(t.imag) < 1e-15
    assert abs(t.real - 0.53112) < 1e-5
    assert abs(t.real - q) < 1e-9
    assert 1 / (1 + lp) < t.real < 1 / (1 + lm)


def test_t_on_support_raises():
    with pytest.raises(DomainError):
        rmt.stieltjes_t(0.5, 1.0)


def test_t_tail():
    z = 1e6j
    assert abs(z * rmt.stieltjes_t(0.3, z) + 1) <= 1e-5
    assert abs(z * rmt.stieltjes_ttilde(0.3, z) + 1) <= 1e-5


def test_ttilde_identity():
    c, z = 0.25, -1.0
    t = rmt.stieltjes_t(c, z)
    tt = rmt.stieltjes_ttilde(c, z)
    # ttilde is the transform of c mu + (1 - c) delta_0
    assert abs(tt - (c * t - (1 - c) / z)) <= 1e-10


def test_p_independent_evaluation():
    c, z = 0.5, -1.0
    t = rmt.stieltjes_t(c, z)
    tt = rmt.stieltjes_ttilde(c, z)
    zeta = z * t * tt
    expected = -c * zeta**3 / (1 - c * zeta**2)
    assert abs(rmt.p_of_z(c, z) - expected) <= 1e-12


def test_p_decays_faster_than_one_over_z():
    c = 0.4
    assert abs(1e6 * rmt.p_of_z(c, 1e6j)) < 1e-5


complex_upper = st.tuples(
    st.floats(-20, 20, allow_nan=False), st.floats(1e-3, 20, allow_nan=False)
).map(lambda p: complex(*p))
c_values = st.floats(0.05, 0.95)


@given(c=c_values, z=complex_upper)
def test_t_fixed_point_and_half_plane(c, z):
    t = rmt.stieltjes_t(c, z)
    tt = rmt.stieltjes_ttilde(c, z)
    assert t.imag > 0 and tt.imag > 0
    assert abs(t - 1.0 / (-z + 1.0 / (1.0 + c * t))) <= 1e-10 * max(1.0, abs(t))
    assert c * abs(rmt.ztt(c, z)) ** 2 < 1


# -- test functions and pairings -----------------------------------------------


def test_mp_integral_examples():
    assert rmt.mp_integral(QUAD, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert rmt.mp_integral(TestFunction.polynomial([0, 1]), 0.7) == pytest.approx(1.0)
    expected = -np.log(0.5) - 1
    assert rmt.mp_integral(TestFunction.log(), 0.5) == pytest.approx(expected, abs=1e-15)
    lm, lp = rmt.support(0.5)
    q, _ = integrate.quad(lambda x: np.log(x) * rmt.mp_density(0.5, x), lm, lp, epsabs=1e-12)
    assert abs(rmt.mp_integral(TestFunction.log(), 0.5) - q) <= 1e-6


@pytest.mark.parametrize("c", C_GRID)
def test_log_bias_pairing(c):
    assert rmt.d_pairing(TestFunction.log(), c) == -c / 2


@pytest.mark.parametrize("c", [0.2, 0.5, 0.8])
def test_quadratic_pairings(c):
    assert rmt.d_pairing(QUAD, c) == pytest.approx(c, abs=1e-15)
    assert abs(rmt.dl_pairing(QUAD, c, 1)) == pytest.approx(c, abs=1e-15)
    for l in range(2, 8):
        assert rmt.dl_pairing(QUAD, c, l) == 0.0


def test_constant_function_pairings():
    f = TestFunction.polynomial([3.0])
    assert rmt.d_pairing(f, 0.4) == 0.0
    assert all(rmt.dl_pairing(f, 0.4, l) == 0.0 for l in range(1, 6))
    with pytest.raises(DegenerateVarianceError):
        rmt.sigma2(f, 0.4)


def test_linear_function_degenerate():
    with pytest.raises(DegenerateVarianceError):
        rmt.sigma2(TestFunction.polynomial([0.0, 1.0]), 0.5)


def test_quadratic_contour_oracle():
    c = 0.5
    assert abs(rmt.contour_pairing(QUAD, c) - c) <= 1e-6
    assert abs(rmt.contour_pairing(QUAD, c, l=1) - rmt.dl_pairing(QUAD, c, 1)) <= 1e-6


def test_log_contour_oracle():
    f = TestFunction.log()
    c = 0.3
    lm = rmt.support(c)[0]
    d_quad = rmt.contour_pairing(f, c, left=lm / 2, margin=0.5, rule="gauss", nodes=400)
    assert abs(d_quad + c / 2) <= 1e-6
    for l in (1, 2, 3):
        q = rmt.contour_pairing(f, c, l=l, left=lm / 2, margin=0.5, rule="gauss", nodes=400)
        assert abs(q - rmt.dl_pairing(f, c, l)) <= 1e-6


def test_unsupported_kind():
    with pytest.raises(CapabilityError):
        TestFunction("exp")
    with pytest.raises(ParameterError):
        TestFunction.from_name("exp")


@pytest.mark.parametrize("name", ["quadratic", "log", "cubic", "poly:1,-2,1"])
def test_from_name(name):
    f = TestFunction.from_name(name)
    assert np.isfinite(f.eval(1.3))


def test_poly_name_matches_quadratic():
    c = 0.35
    assert rmt.sigma2(TestFunction.from_name("poly:1,-2,1"), c) == pytest.approx(
        rmt.sigma2(QUAD, c), rel=1e-14)


# -- variance ------------------------------------------------------------------


@pytest.mark.parametrize("c", [0.1, 0.5, 0.9])
def test_quadratic_variance_constant_in_c(c):
    # single l = 1 term with weight l + 1 = 2
    assert rmt.sigma2(QUAD, c) == pytest.approx(2.0, rel=1e-14)
    assert rmt.sigma2(QUAD, c, weight="squared") == pytest.approx(4.0, rel=1e-14)


@pytest.mark.parametrize("name,c", [("quadratic", 0.5), ("cubic", 0.5), ("cubic", 0.2),
                                    ("poly:0,0,0,0,1", 0.4)])
def test_variance_series_matches_kernel(name, c):
    f = TestFunction.from_name(name)
    assert rmt.sigma2_double_contour(f, c) == pytest.approx(rmt.sigma2(f, c), rel=1e-8)


def test_log_variance_matches_kernel():
    f = TestFunction.log()
    c = 0.5
    lm = rmt.support(c)[0]
    ref = rmt.sigma2_double_contour(f, c, nodes=300, left=lm / 2)
    assert rmt.sigma2(f, c) == pytest.approx(ref, rel=1e-6)


@given(a=st.floats(0.1, 10.0) | st.floats(-10.0, -0.1), c=c_values)
def test_variance_scales_quadratically(a, c):
    f = TestFunction.from_name("cubic")
    assert rmt.sigma2(f * a, c) == pytest.approx(a * a * rmt.sigma2(f, c), rel=1e-10)


@settings(max_examples=25, deadline=None)
@given(coeffs=st.lists(st.floats(-3, 3), min_size=3, max_size=5), c=st.sampled_from(C_GRID))
def test_residues_match_quadrature(coeffs, c):
    f = TestFunction.polynomial(coeffs)
    scale = 1.0 + max(abs(a) for a in coeffs)
    assert abs(rmt.contour_pairing(f, c) - rmt.d_pairing(f, c)) <= 1e-6 * scale
    for l in range(1, len(coeffs)):
        q = rmt.contour_pairing(f, c, l=l)
        assert abs(q - rmt.dl_pairing(f, c, l)) <= 1e-6 * scale


# -- window moment -------------------------------------------------------------


def _v_direct(b, n):
    bp = np.arange(-b // 2, b // 2 + 1)
    return float(np.sum((bp / n) ** 2) / (b + 1))


def test_v_n_examples():
    assert rmt.v_n(2, 10) == pytest.approx(1 / 150, rel=1e-15)
    assert rmt.v_n(0, 10) == 0.0
    assert rmt.v_n(200, 1000) == pytest.approx(200 * 202 / 12e6, rel=1e-15)
    assert rmt.v_n(200, 1000) == pytest.approx(_v_direct(200, 1000), rel=1e-15)


def test_v_n_odd_b():
    with pytest.raises(ParameterError):
        rmt.v_n(3, 10)


def test_context_from_dims():
    ctx = rmt.MpContext.from_dims(100, 200, 1000)
    assert ctx.c == pytest.approx(100 / 201)
    assert rmt.MpContext.from_dims(100, 200, 1000, ratio="b").c == 0.5
    assert ctx.v_n == rmt.v_n(200, 1000)
    lm, lp = rmt.support(ctx.c)
    assert (ctx.lambda_minus, ctx.lambda_plus) == (lm, lp)
