import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from flexwave.dispersion import WaveContext
from flexwave.errors import DefocussingError, DomainError, SolverError, TruncationError
from flexwave.grid import Grid
from flexwave.nls import (
    alpha_from_mu,
    cubic_coefficient,
    focussing_threshold,
    nls_coefficients,
    soliton_samples,
    test_profile as make_test_profile,
    zeta_h1_norm_sq,
    zeta_nls,
    zeta_nls_prime,
    zeta_norm_sq,
)

mp.mp.dps = 30


def mp_coefficients(k0):
    """Independent high-precision route: gamma and nu0 from d(nu^2)/dk = 0 by root finding."""
    k0 = mp.mpf(k0)
    f = lambda k: k * mp.coth(k)
    nu2 = lambda k, gam: (1 + gam * k**4) / f(k)
    gam = mp.findroot(lambda gm: mp.diff(lambda k: nu2(k, gm), k0), 1 / (4 * k0**3))
    n2 = nu2(k0, gam)
    g = lambda k: 1 + gam * k**4 - n2 * f(k)
    f1, f2 = f(k0), f(2 * k0)
    a31 = n2 * f2 * f1 + n2 * f1**2 / 2 - 3 * n2 * k0**2 / 2
    a32 = n2 * f1 + n2 * f1**2 / 2 - n2 * k0**2 / 2
    a41 = -mp.mpf(5) / 12 * gam * k0**6
    a42 = f1**2 * (f2 + 2) / 6 - k0**2 * f1 / 2
    a3 = -(a31**2) / (3 * g(2 * k0)) - 2 * a32**2 / (3 * (1 - n2))
    a4 = a41 - n2 * a42
    gpp = mp.diff(g, k0, 2)
    alpha = 2 / (mp.sqrt(n2) * f1)
    s2 = (a3 / 2 + a4) ** 2
    return {
        "gamma": gam,
        "nu0": mp.sqrt(n2),
        "a3_1": a31,
        "a3_2": a32,
        "a4_1": a41,
        "a4_2": a42,
        "a3": a3,
        "a4": a4,
        "gpp_k0": gpp,
        "alpha_nls": alpha,
        "nu_nls": -mp.mpf(9) / 8 * alpha**2 * s2 / gpp,
        "c_nls": -mp.mpf(3) / 4 * alpha**3 * s2 / gpp,
    }


@pytest.mark.parametrize("k0", [0.3, 1.0, 4.0, 50.0])
def test_coefficients_match_high_precision_oracle(k0):
    ctx = WaveContext.from_k0(k0)
    ref = mp_coefficients(k0)
    assert ctx.gamma == pytest.approx(float(ref["gamma"]), rel=1e-10)
    assert ctx.nu0 == pytest.approx(float(ref["nu0"]), rel=1e-12)
    got = nls_coefficients(ctx).as_dict()
    for name, val in got.items():
        assert val == pytest.approx(float(ref[name]), rel=1e-7), name


def test_coefficient_record_has_ten_fields(ctx1):
    d = nls_coefficients(ctx1).as_dict()
    assert len(d) == 10


def test_speed_slope_identity(ctx1):
    # 2 (nu0 f(k0))^-1 nu_NLS = alpha_NLS nu_NLS
    c = nls_coefficients(ctx1)
    f1 = 1.0 / math.tanh(1.0)
    assert c.speed_slope == pytest.approx(2.0 / (ctx1.nu0 * f1) * c.nu_nls, rel=1e-14)


def test_threshold_values_stated_numerically():
    k_star, g_star = focussing_threshold()
    assert k_star == pytest.approx(177.33, abs=0.5)
    assert g_star == pytest.approx(3.37e-10, rel=0.03)


def test_threshold_against_independent_bisection():
    def cubic_mp(k):
        r = mp_coefficients(k)
        return r["a3"] / 2 + r["a4"]

    lo, hi = mp.mpf(150), mp.mpf(200)
    assert cubic_mp(lo) < 0 < cubic_mp(hi)
    for _ in range(30):
        mid = (lo + hi) / 2
        if cubic_mp(mid) < 0:
            lo = mid
        else:
            hi = mid
    k_star, g_star = focussing_threshold()
    assert k_star == pytest.approx(float(lo), abs=1e-4)
    assert g_star == pytest.approx(float(mp_coefficients(lo)["gamma"]), rel=1e-5)


def test_sign_table():
    assert cubic_coefficient(10.0) < 0
    assert cubic_coefficient(300.0) > 0


def test_small_k0_limit_of_a4():
    vals = [abs(nls_coefficients(WaveContext.from_k0(k)).a4 + 0.5) for k in (0.1, 0.05, 0.025)]
    assert vals[0] < 0.01
    assert vals[1] < 0.5 * vals[0] and vals[2] < 0.5 * vals[1]


def test_defocussing_has_no_soliton():
    c = nls_coefficients(WaveContext.from_k0(300.0))
    with pytest.raises(DefocussingError):
        zeta_nls(0.0, c)


def test_soliton_residual(ctx1):
    c = nls_coefficients(ctx1)
    _, z, res = soliton_samples(c)
    assert np.max(np.abs(res)) < 1e-8
    assert np.max(z) == pytest.approx(float(zeta_nls(0.0, c)), rel=1e-12)


def test_soliton_norms_by_quadrature(ctx1):
    c = nls_coefficients(ctx1)
    l2 = quad(lambda x: float(zeta_nls(x, c)) ** 2, -np.inf, np.inf, limit=200)[0]
    d2 = quad(lambda x: float(zeta_nls_prime(x, c)) ** 2, -np.inf, np.inf, limit=200)[0]
    assert zeta_norm_sq(c) == pytest.approx(l2, rel=1e-9)
    assert zeta_norm_sq(c) == pytest.approx(2.0 * c.alpha_nls, rel=1e-12)
    assert zeta_h1_norm_sq(c) == pytest.approx(l2 + d2, rel=1e-9)


def test_soliton_derivative_by_finite_difference(ctx1):
    c = nls_coefficients(ctx1)
    x = np.linspace(-0.3, 0.3, 13)
    h = 1e-6
    fd = (zeta_nls(x + h, c) - zeta_nls(x - h, c)) / (2 * h)
    np.testing.assert_allclose(zeta_nls_prime(x, c), fd, rtol=1e-6, atol=1e-6)


@given(st.floats(min_value=-1e6, max_value=1e6))
def test_sech_is_finite_and_even(x):
    c = nls_coefficients(WaveContext.from_k0(1.0))
    a, b = float(zeta_nls(x, c)), float(zeta_nls(-x, c))
    assert math.isfinite(a) and a == b and 0.0 <= a <= float(zeta_nls(0.0, c))


def test_test_profile_structure(ctx1):
    c = nls_coefficients(ctx1)
    grid = Grid.for_carrier(1.0, 0.005, c_ell=2.0)
    alpha = 0.004
    crest = make_test_profile(alpha, ctx1, c, grid)
    trough = make_test_profile(alpha, ctx1, c, grid, omega=math.pi)
    # the phase flip negates the carrier and keeps the even-harmonic terms
    first = 0.5 * (crest.values - trough.values)
    np.testing.assert_allclose(first, alpha * zeta_nls(alpha * grid.x, c) * np.cos(grid.x), atol=1e-15)
    assert np.max(np.abs(crest.reflected().values - crest.values)) < 1e-12
    assert np.all(make_test_profile(0.0, ctx1, c, grid).values == 0.0)


def test_test_profile_rejects_short_domain(ctx1):
    c = nls_coefficients(ctx1)
    grid = Grid(20.0, 256)
    with pytest.raises(TruncationError):
        make_test_profile(0.01, ctx1, c, grid)
    with pytest.raises(DomainError):
        make_test_profile(-0.1, ctx1, c, grid)


def test_alpha_from_mu_hits_level(ctx1):
    from flexwave.functionals import eval_L_value

    c = nls_coefficients(ctx1)
    mu = 0.005
    grid = Grid.for_carrier(1.0, mu, c_ell=2.0)
    alpha = alpha_from_mu(mu, ctx1, c, grid)
    assert ctx1.nu0 * eval_L_value(make_test_profile(alpha, ctx1, c, grid)) == pytest.approx(mu, rel=1e-9)
    # leading order: alpha ~ mu
    assert alpha == pytest.approx(mu, rel=0.2)


def test_alpha_from_mu_reports_turnover(ctx1):
    c = nls_coefficients(ctx1)
    grid = Grid.for_carrier(1.0, 0.04, c_ell=2.0)
    with pytest.raises(SolverError, match="smaller mu"):
        alpha_from_mu(0.04, ctx1, c, grid)
