import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from flexwave.dn import (
    DnConfig,
    Expansion,
    _validate_first_order,
    check_admissible,
    dn_apply,
    dn_directional_fd,
    dn_flat,
    dn_inverse,
    dn_oracle,
    dn_shape_derivative,
    dn_term,
)
from flexwave.errors import ConfigError, DomainError
from flexwave.grid import Grid, PeriodicProfile

G = Grid(math.pi, 64)
X = G.x


def _eta(a=0.05):
    return PeriodicProfile(G, a * (np.cos(X) + 0.3 * np.cos(2 * X)))


def _phi():
    return PeriodicProfile(G, np.sin(X) + 0.4 * np.cos(3 * X) - 0.1 * np.sin(5 * X))


def test_flat_operator_symbol():
    phi = PeriodicProfile(G, np.cos(2 * X))
    np.testing.assert_allclose(dn_flat(phi).values, 2 * math.tanh(2) * np.cos(2 * X), atol=1e-14)
    zero = PeriodicProfile.zeros(G)
    np.testing.assert_allclose(dn_apply(zero, phi).values, dn_flat(phi).values, atol=1e-14)


def test_expansion_against_elliptic_oracle():
    eta, phi = _eta(), _phi()
    a = dn_apply(eta, phi, DnConfig(expansion_order=4))
    b = dn_oracle(eta, phi)
    assert np.linalg.norm(a.values - b.values) / np.linalg.norm(b.values) < 1e-6


def test_oracle_converges_in_vertical_resolution():
    eta, phi = _eta(0.2), _phi()
    a = dn_oracle(eta, phi, ny=24)
    b = dn_oracle(eta, phi, ny=48)
    assert np.max(np.abs(a.values - b.values)) < 1e-10


def test_truncation_error_decreases_with_order():
    eta, phi = _eta(0.1), _phi()
    ref = dn_oracle(eta, phi)
    errs = [np.linalg.norm(dn_apply(eta, phi, DnConfig(expansion_order=m)).values - ref.values) for m in (1, 2, 3, 4, 5)]
    assert all(b < 0.5 * a for a, b in zip(errs, errs[1:]))


@given(st.floats(-0.1, 0.1), st.floats(-0.1, 0.1), st.integers(0, 2**31 - 1))
def test_self_adjoint_and_zero_mean(a1, a2, seed):
    eta = PeriodicProfile(G, a1 * np.cos(X) + a2 * np.sin(2 * X))
    rng = np.random.default_rng(seed)
    c1 = rng.standard_normal(6)
    c2 = rng.standard_normal(6)
    p = PeriodicProfile(G, sum(c * np.cos((j + 1) * X + j) for j, c in enumerate(c1)))
    q = PeriodicProfile(G, sum(c * np.sin((j + 1) * X - j) for j, c in enumerate(c2)))
    gp, gq = dn_apply(eta, p), dn_apply(eta, q)
    scale = math.sqrt(gp.inner(gp) * q.inner(q)) + 1e-300
    assert abs(gp.inner(q) - p.inner(gq)) / scale < 1e-10
    assert abs(np.mean(gp.values)) < 1e-10 * np.max(np.abs(gp.values))


def test_terms_sum_to_operator_before_symmetrisation():
    eta, phi = _eta(), _phi()
    op = Expansion(G, eta.band_spectrum, 3)
    total = sum(dn_term(eta, phi, j, DnConfig(expansion_order=3)).values for j in range(4))
    np.testing.assert_allclose(total, G.inverse(op.apply(phi.band_spectrum)), atol=1e-13)


def test_terms_are_homogeneous():
    eta, phi = _eta(), _phi()
    for j in (1, 2, 3):
        a = dn_term(eta, phi, j).values
        b = dn_term(eta * 2.0, phi, j).values
        np.testing.assert_allclose(b, 2.0**j * a, atol=1e-12)


def test_first_order_self_validation():
    assert _validate_first_order() < 1e-8


def test_inverse_residual():
    eta = _eta()
    xi = PeriodicProfile(G, np.sin(X) + 0.5 * np.cos(4 * X))
    sol = dn_inverse(eta, xi, DnConfig(cg_tol=1e-12))
    back = dn_apply(eta, sol.result)
    assert np.linalg.norm(back.values - xi.values) <= 1e-11 * np.linalg.norm(xi.values)
    with pytest.raises(DomainError):
        dn_inverse(eta, PeriodicProfile(G, 1.0 + np.sin(X)))


def test_shape_derivative_matches_finite_difference():
    eta, phi = _eta(), _phi()
    omega = PeriodicProfile(G, 0.5 * np.sin(X) + 0.2 * np.cos(3 * X))
    cfg = DnConfig(expansion_order=6)
    a = dn_shape_derivative(eta, omega, phi, cfg)
    b = dn_directional_fd(eta, omega, phi, cfg)
    # the identity holds for the exact operator; expansion truncation dominates
    assert np.linalg.norm(a.values - b.values) / np.linalg.norm(b.values) < 1e-5


def test_form_gradient_matches_finite_difference():
    eta, phi = _eta(), _phi()
    a = phi.band_spectrum
    omega = PeriodicProfile(G, np.cos(2 * X + 0.3))
    grad = Expansion(G, eta.band_spectrum, 4).form_gradient(a, a)
    h = 1e-5

    def form(t):
        e = (eta + t * omega).band_spectrum
        return G.inner(a, Expansion(G, e, 4).apply(a))

    fd = (form(h) - form(-h)) / (2 * h)
    assert G.inner(grad, omega.band_spectrum) == pytest.approx(fd, rel=1e-7)


def test_admissible_set():
    cfg = DnConfig()
    with pytest.raises(DomainError):
        check_admissible(PeriodicProfile(G, -0.9 + 0 * X), cfg)
    with pytest.raises(DomainError):
        check_admissible(PeriodicProfile(G, 0.5 * np.cos(3 * X)), cfg)
    check_admissible(_eta(), cfg)


@pytest.mark.parametrize("kw", [{"expansion_order": 9}, {"cg_tol": 1e-3}, {"depth_floor": 1.5}, {"oracle_ny": 4}])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        DnConfig(**kw)
