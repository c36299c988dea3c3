import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from flexwave.dispersion import WaveContext
from flexwave.errors import ConfigError, DomainError, ResolutionError
from flexwave.grid import (
    Grid,
    PeriodicProfile,
    apply_multiplier,
    demodulate_zeta,
    inverse_transform,
    norms,
    positive_band,
    read_profile_csv,
    sobolev_norm,
    split_eta1,
    transform,
    triple_norm,
    write_profile_csv,
)
from flexwave.nls import nls_coefficients, zeta_nls

GRID = Grid(10.0, 64)
samples = arrays(np.float64, 64, elements=st.floats(-1.0, 1.0))


@given(samples)
def test_parseval(v):
    p = PeriodicProfile(GRID, v)
    assert np.sum(np.abs(transform(p)) ** 2) == pytest.approx(np.sum(v**2), rel=1e-12, abs=1e-12)
    assert p.inner(p) == pytest.approx(GRID.dx * np.sum(v**2), rel=1e-12, abs=1e-12)


@given(samples)
def test_transform_roundtrip(v):
    p = PeriodicProfile(GRID, v)
    back = inverse_transform(GRID, transform(p))
    np.testing.assert_allclose(back.values, v, atol=1e-14)


@given(samples, samples)
def test_inner_symmetric_bilinear(a, b):
    pa, pb = PeriodicProfile(GRID, a), PeriodicProfile(GRID, b)
    assert pa.inner(pb) == pytest.approx(pb.inner(pa), abs=1e-12)
    assert (pa + pb).inner(pb) == pytest.approx(pa.inner(pb) + pb.inner(pb), abs=1e-11)


@given(st.floats(-5.0, 5.0))
def test_shift_of_trigonometric_profile(s):
    g = Grid(math.pi, 32)
    p = PeriodicProfile(g, np.cos(2 * g.x) + 0.5 * np.sin(3 * g.x))
    q = p.shifted(s)
    np.testing.assert_allclose(q.values, np.cos(2 * (g.x + s)) + 0.5 * np.sin(3 * (g.x + s)), atol=1e-12)


def test_reflection():
    g = Grid(math.pi, 32)
    p = PeriodicProfile(g, np.sin(g.x) + np.cos(2 * g.x))
    np.testing.assert_allclose(p.reflected().values, -np.sin(g.x) + np.cos(2 * g.x), atol=1e-14)


def test_sobolev_norm_of_cosine():
    g = Grid(math.pi, 32)
    p = PeriodicProfile(g, np.cos(3 * g.x))
    # int cos^2 = pi, weight (1 + 9)^s
    for s in (0, 1, 2):
        assert sobolev_norm(p, s) == pytest.approx(math.sqrt(math.pi * 10.0**s), rel=1e-13)
    n = norms(p)
    assert n.w1inf == pytest.approx(3.0, rel=1e-12)
    assert triple_norm(p, 0.5, 1.0, 3.0) == pytest.approx(math.sqrt(math.pi), rel=1e-13)


def test_derivative_spectral():
    g = Grid(math.pi, 32)
    p = PeriodicProfile(g, np.sin(2 * g.x))
    np.testing.assert_allclose(p.derivative().values, 2 * np.cos(2 * g.x), atol=1e-12)
    np.testing.assert_allclose(p.derivative(2).values, -4 * np.sin(2 * g.x), atol=1e-12)


def test_multiplier_real_and_complex():
    g = Grid(math.pi, 32)
    p = PeriodicProfile(g, np.cos(g.x))
    q = apply_multiplier(p, lambda k: k**2)
    assert isinstance(q, PeriodicProfile)
    np.testing.assert_allclose(q.values, np.cos(g.x), atol=1e-13)
    h = apply_multiplier(p, lambda k: (k > 0).astype(float))
    np.testing.assert_allclose(h.values, 0.5 * np.exp(1j * g.x), atol=1e-13)
    with pytest.raises(DomainError):
        apply_multiplier(p, lambda k: 1.0 / k)


def test_band_projection_and_fine_grid_products():
    g = Grid(math.pi, 64)
    a = g.forward(np.cos(3 * g.x))
    b = g.forward(np.cos(5 * g.x))
    prod = g.from_fine(g.to_fine(a) * g.to_fine(b))
    np.testing.assert_allclose(g.inverse(prod), np.cos(3 * g.x) * np.cos(5 * g.x), atol=1e-13)
    assert not g.band[g.n_points // 3 + 1]


def test_grid_policy():
    g = Grid.for_carrier(1.0, 0.02, c_ell=2.0)
    assert g.half_length == pytest.approx(2.0 * 2 * math.pi / 0.02)
    assert 2 * math.pi / g.dx >= 16
    with pytest.raises(ConfigError):
        Grid(1.0, 100)
    with pytest.raises(ConfigError):
        Grid(-1.0, 64)


def test_split_eta1():
    ctx = WaveContext.from_k0(1.0)
    g = Grid(20 * math.pi, 1024)
    p = PeriodicProfile(g, np.cos(g.x) + 0.3 * np.cos(2 * g.x) + 0.1)
    e1, rest = split_eta1(p, ctx)
    np.testing.assert_allclose(e1.values, np.cos(g.x), atol=1e-12)
    np.testing.assert_allclose((e1 + rest).values, p.values, atol=1e-14)
    with pytest.raises(DomainError):
        split_eta1(p, ctx, delta0=0.5)


def test_positive_band_resolution_error():
    ctx = WaveContext.from_k0(1.0)
    with pytest.raises(ResolutionError):
        positive_band(PeriodicProfile.zeros(Grid(1.0, 16)), ctx, delta0=0.1)


def test_demodulation_recovers_synthetic_envelope():
    ctx = WaveContext.from_k0(1.0)
    c = nls_coefficients(ctx)
    # band tail of the envelope ~ sech(pi delta0 / (2 b mu)) sets how small mu must be
    mu = 5e-4
    g = Grid.for_carrier(1.0, mu, c_ell=1.0)
    env = zeta_nls(mu * g.x, c)
    p = PeriodicProfile(g, mu * env * np.cos(g.x))
    z = demodulate_zeta(p, mu, ctx)
    assert np.max(np.abs(z.values - env)) < 1e-6 * np.max(env)
    np.testing.assert_allclose(z.grid.x, mu * g.x, rtol=1e-12, atol=1e-12)


def test_profile_csv_roundtrip(tmp_path):
    g = Grid(3.0, 32)
    p = PeriodicProfile(g, np.sin(g.x) / 3)
    path = tmp_path / "p.csv"
    write_profile_csv(p, path, ["note"])
    q = read_profile_csv(path)
    assert q.grid == g
    np.testing.assert_array_equal(q.values, p.values)


def test_profile_is_immutable():
    p = PeriodicProfile(Grid(1.0, 16), np.zeros(16))
    with pytest.raises(ValueError):
        p.values[0] = 1.0
    with pytest.raises(DomainError):
        PeriodicProfile(Grid(1.0, 16), np.zeros(8))
