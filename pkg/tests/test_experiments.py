import json
import math

import numpy as np
import pytest

from flexwave.dispersion import WaveContext
from flexwave.errors import ConfigError
from flexwave.experiments import (
    StudyConfig,
    StudyReport,
    align_envelope,
    extrapolate,
    profile_distance,
    quartic_ratios,
    random_admissible_profiles,
    study_threshold,
    version_stamp,
)
from flexwave.grid import Grid, PeriodicProfile
from flexwave.nls import _soliton_params, nls_coefficients, test_profile as make_test_profile, zeta_nls
from flexwave.outputs import read_csv

CTX = WaveContext.from_k0(1.0)
COEF = nls_coefficients(CTX)


def test_extrapolate_exact_line():
    mus = [0.04, 0.02, 0.01]
    c0, c1, spread = extrapolate(mus, [3.0 - 2.0 * m**2 for m in mus], 2)
    assert (c0, c1) == pytest.approx((3.0, -2.0), rel=1e-12)
    assert spread < 1e-12


def test_alignment_self_test():
    slow = Grid(2 * math.pi, 4096)
    z = zeta_nls(slow.x, COEF).astype(complex)
    d, omega, s = align_envelope(z, z, slow)
    assert d < 1e-10
    assert min(omega, 2 * math.pi - omega) < 1e-10
    assert abs(s) < 1e-10


def test_alignment_recovers_shift_and_phase():
    slow = Grid(2 * math.pi, 4096)
    target = zeta_nls(slow.x, COEF).astype(complex)
    moved = np.exp(1.1j) * zeta_nls(slow.x + 0.0123, COEF)
    d, omega, s = align_envelope(moved, target, slow)
    assert d < 1e-8
    assert omega == pytest.approx(1.1, abs=1e-9)
    assert s == pytest.approx(0.0123, abs=1e-9)


def test_synthetic_profile_distance():
    # (1/2) mu zeta(mu x) e^{i k0 x} + c.c.; small mu so the band tail is negligible
    mu = 5e-4
    g = Grid.for_carrier(1.0, mu, c_ell=1.0)
    eta = PeriodicProfile(g, mu * zeta_nls(mu * g.x, COEF) * np.cos(g.x))
    d, _, _ = profile_distance(eta, mu, CTX, COEF)
    assert d < 1e-6


def test_quartic_ratios_of_test_profile_at_small_amplitude():
    mu = 0.002
    cfg = StudyConfig(c_ell=1.5)
    eta = make_test_profile(mu, CTX, COEF, cfg.grid(mu))
    r = quartic_ratios(eta, CTX, cfg.dn(), 0.25, 0.5, mu)
    assert r["k4_ratio"] == pytest.approx(COEF.a4_1, rel=0.05)
    assert r["l3_ratio"] == pytest.approx(COEF.a3, rel=0.05)
    assert r["l4_ratio"] == pytest.approx(COEF.a4_2, rel=0.05)
    # int (mu zeta cos)^4 = (3/8) mu^3 int zeta^4 = (3/8) mu^3 (4/3) a^4 / b
    a, b = _soliton_params(COEF)
    assert r["int_eta1_4_over_mu3"] == pytest.approx(0.5 * a**4 / b, rel=0.01)


def test_random_profiles_are_admissible():
    cfg = StudyConfig()
    grid = cfg.grid(0.04)
    profs = random_admissible_profiles(grid, CTX, 10, np.random.default_rng(3), cfg.dn())
    assert len(profs) == 10
    for p in profs:
        ok, _, _ = p.admissibility(cfg.depth_floor, cfg.ball_radius)
        assert ok


def test_threshold_study_passes():
    rep = study_threshold()
    assert rep.passed
    signs = {r["k0"]: r["focussing"] for r in rep.rows}
    assert signs[10.0] and not signs[300.0]


def test_report_write_roundtrip(tmp_path):
    rep = StudyReport("demo", {"k0": 1.0}, rows=[{"mu": 0.01, "x": 1.5}], config={"seed": 1})
    rep.check("ok", 1.0, 1.0, 0.0, True)
    paths = rep.write(tmp_path)
    data = json.loads(paths[0].read_text())
    assert data["passed"] and data["version"] == version_stamp()
    head, rows = read_csv(paths[1])
    assert head == ["mu", "x"] and rows == [["0.01", "1.5"]]
    assert paths[1].read_text().startswith("# config_hash=")


def test_report_without_checks_is_not_passed():
    assert not StudyReport("empty", {}).passed


def test_study_config_validation():
    with pytest.raises(ConfigError):
        StudyConfig(k0=None)
    with pytest.raises(ConfigError):
        StudyConfig(mu_grid=(0.01, -0.02))
    assert StudyConfig(mu_grid=(0.01, 0.04)).mu_grid == (0.04, 0.01)
