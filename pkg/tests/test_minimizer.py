import math
from dataclasses import replace

import numpy as np
import pytest

from flexwave.errors import ConfigError, DomainError
from flexwave.functionals import eval_J, grad_J
from flexwave.grid import PeriodicProfile
from flexwave.minimizer import (
    MinimizeConfig,
    MinimizeResult,
    continuation_sweep,
    load_checkpoint,
    minimize,
    normalize_translation,
    pick_best,
    preconditioner_symbol,
    rescale_profile,
    save_checkpoint,
)

CFG = MinimizeConfig(mu=0.02, c_ell=1.0)


@pytest.fixture(scope="module")
def result():
    return minimize(CFG)


def test_converges_below_linear_level(result):
    ctx = CFG.context()
    assert result.converged and result.stop_reason == "gradient"
    assert result.report.j_mu < 2 * ctx.nu0 * CFG.mu
    assert result.nu_mu < ctx.nu0
    assert result.history[-1] <= result.history[0]
    assert all(b <= a + 1e-15 for a, b in zip(result.history, result.history[1:]))


def test_gradient_vanishes_at_result(result):
    # independent gradient from the profile-level API
    g = grad_J(result.eta, CFG.mu, CFG.context(), CFG.dn)
    k = result.eta.grid.kr
    gh = g.band_spectrum / (2.0 + CFG.context().gamma * k**4)
    assert math.sqrt(result.eta.grid.inner(gh, gh)) < 1e-7


def test_local_minimality(result):
    ctx = CFG.context()
    rng = np.random.default_rng(7)
    eta = result.eta
    j0 = result.report.j_mu
    x = eta.grid.x
    for _ in range(3):
        c = rng.standard_normal(3)
        w = np.exp(-((CFG.mu * x) ** 2) * 4) * (c[0] * np.cos(x) + c[1] * np.cos(2 * x) + c[2])
        om = PeriodicProfile(eta.grid, 1e-3 * w).projected()
        for s in (1.0, -1.0):
            assert eval_J(eta + s * om, CFG.mu, ctx, CFG.dn, taylor=False).j_mu > j0


def test_constraint_and_energy_identities(result):
    r = result.report
    assert r.i_value == pytest.approx(2 * CFG.mu, rel=1e-10)
    assert r.e_value == pytest.approx(r.j_mu, rel=1e-12)


def test_lowest_phase_is_kept(result):
    single = minimize(replace(CFG, phases=(0.0,)))
    assert result.report.j_mu <= single.report.j_mu


def test_restart_from_result_is_stationary(result):
    again = minimize(replace(CFG, initial="provided"), initial=result.eta)
    assert again.iterations <= 2
    assert again.report.j_mu == pytest.approx(result.report.j_mu, rel=1e-12)


def test_normalize_translation(result):
    moved = result.eta.shifted(13.7)
    back = normalize_translation(moved)
    np.testing.assert_allclose(back.values, normalize_translation(result.eta).values, atol=1e-10)
    with pytest.raises(DomainError):
        normalize_translation(PeriodicProfile.zeros(result.eta.grid))


def test_rescale_identity(result):
    ctx = CFG.context()
    same = rescale_profile(result.eta, result.eta.grid, ctx, 0.02, 0.02, result.phase)
    np.testing.assert_allclose(same.values, result.eta.projected().values, atol=1e-12)


def test_checkpoint_roundtrip(result, tmp_path):
    path = tmp_path / "ck.json"
    save_checkpoint(path, CFG, 12, result.report.j_mu, result.eta)
    cfg, it, eta = load_checkpoint(path)
    assert it == 12 and cfg.mu == CFG.mu and cfg.initial == "provided"
    assert cfg.phases == CFG.phases
    np.testing.assert_array_equal(eta.values, result.eta.values)


def test_pick_best_prefers_converged(result):
    fake = replace(result, converged=False, report=replace(result.report, j_mu=result.report.j_mu - 1.0))
    assert pick_best([fake, result]) is result
    assert pick_best([fake]) is fake


def test_preconditioner_positive():
    ctx = CFG.context()
    k = np.linspace(0, 20, 2001)
    for kind in ("nls", "k2"):
        assert np.all(preconditioner_symbol(k, ctx, 0.04, kind) > 0)


def test_provided_guess_checks():
    with pytest.raises(ConfigError):
        minimize(replace(CFG, initial="provided"))
    other = MinimizeConfig(mu=0.04, c_ell=1.0).grid()
    with pytest.raises(ConfigError):
        minimize(replace(CFG, initial="provided"), initial=PeriodicProfile.zeros(other))
    bad = PeriodicProfile(CFG.grid(), np.full(CFG.grid().n_points, -0.9))
    with pytest.raises(DomainError):
        minimize(replace(CFG, initial="provided"), initial=bad)


def test_sweep_requires_descending():
    with pytest.raises(DomainError):
        continuation_sweep([0.01, 0.02], CFG)
    with pytest.raises(DomainError):
        continuation_sweep([], CFG)


def test_sweep_two_points():
    res = continuation_sweep([0.04, 0.028], replace(CFG, c_ell=1.0))
    assert all(isinstance(r, MinimizeResult) and r.converged for r in res)
    ctx = CFG.context()
    for mu, r in zip((0.04, 0.028), res):
        assert r.report.j_mu < 2 * ctx.nu0 * mu


@pytest.mark.parametrize(
    "kw",
    [
        {"mu": -1.0},
        {"k0": None},
        {"gamma": 0.1},
        {"method": "newton"},
        {"preconditioner": "none"},
        {"initial": "random"},
        {"backtrack": 1.5},
        {"max_iter": 0},
        {"phases": ()},
        {"c_ell": 1e4},
    ],
)
def test_config_validation(kw):
    base = {"mu": 0.02}
    base.update(kw)
    with pytest.raises(ConfigError):
        MinimizeConfig(**base)
