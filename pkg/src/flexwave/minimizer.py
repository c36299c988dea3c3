"""Minimisation of ``J_mu`` over the admissible set, with continuation in ``mu``."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .dispersion import WaveContext, eval_f
from .dn import DnConfig
from .errors import ConfigError, ConstrainedBoundaryError, DefocussingError, DomainError, SolverError
from .functionals import FunctionalReport, eval_J, k_gradient, k_parts, l_gradient, l_solve
from .grid import Grid, PeriodicProfile, read_profile_csv, write_profile_csv
from .nls import alpha_from_mu, nls_coefficients, test_profile

log = logging.getLogger(__name__)

INITIAL_GUESSES = ("test-profile", "provided", "continuation")


@dataclass(frozen=True)
class MinimizeConfig:
    mu: float
    k0: float | None = 1.0
    gamma: float | None = None
    c_ell: float = 12.0
    points_per_carrier: int = 16
    dn: DnConfig = field(default_factory=lambda: DnConfig(cg_tol=1e-12))
    method: str = "lbfgs"
    preconditioner: str = "nls"
    initial_step: float = 1.0
    backtrack: float = 0.5
    armijo: float = 1e-4
    grad_tol: float = 1e-9
    stall_tol: float = 1e-13
    stall_window: int = 20
    max_iter: int = 3000
    memory: int = 12
    initial: str = "test-profile"
    symmetric: bool = True
    max_points: int = 1 << 20
    phases: tuple = (0.0, math.pi)

    def __post_init__(self):
        object.__setattr__(self, "phases", tuple(float(p) for p in self.phases))
        if not self.phases:
            raise ConfigError("phases must be non-empty")
        if not self.mu > 0:
            raise ConfigError(f"mu must be positive, got {self.mu}")
        if (self.k0 is None) == (self.gamma is None):
            raise ConfigError("give exactly one of k0 and gamma")
        if self.method not in ("lbfgs", "descent"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.preconditioner not in ("nls", "k2"):
            raise ConfigError(f"unknown preconditioner {self.preconditioner!r}")
        if self.initial not in INITIAL_GUESSES:
            raise ConfigError(f"initial must be one of {INITIAL_GUESSES}")
        for name in ("grad_tol", "stall_tol", "initial_step", "armijo", "c_ell"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if not 0 < self.backtrack < 1:
            raise ConfigError("backtrack factor must lie in (0, 1)")
        if self.max_iter < 1 or self.memory < 1 or self.stall_window < 1:
            raise ConfigError("max_iter, memory and stall_window must be >= 1")
        if self.grid().n_points > self.max_points:
            raise ConfigError(
                f"grid policy needs N = {self.grid().n_points} > max_points = {self.max_points}; "
                "increase mu or reduce c_ell"
            )

    def context(self):
        if self.k0 is not None:
            return WaveContext.from_k0(self.k0)
        return WaveContext.from_gamma(self.gamma)

    def grid(self):
        k0 = self.k0 if self.k0 is not None else self.context().k0
        return Grid.for_carrier(k0, self.mu, self.c_ell, self.points_per_carrier)

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class MinimizeResult:
    eta: PeriodicProfile
    nu_mu: float
    report: FunctionalReport
    iterations: int
    converged: bool
    constraint_active: bool
    grad_norm: float
    stop_reason: str
    history: tuple = ()
    initial_alpha: float = math.nan
    phase: float = math.nan
    seed: str = "provided"

    def summary(self):
        return {
            "seed": self.seed,
            "mu": self.nu_mu * self.report.l_total,
            "nu_mu": self.nu_mu,
            "j_mu": self.report.j_mu,
            "iterations": self.iterations,
            "converged": self.converged,
            "constraint_active": self.constraint_active,
            "grad_norm": self.grad_norm,
            "stop_reason": self.stop_reason,
        }


class ReducedProblem:
    """``J_mu`` and its gradient on band spectra, with CG warm starts."""

    def __init__(self, grid, ctx, mu, dn_cfg):
        self.grid, self.ctx, self.mu, self.cfg = grid, ctx, mu, dn_cfg
        self._u = None
        self.evaluations = 0

    def admissible(self, eh):
        g = self.grid
        depth = 1.0 + float(g.inverse(eh).min())
        h2 = math.sqrt(g.inner(eh, (1.0 + g.kr**2) ** 2 * eh))
        return depth > self.cfg.depth_floor and h2 < self.cfg.ball_radius, depth, h2

    def value_and_grad(self, eh):
        g = self.grid
        sol = l_solve(g, eh, self.cfg, x0=self._u)
        self._u = sol.u
        self.evaluations += 1
        k_tot, _, _ = k_parts(g, eh, self.ctx.gamma)
        j = k_tot + self.mu**2 / sol.value
        grad = k_gradient(g, eh, self.ctx.gamma) - (self.mu / sol.value) ** 2 * l_gradient(g, sol)
        return j, grad


def preconditioner_symbol(k, ctx, mu, kind="nls"):
    """Positive symbol approximating the Hessian of ``J_mu`` near a minimiser.

    ``"k2"``: ``2 + gamma k^4``.  ``"nls"``: ``1 + gamma k^4 - nu_p^2 f(k)`` with
    ``nu_p`` the predicted speed, which keeps the small curvature near ``+-k0``.
    """
    if kind == "k2":
        return 2.0 + ctx.gamma * k**4
    try:
        c = nls_coefficients(ctx)
        nu_p = ctx.nu0 + c.speed_slope * mu**2
    except DefocussingError:
        nu_p = ctx.nu0
    # keep the symbol safely positive when the prediction is poor
    nu_p = min(nu_p, ctx.nu0 * (1.0 - 1e-3 * mu**2))
    nu_p = max(nu_p, 0.5 * ctx.nu0)
    f, _, _ = eval_f(k)
    return 1.0 + ctx.gamma * k**4 - nu_p**2 * f


def _even_part(grid, eh):
    # even about x = 0: c_j (-1)^j real
    s = np.where(np.arange(eh.size) % 2 == 0, 1.0, -1.0)
    return (eh * s).real * s + 0j


def _seed_profile(cfg, ctx, grid, omega, shrink=0.8, tries=30):
    """Test profile at ``alpha(mu)`` with phase ``omega``, shrunk until it lies in ``U``."""
    c = nls_coefficients(ctx)
    try:
        alpha = alpha_from_mu(cfg.mu, ctx, c, grid, cfg.dn, omega=omega)
    except SolverError as exc:
        # outside the monotone branch: fall back to the leading-order scaling
        log.info("alpha(mu) unavailable (%s); seeding with alpha = mu", exc)
        alpha = cfg.mu
    prob = ReducedProblem(grid, ctx, cfg.mu, cfg.dn)
    for _ in range(tries):
        eta = test_profile(alpha, ctx, c, grid, omega=omega)
        if prob.admissible(grid.project(eta.spectrum))[0]:
            return eta, alpha
        alpha *= shrink
    raise DomainError(f"no admissible test profile at mu = {cfg.mu:g}, omega = {omega:g}")


def minimize(cfg: MinimizeConfig, initial: PeriodicProfile | None = None, checkpoint: str | Path | None = None,
             checkpoint_every: int = 100, callback=None):
    """Minimise ``J_mu``; see ``MinimizeConfig`` for the knobs.

    With ``initial="test-profile"`` one descent is run per carrier phase in
    ``cfg.phases`` and the lowest converged energy is kept.
    """
    ctx = cfg.context()
    grid = cfg.grid()
    try:
        if nls_coefficients(ctx).cubic >= 0:
            log.warning("defocussing parameters: 1/2 A3 + A4 >= 0, minimiser may not exist")
    except DefocussingError:
        pass
    if cfg.initial in ("provided", "continuation"):
        if initial is None:
            raise ConfigError(f"initial={cfg.initial!r} requires an initial profile")
        if initial.grid != grid:
            raise ConfigError("initial profile lives on a different grid than the grid policy gives")
        best = _descend(cfg, ctx, grid, initial, checkpoint, checkpoint_every, callback)
        best = replace(best, seed=cfg.initial)
    else:
        runs = []
        for omega in cfg.phases:
            try:
                eta0, alpha0 = _seed_profile(cfg, ctx, grid, omega)
            except DomainError as exc:
                log.warning("%s", exc)
                continue
            res = _descend(cfg, ctx, grid, eta0, checkpoint, checkpoint_every, callback)
            runs.append(replace(res, initial_alpha=alpha0, phase=omega, seed=f"test-profile(omega={omega:.6g})"))
        if not runs:
            raise DomainError(f"no admissible starting profile at mu = {cfg.mu:g}")
        best = pick_best(runs)
    if best.constraint_active and not best.converged:
        raise ConstrainedBoundaryError(
            f"minimiser at mu = {cfg.mu:g} stopped on the boundary of U ({best.stop_reason})", best
        )
    return best


def pick_best(results):
    """Lowest ``J_mu`` among converged results, else lowest overall."""
    pool = [r for r in results if r.converged] or list(results)
    return min(pool, key=lambda r: r.report.j_mu)


def _descend(cfg, ctx, grid, eta0, checkpoint, checkpoint_every, callback):
    prob = ReducedProblem(grid, ctx, cfg.mu, cfg.dn)
    eh = grid.project(eta0.spectrum)
    if cfg.symmetric:
        eh = _even_part(grid, eh)
    ok, depth, h2 = prob.admissible(eh)
    if not ok:
        raise DomainError(f"initial guess outside U: 1 + min eta = {depth:.4g}, ||eta||_2 = {h2:.4g}")

    pinv = np.where(grid.band, 1.0 / preconditioner_symbol(grid.kr, ctx, cfg.mu, cfg.preconditioner), 0.0)
    inner = grid.inner
    j, gr = prob.value_and_grad(eh)
    if cfg.symmetric:
        gr = _even_part(grid, gr)
    history = [j]
    gnorms = []
    s_hist, y_hist = [], []
    constraint_hits = 0
    stop = "max_iter"
    gnorm = math.sqrt(max(inner(gr, pinv * gr), 0.0))
    it = 0
    for it in range(1, cfg.max_iter + 1):
        if gnorm <= cfg.grad_tol * max(1.0, abs(j)):
            stop = "gradient"
            it -= 1
            break
        d = _direction(gr, pinv, s_hist, y_hist, inner) if cfg.method == "lbfgs" else -pinv * gr
        slope = inner(gr, d)
        if not slope < 0:
            s_hist.clear()
            y_hist.clear()
            d = -pinv * gr
            slope = inner(gr, d)
        t = cfg.initial_step
        accepted = False
        for _ in range(60):
            trial = eh + t * d
            ok, _, _ = prob.admissible(trial)
            if not ok:
                constraint_hits += 1
                t *= 0.5
                continue
            j_new, g_new = prob.value_and_grad(trial)
            if j_new <= j + cfg.armijo * t * slope:
                accepted = True
                break
            t *= cfg.backtrack
        if not accepted:
            stop = "line_search"
            break
        if cfg.symmetric:
            g_new = _even_part(grid, g_new)
        s, y = trial - eh, g_new - gr
        sy = inner(s, y)
        if sy > 1e-14 * math.sqrt(inner(s, s) * inner(y, y)):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > cfg.memory:
                s_hist.pop(0)
                y_hist.pop(0)
        eh, j, gr = trial, j_new, g_new
        history.append(j)
        gnorm = math.sqrt(max(inner(gr, pinv * gr), 0.0))
        gnorms.append(gnorm)
        if callback is not None:
            callback(it, j, gnorm)
        if checkpoint is not None and it % checkpoint_every == 0:
            save_checkpoint(checkpoint, cfg, it, j, PeriodicProfile.from_spectrum(grid, eh))
        # stall: flat energy and no gradient progress over the window
        w = cfg.stall_window
        if (
            len(gnorms) > 2 * w
            and abs(history[-1 - w] - history[-1]) <= cfg.stall_tol * abs(history[-1])
            and min(gnorms[-w:]) >= min(gnorms[:-w])
        ):
            stop = "stall"
            break

    eta = PeriodicProfile.from_spectrum(grid, eh)
    report = eval_J(eta, cfg.mu, ctx, cfg.dn, taylor=False)
    below = report.j_mu < 2.0 * ctx.nu0 * cfg.mu
    converged = below and gnorm <= cfg.grad_tol * max(1.0, abs(j))
    result = MinimizeResult(
        eta=eta,
        nu_mu=cfg.mu / report.l_total,
        report=report,
        iterations=it,
        converged=bool(converged),
        constraint_active=constraint_hits > 0 and _near_boundary(prob, eh),
        grad_norm=gnorm,
        stop_reason=stop,
        history=tuple(history),
    )
    if checkpoint is not None:
        save_checkpoint(checkpoint, cfg, it, j, eta)
    return result


def _near_boundary(prob, eh, rel=1e-3):
    _, depth, h2 = prob.admissible(eh)
    cfg = prob.cfg
    return depth - cfg.depth_floor < rel or cfg.ball_radius - h2 < rel * cfg.ball_radius


def _direction(g, pinv, s_hist, y_hist, inner):
    """L-BFGS two-loop recursion with the multiplier ``pinv`` as initial inverse Hessian."""
    q = g.copy()
    alphas = []
    rhos = [1.0 / inner(y, s) for s, y in zip(s_hist, y_hist)]
    for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rhos)):
        a = rho * inner(s, q)
        alphas.append(a)
        q = q - a * y
    r = pinv * q
    if s_hist:
        s, y = s_hist[-1], y_hist[-1]
        r = r * (inner(s, y) / inner(y, pinv * y))
    for (s, y, rho), a in zip(zip(s_hist, y_hist, rhos), reversed(alphas)):
        b = rho * inner(y, r)
        r = r + (a - b) * s
    return -r


def normalize_translation(eta: PeriodicProfile) -> PeriodicProfile:
    """Shift so the circular centroid of ``eta^2`` sits at ``x = 0`` (sub-grid, spectral)."""
    w = eta.values**2
    total = float(w.sum())
    if total == 0.0:
        raise DomainError("cannot normalise the zero profile")
    grid = eta.grid
    theta = math.pi * grid.x / grid.half_length
    centre = grid.half_length / math.pi * math.atan2(float((w * np.sin(theta)).sum()), float((w * np.cos(theta)).sum()))
    return eta.shifted(centre)


def rescale_profile(eta: PeriodicProfile, grid: Grid, ctx, alpha_old, alpha_new, omega=0.0):
    """Seed for a new ``mu``: test profile at ``alpha_new`` plus the old correction.

    The correction ``eta - eta*_{alpha_old}`` is interpolated spectrally onto the new
    grid (zero outside the old period) and scaled by ``(alpha_new / alpha_old)^2``.
    """
    c = nls_coefficients(ctx)
    corr = eta - test_profile(alpha_old, ctx, c, eta.grid, omega=omega)
    r = alpha_new / alpha_old
    x_new = grid.x
    spec = np.fft.rfft(corr.values) / eta.grid.n_points
    k_old = eta.grid.kr
    band = k_old <= k_old[eta.grid.n_points // 3]
    w = np.where(np.arange(band.sum()) == 0, 1.0, 2.0)
    vals = np.zeros_like(x_new)
    x_rel = x_new + eta.grid.half_length
    chunk = 2048
    for i in range(0, x_new.size, chunk):
        ph = np.exp(1j * np.outer(x_rel[i : i + chunk], k_old[band]))
        vals[i : i + chunk] = (ph @ (w * spec[band])).real
    vals = np.where(np.abs(x_new) <= eta.grid.half_length, vals, 0.0)
    new = test_profile(alpha_new, ctx, c, grid, omega=omega) + PeriodicProfile(grid, r * r * vals)
    return PeriodicProfile.from_spectrum(grid, grid.project(new.spectrum))


def continuation_sweep(mu_list, base: MinimizeConfig, on_result=None):
    """Minimise along a descending ``mu`` list.

    Each ``mu`` gets the fresh multi-phase runs plus one run seeded from the previous
    minimiser; the lowest energy wins.
    """
    mus = [float(m) for m in mu_list]
    if not mus:
        raise DomainError("empty mu list")
    if any(b >= a for a, b in zip(mus, mus[1:])):
        raise DomainError("mu_list must be strictly descending")
    results = []
    prev = None
    for mu in mus:
        cfg = replace(base, mu=mu, initial="test-profile")
        runs, err = [], None
        try:
            runs.append(_unwrap(minimize, cfg))
        except (SolverError, DomainError) as exc:
            err = exc
        if prev is not None and math.isfinite(prev.initial_alpha):
            try:
                ctx = cfg.context()
                alpha_new = _seed_alpha(cfg, ctx, prev.phase)
                seed = rescale_profile(prev.eta, cfg.grid(), ctx, prev.initial_alpha, alpha_new, prev.phase)
                res = _unwrap(minimize, replace(cfg, initial="continuation"), initial=seed)
                runs.append(replace(res, initial_alpha=alpha_new, phase=prev.phase))
            except (SolverError, DomainError) as exc:
                log.info("continuation seed at mu = %g rejected: %s", mu, exc)
        if runs:
            res = pick_best(runs)
            prev = res
        else:
            log.warning("mu = %g failed: %s", mu, err)
            res = err
        results.append(res)
        if on_result is not None:
            on_result(mu, res)
    return results


def _unwrap(fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except ConstrainedBoundaryError as exc:
        return exc.result


def _seed_alpha(cfg, ctx, omega=0.0):
    try:
        return alpha_from_mu(cfg.mu, ctx, nls_coefficients(ctx), cfg.grid(), cfg.dn, omega=omega)
    except SolverError:
        return cfg.mu


# -- checkpoints -----------------------------------------------------------------------


def save_checkpoint(path, cfg, iteration, j_value, eta):
    """JSON header (config, iteration, J) next to a CSV profile ``<path>.csv``."""
    path = Path(path)
    header = {"config": _jsonable(cfg.as_dict()), "iteration": iteration, "j_mu": j_value}
    path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    write_profile_csv(eta, path.with_suffix(".csv"), [f"checkpoint iteration={iteration} j_mu={j_value!r}"])


def load_checkpoint(path):
    """Return ``(MinimizeConfig, iteration, eta)``; resume with ``minimize(cfg, initial=eta)``."""
    path = Path(path)
    header = json.loads(path.read_text(encoding="utf-8"))
    raw = dict(header["config"])
    raw["dn"] = DnConfig(**raw["dn"])
    raw["phases"] = tuple(raw.get("phases", (0.0, math.pi)))
    cfg = replace(MinimizeConfig(**raw), initial="provided")
    eta = read_profile_csv(path.with_suffix(".csv"))
    return cfg, header["iteration"], eta


def _jsonable(d):
    if isinstance(d, dict):
        return {k: _jsonable(v) for k, v in d.items()}
    return d
