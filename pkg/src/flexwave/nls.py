"""Cubic NLS reduction: coefficients, the sech homoclinic, and the explicit test profile."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .dispersion import WaveContext, eval_f, eval_g, gamma0_from_k0
from .errors import DefocussingError, DomainError, SolverError, TruncationError
from .grid import PeriodicProfile


@dataclass(frozen=True)
class NlsCoefficients:
    a3_1: float
    a3_2: float
    a4_1: float
    a4_2: float
    a3: float
    a4: float
    gpp_k0: float
    alpha_nls: float
    nu_nls: float
    c_nls: float

    @property
    def cubic(self):
        """``1/2 A3 + A4``; negative means focussing."""
        return 0.5 * self.a3 + self.a4

    @property
    def speed_slope(self):
        """Predicted ``d nu_mu / d(mu^2)`` at ``mu = 0``."""
        return self.alpha_nls * self.nu_nls

    def as_dict(self):
        return asdict(self)


def nls_coefficients(ctx: WaveContext) -> NlsCoefficients:
    k0, n2 = ctx.k0, ctx.nu0**2
    f1, _, _ = eval_f(k0)
    f2, _, _ = eval_f(2.0 * k0)
    g2k0, _, _ = eval_g(2.0 * k0, ctx)
    g0 = 1.0 - n2
    _, _, gpp = eval_g(k0, ctx)

    a31 = n2 * f2 * f1 + 0.5 * n2 * f1**2 - 1.5 * n2 * k0**2
    a32 = n2 * f1 + 0.5 * n2 * f1**2 - 0.5 * n2 * k0**2
    a41 = -5.0 / 12.0 * ctx.gamma * k0**6
    a42 = f1**2 * (f2 + 2.0) / 6.0 - 0.5 * k0**2 * f1
    a3 = -a31**2 / (3.0 * g2k0) - 2.0 * a32**2 / (3.0 * g0)
    a4 = a41 - n2 * a42
    alpha = 2.0 / (ctx.nu0 * f1)
    s2 = (0.5 * a3 + a4) ** 2
    return NlsCoefficients(
        a3_1=a31,
        a3_2=a32,
        a4_1=a41,
        a4_2=a42,
        a3=a3,
        a4=a4,
        gpp_k0=gpp,
        alpha_nls=alpha,
        nu_nls=-9.0 / 8.0 * alpha**2 * s2 / gpp,
        c_nls=-0.75 * alpha**3 * s2 / gpp,
    )


def cubic_coefficient(k0):
    return nls_coefficients(WaveContext.from_k0(k0)).cubic


def focussing_threshold(k_lo=1.0, k_hi=1000.0, n_scan=400, xtol=1e-6):
    """Locate the sign change of ``k0 -> 1/2 A3 + A4``; returns ``(k0_star, gamma_star)``."""
    ks = np.geomspace(k_lo, k_hi, n_scan)
    vals = np.array([cubic_coefficient(k) for k in ks])
    idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if idx.size == 0:
        raise SolverError(f"no sign change of 1/2 A3 + A4 on [{k_lo}, {k_hi}]")
    i = idx[0]
    k_star = brentq(cubic_coefficient, ks[i], ks[i + 1], xtol=xtol, rtol=1e-14)
    return k_star, float(gamma0_from_k0(k_star))


def _soliton_params(c: NlsCoefficients):
    if not c.cubic < 0:
        raise DefocussingError(f"1/2 A3 + A4 = {c.cubic:.4g} >= 0: no focussing soliton")
    amp = c.alpha_nls * math.sqrt(-3.0 * c.cubic / c.gpp_k0)
    rate = -3.0 * c.alpha_nls * c.cubic / c.gpp_k0
    return amp, rate


def _sech(z):
    a = np.exp(-np.abs(z))
    return 2.0 * a / (1.0 + a * a)


def zeta_nls(x, c: NlsCoefficients):
    """The homoclinic ``alpha_NLS (-3 g''^{-1} s)^{1/2} sech(-3 alpha_NLS g''^{-1} s x)``, ``s = 1/2 A3 + A4``."""
    amp, rate = _soliton_params(c)
    return amp * _sech(rate * np.asarray(x, dtype=float))


def zeta_nls_prime(x, c: NlsCoefficients):
    amp, rate = _soliton_params(c)
    z = rate * np.asarray(x, dtype=float)
    return -amp * rate * _sech(z) * np.tanh(z)


def zeta_norm_sq(c: NlsCoefficients):
    """``||zeta_NLS||_0^2 = 2 amp^2 / rate`` (equals ``2 alpha_NLS``)."""
    amp, rate = _soliton_params(c)
    return 2.0 * amp**2 / rate


def zeta_h1_norm_sq(c: NlsCoefficients):
    amp, rate = _soliton_params(c)
    return 2.0 * amp**2 / rate + 2.0 * amp**2 * rate / 3.0


def ode_residual(x, zeta, zeta_xx, c: NlsCoefficients):
    """Pointwise residual of ``-1/4 g'' z_xx - 2 nu_NLS z + 3/2 s |z|^2 z``."""
    return -0.25 * c.gpp_k0 * zeta_xx - 2.0 * c.nu_nls * zeta + 1.5 * c.cubic * np.abs(zeta) ** 2 * zeta


def test_profile(alpha, ctx: WaveContext, c: NlsCoefficients, grid, tail_tol=1e-12, omega=0.0):
    """Sample the near-soliton test profile built from ``zeta_NLS`` at scaling ``alpha``.

    Carrier ``alpha zeta(alpha x) cos(k0 x + omega)`` plus the second-harmonic and
    mean-flow corrections of order ``alpha^2``.  ``omega = 0`` gives a crest at the
    centre, ``omega = pi`` a trough.
    """
    if alpha < 0:
        raise DomainError(f"alpha must be non-negative, got {alpha}")
    if alpha == 0:
        return PeriodicProfile.zeros(grid)
    tail = float(zeta_nls(alpha * grid.half_length, c))
    if tail >= tail_tol:
        raise TruncationError(
            f"domain too short: zeta_NLS(alpha l) = {tail:.2e} >= {tail_tol:g} "
            f"(alpha = {alpha:.4g}, l = {grid.half_length:.4g})"
        )
    g2k0, _, _ = eval_g(2.0 * ctx.k0, ctx)
    g0 = 1.0 - ctx.nu0**2
    x = grid.x
    z = zeta_nls(alpha * x, c)
    eta = (
        alpha * z * np.cos(ctx.k0 * x + omega)
        - 0.5 * alpha**2 * c.a3_1 / g2k0 * z**2 * np.cos(2.0 * (ctx.k0 * x + omega))
        - 0.5 * alpha**2 * c.a3_2 / g0 * z**2
    )
    return PeriodicProfile(grid, eta)


def alpha_from_mu(mu, ctx, c, grid, cfg=None, rtol=1e-10, step=1.05, omega=0.0):
    """Invert ``alpha -> nu0 L(eta*_alpha)`` on its monotone small-amplitude branch.

    Marches ``alpha`` upward from ``mu / 2`` until the residual changes sign, then
    polishes with Brent's method.  Raises ``SolverError`` if the map turns over
    before reaching ``mu`` (the inverse only exists for small ``mu``).
    """
    from .dn import DnConfig
    from .functionals import eval_L_value

    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    cfg = DnConfig() if cfg is None else cfg

    def level(a):
        return ctx.nu0 * eval_L_value(test_profile(a, ctx, c, grid, omega=omega), cfg)

    lo = 0.5 * mu
    try:
        v_lo = level(lo)
        if not v_lo < mu:
            raise SolverError(f"alpha(mu) bracket failure at mu = {mu:g}: level {v_lo:.4g} at alpha = {lo:.4g}")
        for _ in range(200):
            hi = lo * step
            v_hi = level(hi)
            if v_hi >= mu:
                break
            if v_hi <= v_lo:
                raise SolverError(
                    f"alpha(mu) bracket failure at mu = {mu:g}: nu0 L(eta*_alpha) turns over at "
                    f"alpha = {lo:.4g} with maximum about {v_lo:.4g} < mu; try a smaller mu"
                )
            lo, v_lo = hi, v_hi
        else:
            raise SolverError(f"alpha(mu) bracket failure at mu = {mu:g}")
    except DomainError as exc:
        raise SolverError(f"alpha(mu) bracket failure at mu = {mu:g}: {exc}; try a smaller mu") from exc
    return brentq(lambda a: level(a) - mu, lo, hi, xtol=1e-300, rtol=max(rtol * 1e-2, 4e-16), maxiter=200)


def soliton_samples(c: NlsCoefficients, n=1024, tail=1e-17):
    """``zeta_NLS`` on a periodic box wide enough that the tail is below ``tail``.

    Returns ``(x, zeta, residual)`` with ``zeta_xx`` taken spectrally.
    """
    amp, rate = _soliton_params(c)
    half = math.log(2.0 * amp / tail) / rate
    x = -half + 2.0 * half * np.arange(n) / n
    z = zeta_nls(x, c)
    k = 2.0 * np.pi * np.fft.rfftfreq(n, d=2.0 * half / n)
    zxx = np.fft.irfft(-(k**2) * np.fft.rfft(z), n)
    return x, z, ode_residual(x, z, zxx, c)
