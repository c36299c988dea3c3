"""Linear dispersion relation for hydroelastic waves on a fluid layer of unit depth.

Linear waves ``cos k(x + nu t)`` travel with speed ``nu(k)`` where
``nu(k)^2 = (1 + gamma k^4) / f(k)`` and ``f(k) = |k| coth |k|``.  The speed has
a unique positive minimiser ``k0``; the coercivity symbol
``g(k) = 1 + gamma k^4 - nu0^2 f(k)`` vanishes to second order at ``+-k0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import bernoulli

from .errors import DomainError, SolverError

# |k| below this uses the even Taylor series of k coth k
SERIES_SWITCH = 1e-2

# k coth k = sum_n c_n k^(2n), c_n = 4^n B_2n / (2n)!
_SERIES = np.array(
    [4.0**n * bernoulli(2 * n)[2 * n] / math.factorial(2 * n) for n in range(8)]
)


def _f_series(k):
    k2 = k * k
    f = np.zeros_like(k)
    fp = np.zeros_like(k)
    fpp = np.zeros_like(k)
    for n, c in enumerate(_SERIES):
        f += c * k2**n
        if n >= 1:
            fp += 2 * n * c * k ** (2 * n - 1)
            fpp += 2 * n * (2 * n - 1) * c * k ** (2 * n - 2)
    return f, fp, fpp


def _f_direct(a):
    # a = |k| >= SERIES_SWITCH; exp(-2a) form avoids overflow of sinh
    e = np.exp(-2.0 * a)
    coth = (1.0 + e) / (1.0 - e)
    csch2 = 4.0 * e / (1.0 - e) ** 2
    f = a * coth
    fp = coth - a * csch2
    fpp = 2.0 * csch2 * (a * coth - 1.0)
    return f, fp, fpp


def eval_f(k):
    """Return ``(f, f', f'')`` for ``f(k) = |k| coth |k|``.

    Works elementwise on arrays.  ``f`` and ``f''`` are even, ``f'`` is odd.
    """
    k = np.asarray(k, dtype=float)
    scalar = k.ndim == 0
    k = np.atleast_1d(k)
    a = np.abs(k)
    sign = np.sign(k)
    f = np.empty_like(a)
    fp = np.empty_like(a)
    fpp = np.empty_like(a)
    small = a < SERIES_SWITCH
    if small.any():
        f[small], fp[small], fpp[small] = _f_series(a[small])
    big = ~small
    if big.any():
        f[big], fp[big], fpp[big] = _f_direct(a[big])
    fp = fp * sign
    if scalar:
        return float(f[0]), float(fp[0]), float(fpp[0])
    return f, fp, fpp


def gamma0_from_k0(k0):
    """Flexural rigidity for which ``k0`` is the bifurcation wavenumber."""
    if not np.all(np.asarray(k0) > 0):
        raise DomainError(f"k0 must be positive, got {k0}")
    f, fp, _ = eval_f(k0)
    return fp / (k0**3 * (4.0 * f - k0 * fp))


def _dgamma0_dk0(k0):
    f, fp, fpp = eval_f(k0)
    den = k0**3 * (4.0 * f - k0 * fp)
    dden = 3 * k0**2 * (4.0 * f - k0 * fp) + k0**3 * (3.0 * fp - k0 * fpp)
    return (fpp * den - fp * dden) / den**2


def nu0_from_k0(k0):
    f, fp, _ = eval_f(k0)
    return math.sqrt(4.0 / (4.0 * f - k0 * fp))


def k0_from_gamma(gamma, k_min=1e-6, max_doublings=200):
    """Invert ``gamma0`` by bracketing bisection in ``log k`` plus a Newton polish."""
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    lo = k_min
    if gamma0_from_k0(lo) < gamma:
        raise SolverError(
            f"bracket failure: gamma0({lo:g}) = {gamma0_from_k0(lo):.3e} < gamma = {gamma:.3e}"
        )
    hi = 1.0
    for _ in range(max_doublings):
        if gamma0_from_k0(hi) < gamma:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise SolverError(f"bracket failure: gamma0 stays above {gamma:.3e} up to k = {hi:g}")

    # compare in log space: gamma0 spans many decades
    target = math.log(gamma)
    for _ in range(200):
        mid = math.sqrt(lo * hi)
        if math.log(gamma0_from_k0(mid)) > target:
            lo = mid
        else:
            hi = mid
        if hi / lo - 1.0 < 1e-13:
            break
    k = math.sqrt(lo * hi)
    for _ in range(5):
        r = gamma0_from_k0(k) - gamma
        d = _dgamma0_dk0(k)
        if d == 0:
            break
        step = r / d
        if not lo * 0.5 < k - step < hi * 2.0:
            break
        k -= step
    return k


@dataclass(frozen=True)
class WaveContext:
    """Parameter bundle ``(gamma, k0, nu0)`` fixing the bifurcation point."""

    gamma: float
    k0: float
    nu0: float

    def __post_init__(self):
        if not (self.gamma > 0 and self.k0 > 0 and 0 < self.nu0 < 1):
            raise DomainError(f"invalid wave context {self}")

    @classmethod
    def from_k0(cls, k0):
        k0 = float(k0)
        return cls(gamma=float(gamma0_from_k0(k0)), k0=k0, nu0=nu0_from_k0(k0))

    @classmethod
    def from_gamma(cls, gamma):
        k0 = k0_from_gamma(float(gamma))
        return cls(gamma=float(gamma), k0=k0, nu0=nu0_from_k0(k0))

    def check(self, rtol=1e-12, atol=1e-10):
        """Verify the defining relations; returns a dict of residuals."""
        g, gp, _ = eval_g(self.k0, self)
        res = {
            "gamma_rel": abs(gamma0_from_k0(self.k0) - self.gamma) / self.gamma,
            "nu0_rel": abs(nu0_from_k0(self.k0) ** 2 - self.nu0**2) / self.nu0**2,
            "g_k0": abs(g),
            "gp_k0": abs(gp),
        }
        res["ok"] = (
            res["gamma_rel"] < rtol
            and res["nu0_rel"] < rtol
            and res["g_k0"] < atol
            and res["gp_k0"] < atol
            and 1.0 - self.nu0**2 > 0
        )
        return res


def nu(k, ctx):
    """Linear phase speed ``nu(k)``; ``nu(0) = 1``."""
    f, _, _ = eval_f(k)
    return np.sqrt((1.0 + ctx.gamma * np.asarray(k, dtype=float) ** 4) / f)


def eval_g(k, ctx):
    """Return ``(g, g', g'')`` for ``g(k) = 1 + gamma k^4 - nu0^2 f(k)``."""
    k = np.asarray(k, dtype=float) if np.ndim(k) else float(k)
    f, fp, fpp = eval_f(k)
    n2 = ctx.nu0**2
    g = 1.0 + ctx.gamma * k**4 - n2 * f
    gp = 4.0 * ctx.gamma * k**3 - n2 * fp
    gpp = 12.0 * ctx.gamma * k**2 - n2 * fpp
    return g, gp, gpp


def dispersion_table(ctx, k_max=None, n=400):
    """Samples of ``nu(k)`` on ``[0, k_max]`` for plotting."""
    k_max = 3.0 * ctx.k0 if k_max is None else k_max
    k = np.linspace(0.0, k_max, n)
    return k, nu(k, ctx)
