"""The energy pieces ``K``, ``L``, the reduced functional ``J_mu = K + mu^2 / L``, and their gradients.

All evaluations act on the band-limited projection of the input profile; products
and quadratures use the doubled grid (see ``flexwave.grid``).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .dispersion import eval_f
from .dn import DnConfig, Expansion, check_admissible, flat_inverse_symbol, solve_band
from .errors import DomainError
from .grid import PeriodicProfile

# scaling parameters for the Taylor-piece fit of t -> L(t eta)
FIT_T = (1.0, 0.5, 0.25)


@dataclass(frozen=True)
class FunctionalReport:
    k_total: float
    k2: float
    k4: float
    k_nl: float
    l_total: float
    l2: float
    l3: float
    l4: float
    l_nl: float
    j_mu: float
    nu_eta: float
    e_value: float
    i_value: float
    m_mu: float
    m_tilde_mu: float

    def as_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)


# -- K ------------------------------------------------------------------------------


def k_parts(grid, eh, gamma):
    """``(K, K2, K4)`` for the band-limited field with spectrum ``eh``."""
    k = grid.kr
    k2 = 0.5 * grid.inner(eh, (1.0 + gamma * k**4) * eh)
    ef = grid.to_fine(eh)
    px = grid.to_fine(1j * k * eh)
    pxx = grid.to_fine(-(k**2) * eh)
    total = 0.5 * grid.integrate_fine(ef**2 + gamma * pxx**2 * (1.0 + px**2) ** -2.5)
    k4 = -1.25 * gamma * grid.integrate_fine(px**2 * pxx**2)
    return total, k2, k4


def k_gradient(grid, eh, gamma):
    """``eta + gamma [eta_xx w]_xx + 5/2 gamma [eta_x eta_xx^2 (1+eta_x^2)^{-7/2}]_x`` with ``w = (1+eta_x^2)^{-5/2}``."""
    k = grid.kr
    px = grid.to_fine(1j * k * eh)
    pxx = grid.to_fine(-(k**2) * eh)
    q = 1.0 + px**2
    a = grid.from_fine(pxx * q**-2.5)
    b = grid.from_fine(px * pxx**2 * q**-3.5)
    return grid.project(eh - gamma * k**2 * a + 2.5 * gamma * 1j * k * b)


# -- L ------------------------------------------------------------------------------


@dataclass
class LSolution:
    value: float
    u: np.ndarray
    op: Expansion
    iterations: int
    residual: float
    flux: float  # P = <eta_x, u>, twice the zero-current value
    mass: float  # m = int eta
    beta: float  # optimal uniform current


def l_solve(grid, eh, cfg, x0=None):
    """Kinetic form ``L`` on the periodic cell with a free uniform current.

    The potential is ``Phi = (1 + beta) u + beta x`` with ``u`` the CG
    approximation of ``G^{-1} eta_x`` (variational value, error quadratic in the
    residual).  Maximising over ``beta`` gives

        L = P / 2 + (P - m)^2 / (2 (2 l + m - P)),   beta = (P - m) / (2 l + m - P),

    which removes the O(1/l) zero-mode defect of a purely periodic potential.
    """
    op = Expansion(grid, eh, cfg.expansion_order)
    xi = grid.project(1j * grid.kr * eh)
    u, r, it, rel = solve_band(op, grid, xi, cfg, x0=x0)
    p = grid.inner(xi, u) + grid.inner(u, r)
    m = grid.length * float(eh[0].real)
    den = grid.length + m - p
    if not den > 0:
        raise DomainError(f"degenerate mean-current problem: 2l + m - P = {den:.3g}")
    beta = (p - m) / den
    value = 0.5 * p + 0.5 * (p - m) * beta
    return LSolution(value, u, op, it, rel, p, m, beta)


def l_gradient(grid, sol: LSolution):
    """L2 gradient ``(1 + beta)^2 L_0' - (beta + beta^2 / 2)``.

    ``L_0' = -u_x - 1/2 grad_eta <u, G(eta) u>`` is the zero-current gradient
    (envelope theorem through the exact adjoint of the expansion).
    """
    g0 = grid.project(-1j * grid.kr * sol.u - 0.5 * sol.op.form_gradient(sol.u, sol.u))
    b = sol.beta
    g = (1.0 + b) ** 2 * g0
    g[0] -= b + 0.5 * b * b
    return g


def l2_value(grid, eh):
    f, _, _ = eval_f(grid.kr)
    return 0.5 * grid.inner(eh, f * eh)


def l_gradient_identity(grid, sol: LSolution, eh):
    """``L'`` from the shape-derivative identity, ``-u_x + 1/2 (Z eta_x - V u_x)``.

    Exact for the exact operator; differs from ``l_gradient`` by the truncation
    error of the expansion.
    """
    k = grid.kr
    ex = grid.to_fine(1j * k * eh)
    ux = grid.to_fine(1j * k * sol.u)
    z = (ex + ex * ux) / (1.0 + ex * ex)
    v = ux - z * ex
    g0 = grid.project(grid.from_fine(-ux + 0.5 * (z * ex - v * ux)))
    b = sol.beta
    g = (1.0 + b) ** 2 * g0
    g[0] -= b + 0.5 * b * b
    return g


# -- profile-level API --------------------------------------------------------------------


def eval_K(eta: PeriodicProfile, ctx, cfg=DnConfig()):
    """``(K, K2, K4, K_nl)``."""
    check_admissible(eta, cfg)
    total, k2, k4 = k_parts(eta.grid, eta.band_spectrum, ctx.gamma)
    return total, k2, k4, total - k2


def grad_K(eta: PeriodicProfile, ctx, cfg=DnConfig()):
    check_admissible(eta, cfg)
    return PeriodicProfile.from_spectrum(eta.grid, k_gradient(eta.grid, eta.band_spectrum, ctx.gamma))


def eval_L_value(eta: PeriodicProfile, cfg=DnConfig()):
    check_admissible(eta, cfg)
    return l_solve(eta.grid, eta.band_spectrum, cfg).value


def fit_taylor_pieces(values_pos, values_neg, ts=FIT_T):
    """Fit even/odd polynomials to ``L(+-t eta)``; returns ``(L2, L3, L4)`` estimates.

    Even part ``L2 t^2 + L4 t^4 + L6 t^6``, odd part ``L3 t^3 + L5 t^5 + L7 t^7``.
    """
    ts = np.asarray(ts)
    even = 0.5 * (np.asarray(values_pos) + np.asarray(values_neg))
    odd = 0.5 * (np.asarray(values_pos) - np.asarray(values_neg))
    ve = np.stack([ts**2, ts**4, ts**6], axis=1)
    vo = np.stack([ts**3, ts**5, ts**7], axis=1)
    ce = np.linalg.solve(ve, even)
    co = np.linalg.solve(vo, odd)
    return ce[0], co[0], ce[1]


def l_taylor_fit(eta: PeriodicProfile, cfg=DnConfig()):
    """``(L2, L3, L4)`` of ``eta`` from the scaling fit of ``t -> L(t eta)``."""
    grid, eh = eta.grid, eta.band_spectrum
    pos = [l_solve(grid, t * eh, cfg).value for t in FIT_T]
    neg = [l_solve(grid, -t * eh, cfg).value for t in FIT_T]
    return fit_taylor_pieces(pos, neg)


def l_taylor_expansion(eta: PeriodicProfile):
    """``(L2, L3, L4)`` directly from the first expansion terms.

    ``L3 = -1/2 <u0, G1 u0>``, ``L4 = 1/2 <G1 u0, G0^{-1} G1 u0> - 1/2 <u0, G2 u0>``,
    ``u0 = G0^{-1} eta_x``.
    """
    grid, eh = eta.grid, eta.band_spectrum
    inv = flat_inverse_symbol(grid.kr)
    xi = grid.project(1j * grid.kr * eh)
    u0 = inv * xi
    op = Expansion(grid, eh, 2)
    v, _ = op._forward(u0)
    g1u, g2u = v[1], v[2]
    l2 = 0.5 * grid.inner(xi, u0)
    l3 = -0.5 * grid.inner(u0, g1u)
    l4 = 0.5 * grid.inner(g1u, inv * g1u) - 0.5 * grid.inner(u0, g2u)
    return l2, l3, l4


def eval_L(eta: PeriodicProfile, cfg=DnConfig()):
    """``(L, L2, L3, L4, L_nl)``; ``L2`` from its Fourier multiplier, ``L3``/``L4`` from the scaling fit."""
    check_admissible(eta, cfg)
    grid, eh = eta.grid, eta.band_spectrum
    total = l_solve(grid, eh, cfg).value
    l2 = l2_value(grid, eh)
    _, l3, l4 = l_taylor_fit(eta, cfg)
    return total, l2, l3, l4, total - l2


def grad_L(eta: PeriodicProfile, cfg=DnConfig(), method="adjoint"):
    """L2 gradient of ``L``.

    ``method="adjoint"`` differentiates the truncated expansion exactly;
    ``method="identity"`` uses the shape-derivative identity.
    """
    check_admissible(eta, cfg)
    grid, eh = eta.grid, eta.band_spectrum
    sol = l_solve(grid, eh, cfg)
    if method == "adjoint":
        g = l_gradient(grid, sol)
    elif method == "identity":
        g = l_gradient_identity(grid, sol, eh)
    else:
        raise DomainError(f"unknown gradient method {method!r}")
    return PeriodicProfile.from_spectrum(grid, g)


def eval_J(eta: PeriodicProfile, mu, ctx, cfg=DnConfig(), taylor=True):
    """Fill a ``FunctionalReport`` for ``eta`` at impulse parameter ``mu``."""
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    check_admissible(eta, cfg)
    grid, eh = eta.grid, eta.band_spectrum
    if grid.norm0(eh) == 0.0:
        raise DomainError("J_mu is singular at eta = 0 (L = 0)")
    k_tot, k2, k4 = k_parts(grid, eh, ctx.gamma)
    sol = l_solve(grid, eh, cfg)
    l_tot = sol.value
    l2 = l2_value(grid, eh)
    if taylor:
        _, l3, l4 = l_taylor_fit(eta, cfg)
    else:
        l3 = l4 = math.nan
    nu_eta = mu / l_tot
    b = sol.beta
    # Phi_eta = nu (1 + beta) u + nu beta x
    quad = (
        (1.0 + b) ** 2 * grid.inner(sol.u, sol.op.apply_sym(sol.u))
        - 2.0 * b * (1.0 + b) * sol.flux
        + b * b * (grid.length + sol.mass)
    )
    e_value = k_tot + 0.5 * nu_eta**2 * quad
    i_value = nu_eta * ((1.0 + b) * sol.flux - b * sol.mass)
    j_mu = k_tot + mu**2 / l_tot
    return FunctionalReport(
        k_total=k_tot,
        k2=k2,
        k4=k4,
        k_nl=k_tot - k2,
        l_total=l_tot,
        l2=l2,
        l3=l3,
        l4=l4,
        l_nl=l_tot - l2,
        j_mu=j_mu,
        nu_eta=nu_eta,
        e_value=e_value,
        i_value=i_value,
        m_mu=j_mu - k2 - mu**2 / l2,
        m_tilde_mu=mu / l_tot - mu / l2,
    )


def grad_J(eta: PeriodicProfile, mu, ctx, cfg=DnConfig()):
    """``K'(eta) - (mu / L(eta))^2 L'(eta)``."""
    check_admissible(eta, cfg)
    grid, eh = eta.grid, eta.band_spectrum
    sol = l_solve(grid, eh, cfg)
    g = k_gradient(grid, eh, ctx.gamma) - (mu / sol.value) ** 2 * l_gradient(grid, sol)
    return PeriodicProfile.from_spectrum(grid, g)


def quadratic_lower_bound(eta: PeriodicProfile, mu, ctx):
    """``K2 + mu^2 / L2`` (bounded below by ``2 nu0 mu``)."""
    grid, eh = eta.grid, eta.band_spectrum
    k = grid.kr
    k2 = 0.5 * grid.inner(eh, (1.0 + ctx.gamma * k**4) * eh)
    return k2 + mu**2 / l2_value(grid, eh)
