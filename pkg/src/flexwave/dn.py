"""Dirichlet-Neumann operator for a fluid layer of unit depth over a flat bed.

Two independent evaluation paths:

* ``dn_apply`` -- Taylor expansion ``G = sum_j G_j(eta)`` about the flat state,
  evaluated by the sequential recursion

      v_0 = G_0 Phi
      v_n = (1/n!) S_n[eta^n Phi_x] - sum_{m=1..n} B_m[(eta^m / m!) v_{n-m}]

  with Fourier symbols ``S_n = -i k^n tau_n``, ``B_m = k^m sigma_m`` where
  ``tau_n`` (``sigma_m``) is ``tanh k`` for even ``n`` (odd ``m``) and 1 otherwise.
  The discrete operator is symmetrised, ``(G_M + G_M^T) / 2``, with ``G_M^T``
  obtained by running the recursion in reverse.
* ``dn_oracle`` -- the Laplace problem on the strip, flattened by
  ``s = y / (1 + eta(x))``, Fourier collocation in ``x`` and Chebyshev in ``s``,
  solved by GMRES preconditioned with the exact flat-strip inverse.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import ConfigError, ConvergenceError, DomainError, ImplementationDefect, SolverError
from .grid import Grid, PeriodicProfile, sobolev_norm

MAX_ORDER = 6


@dataclass(frozen=True)
class DnConfig:
    expansion_order: int = 4
    oracle_ny: int = 64
    cg_tol: float = 1e-10
    cg_max_iter: int = 200
    depth_floor: float = 0.5
    ball_radius: float = 1.0

    def __post_init__(self):
        if not 0 <= self.expansion_order <= MAX_ORDER:
            raise ConfigError(f"expansion_order must be in [0, {MAX_ORDER}], got {self.expansion_order}")
        if not 0 < self.cg_tol <= 1e-6:
            raise ConfigError(f"cg_tol must lie in (0, 1e-6], got {self.cg_tol}")
        if self.oracle_ny < 16:
            raise ConfigError(f"oracle_ny must be >= 16, got {self.oracle_ny}")
        if not 0 < self.depth_floor < 1:
            raise ConfigError(f"depth_floor must lie in (0, 1), got {self.depth_floor}")
        if self.cg_max_iter < 1 or not self.ball_radius > 0:
            raise ConfigError("cg_max_iter and ball_radius must be positive")


@dataclass(frozen=True, eq=False)
class DnSolve:
    result: PeriodicProfile
    iterations: int
    residual: float


def check_admissible(eta, cfg):
    """Raise ``DomainError`` unless ``1 + min eta > h0`` and ``||eta||_2 < M``."""
    depth = 1.0 + float(np.min(eta.values))
    if not depth > cfg.depth_floor:
        raise DomainError(f"eta leaves the admissible set: 1 + min eta = {depth:.4g} <= {cfg.depth_floor}")
    h2 = sobolev_norm(eta, 2)
    if not h2 < cfg.ball_radius:
        raise DomainError(f"eta leaves the admissible set: ||eta||_2 = {h2:.4g} >= {cfg.ball_radius}")


def flat_symbol(k):
    """``|k| tanh |k|``, the flat-surface Dirichlet-Neumann symbol."""
    return k * np.tanh(k)


def flat_inverse_symbol(k):
    out = np.zeros_like(k, dtype=float)
    nz = k != 0
    out[nz] = 1.0 / (k[nz] * np.tanh(k[nz]))
    return out


class Expansion:
    """Truncated expansion of ``G(eta)`` on one band-limited surface.

    All vectors are one-sided spectra on ``grid`` (band-projected).
    """

    def __init__(self, grid: Grid, eta_hat, order: int):
        self.grid = grid
        self.order = order
        k = grid.kr
        th = np.tanh(k)
        self.g0 = k * th
        self.dx = 1j * k
        self.S = [-1j * k**n * (th if n % 2 == 0 else 1.0) for n in range(order + 1)]
        self.B = [k**m * (th if m % 2 else 1.0) for m in range(order + 1)]
        ef = grid.to_fine(eta_hat)
        self.pow = [np.ones_like(ef)]
        for m in range(1, order + 1):
            self.pow.append(self.pow[-1] * ef / m)

    def _mul(self, m, vf):
        return self.grid.from_fine(self.pow[m] * vf)

    def _forward(self, b):
        """Return the list ``[v_0, ..., v_M]`` and the fine-grid ``Phi_x``."""
        grid, M = self.grid, self.order
        bxf = grid.to_fine(self.dx * b)
        v = [self.g0 * b]
        vf = []
        for n in range(1, M + 1):
            vf.append(grid.to_fine(v[n - 1]))
            acc = self.S[n] * self._mul(n, bxf)
            for m in range(1, n + 1):
                acc -= self.B[m] * self._mul(m, vf[n - m])
            v.append(acc)
        return v, bxf

    def _adjoints(self, a):
        """Adjoint variables ``lambda_n`` for the functional ``<a, G_M b>``."""
        M = self.order
        lam = [np.array(a, dtype=complex) for _ in range(M + 1)]
        for n in range(M, 0, -1):
            for m in range(1, n + 1):
                lam[n - m] -= self._mul(m, self.grid.to_fine(self.B[m] * lam[n]))
        return lam

    def apply(self, b):
        v, _ = self._forward(b)
        return self.grid.project(sum(v))

    def apply_transpose(self, a):
        lam = self._adjoints(a)
        out = self.g0 * lam[0]
        for n in range(1, self.order + 1):
            out = out + self.dx * self._mul(n, self.grid.to_fine(self.S[n] * lam[n]))
        return self.grid.project(out)

    def apply_sym(self, b):
        return 0.5 * (self.apply(b) + self.apply_transpose(b))

    def term(self, b, j):
        """The single expansion term ``G_j(eta) b``."""
        v, _ = self._forward(b)
        return self.grid.project(v[j])

    def form_gradient(self, a, b):
        """L2 gradient with respect to ``eta`` of ``<a, G_M(eta) b>``."""
        grid, M = self.grid, self.order
        v, bxf = self._forward(b)
        lam = self._adjoints(a)
        vf = [grid.to_fine(vi) for vi in v[:M]]
        acc = np.zeros(grid.n_fine)
        for n in range(1, M + 1):
            acc -= self.pow[n - 1] * bxf * grid.to_fine(self.S[n] * lam[n])
            bl = [None] + [grid.to_fine(self.B[m] * lam[n]) for m in range(1, n + 1)]
            for m in range(1, n + 1):
                acc -= self.pow[m - 1] * vf[n - m] * bl[m]
        return grid.from_fine(acc)


def expansion_for(eta, cfg):
    return Expansion(eta.grid, eta.band_spectrum, cfg.expansion_order)


def dn_flat(phi):
    """Apply the flat-surface operator, symbol ``|k| tanh |k|``."""
    g = phi.grid
    return PeriodicProfile.from_spectrum(g, flat_symbol(g.kr) * phi.spectrum)


def dn_apply(eta, phi, cfg=DnConfig()):
    """``G(eta) Phi`` from the expansion truncated after ``expansion_order`` terms."""
    check_admissible(eta, cfg)
    _validate_first_order()
    op = expansion_for(eta, cfg)
    return PeriodicProfile.from_spectrum(eta.grid, op.apply_sym(phi.band_spectrum))


def dn_term(eta, phi, j, cfg=DnConfig()):
    """The homogeneous piece ``G_j(eta) Phi`` of degree ``j`` in ``eta``."""
    if j > cfg.expansion_order:
        raise ConfigError(f"term {j} exceeds expansion_order {cfg.expansion_order}")
    op = Expansion(eta.grid, eta.band_spectrum, max(j, 1))
    return PeriodicProfile.from_spectrum(eta.grid, op.term(phi.band_spectrum, j))


# -- inverse ---------------------------------------------------------------------


def pcg(apply, rhs, precond, inner, tol, max_iter, x0=None):
    """Preconditioned conjugate gradients; returns ``(x, r, iterations, rel_residual)``."""
    rnorm0 = math.sqrt(max(inner(rhs, rhs), 0.0))
    if rnorm0 == 0.0:
        return np.zeros_like(rhs), np.zeros_like(rhs), 0, 0.0
    if x0 is None:
        x = np.zeros_like(rhs)
        r = rhs.copy()
    else:
        x = x0.copy()
        r = rhs - apply(x)
    z = precond(r)
    p = z.copy()
    rz = inner(r, z)
    for it in range(max_iter + 1):
        rel = math.sqrt(max(inner(r, r), 0.0)) / rnorm0
        if rel <= tol:
            return x, r, it, rel
        if it == max_iter:
            break
        q = apply(p)
        pq = inner(p, q)
        if pq <= 0:
            raise SolverError(f"operator not positive definite (p.Gp = {pq:.3e})")
        a = rz / pq
        x = x + a * p
        r = r - a * q
        z = precond(r)
        rz_new = inner(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not reach tol {tol:g} in {max_iter} iterations (residual {rel:.3e})",
        residual=rel,
        iterations=max_iter,
    )


def solve_band(op, grid, xi_hat, cfg, x0=None):
    """Solve ``G_sym u = xi`` on the zero-mean band subspace."""
    pinv = flat_inverse_symbol(grid.kr)
    return pcg(
        op.apply_sym,
        grid.project(xi_hat),
        lambda r: pinv * r,
        grid.inner,
        cfg.cg_tol,
        cfg.cg_max_iter,
        x0=x0,
    )


def dn_inverse(eta, xi, cfg=DnConfig()):
    """Zero-mean ``u`` with ``||G(eta) u - xi||_0 <= cg_tol ||xi||_0``."""
    check_admissible(eta, cfg)
    grid = eta.grid
    xh = xi.band_spectrum
    scale = max(grid.norm0(xh), 1e-300)
    if abs(xh[0]) * math.sqrt(grid.length) > 1e-10 * scale:
        raise DomainError(f"xi must have zero mean, mean = {xh[0].real:.3e}")
    xh = xh.copy()
    xh[0] = 0.0
    op = expansion_for(eta, cfg)
    u, r, it, rel = solve_band(op, grid, xh, cfg)
    return DnSolve(PeriodicProfile.from_spectrum(grid, u), it, rel)


# -- shape derivative --------------------------------------------------------------


def dn_shape_derivative(eta, omega, phi, cfg=DnConfig()):
    """Directional derivative ``dG(eta)[omega] Phi`` via the shape-derivative identity

        dG(eta)[omega] Phi = -G(eta)(omega Z) - (omega V)_x,
        Z = (G(eta) Phi + eta_x Phi_x) / (1 + eta_x^2),   V = Phi_x - Z eta_x.
    """
    check_admissible(eta, cfg)
    grid = eta.grid
    op = expansion_for(eta, cfg)
    ph = phi.band_spectrum
    gphi = grid.to_fine(op.apply_sym(ph))
    ex = grid.to_fine(grid.deriv(eta.band_spectrum))
    px = grid.to_fine(grid.deriv(ph))
    wf = grid.to_fine(omega.band_spectrum)
    z = (gphi + ex * px) / (1.0 + ex * ex)
    vel = px - z * ex
    out = -op.apply_sym(grid.from_fine(wf * z)) - grid.deriv(grid.from_fine(wf * vel))
    return PeriodicProfile.from_spectrum(grid, grid.project(out))


def dn_directional_fd(eta, omega, phi, cfg=DnConfig(), eps=1e-5):
    """Central finite difference of ``dn_apply`` in direction ``omega``."""
    plus = dn_apply(eta + eps * omega, phi, cfg)
    minus = dn_apply(eta - eps * omega, phi, cfg)
    return (plus - minus) * (0.5 / eps)


# -- elliptic oracle ----------------------------------------------------------------


def _cheb(n):
    """Chebyshev points on [0, 1] (s_0 = 1 ... s_n = 0) and differentiation matrix."""
    j = np.arange(n + 1)
    t = np.cos(np.pi * j / n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** j
    dt = t[:, None] - t[None, :]
    d = np.outer(c, 1.0 / c) / (dt + np.eye(n + 1))
    d -= np.diag(d.sum(axis=1))
    return (t + 1.0) / 2.0, 2.0 * d


@lru_cache(maxsize=16)
def _flat_blocks(n_points, half_length, ny):
    """LU-free inverse blocks of the flat-strip operator, one per wavenumber."""
    s, d = _cheb(ny)
    d2 = d @ d
    k = 2.0 * math.pi * sfft.rfftfreq(n_points, d=2.0 * half_length / n_points)
    mats = np.empty((k.size, ny + 1, ny + 1))
    for i, kk in enumerate(k):
        a = d2 - kk * kk * np.eye(ny + 1)
        a[0, :] = 0.0
        a[0, 0] = 1.0
        a[-1, :] = d[-1, :]
        mats[i] = a
    return np.linalg.inv(mats)


def dn_oracle(eta, phi, cfg=DnConfig(), ny=None, tol=1e-13):
    """``G(eta) Phi`` from a direct solve of the Laplace problem in the fluid layer."""
    check_admissible(eta, cfg)
    grid = eta.grid
    n = grid.n_points
    ny = cfg.oracle_ny if ny is None else ny
    s, d = _cheb(ny)
    d2 = d @ d
    k = grid.k

    def dx(v, order=1):
        c = sfft.fft(v, axis=-1)
        mult = (1j * k) ** order
        if order % 2:
            mult = mult.copy()
            mult[n // 2] = 0.0
        return sfft.ifft(mult * c, axis=-1).real

    h = 1.0 + eta.values
    ex = dx(eta.values)
    a = ex / h
    ax = dx(a)
    S = s[:, None]
    c_xs = -2.0 * a[None, :] * S
    c_s = (a * a - ax)[None, :] * S
    c_ss = a[None, :] ** 2 * S**2 + (1.0 / h**2)[None, :]
    inv_blocks = _flat_blocks(n, grid.half_length, ny)

    def operator(flat):
        psi = flat.reshape(ny + 1, n)
        ps = d @ psi
        out = dx(psi, 2) + c_xs * dx(ps) + c_s * ps + c_ss * (d2 @ psi)
        out[0] = psi[0]
        out[-1] = ps[-1]
        return out.ravel()

    def precond(flat):
        r = flat.reshape(ny + 1, n)
        rh = sfft.rfft(r, axis=1)
        sol = np.einsum("kij,jk->ik", inv_blocks, rh)
        return sfft.irfft(sol, n=n, axis=1).ravel()

    rhs = np.zeros((ny + 1, n))
    rhs[0] = phi.values
    size = (ny + 1) * n
    A = LinearOperator((size, size), matvec=operator, dtype=float)
    Mop = LinearOperator((size, size), matvec=precond, dtype=float)
    x0 = precond(rhs.ravel())
    sol, info = gmres(A, rhs.ravel(), x0=x0, M=Mop, rtol=tol, atol=0.0, restart=80, maxiter=10)
    if info != 0:
        res = np.linalg.norm(operator(sol) - rhs.ravel()) / np.linalg.norm(rhs)
        if res > 1e-9:
            raise SolverError(f"elliptic oracle: GMRES failed (info={info}, residual {res:.2e})")
    psi = sol.reshape(ny + 1, n)
    ps_top = (d @ psi)[0]
    px = dx(phi.values)
    out = ps_top * (1.0 + ex * ex) / h - ex * px
    return PeriodicProfile(grid, out)


@lru_cache(maxsize=1)
def _validate_first_order():
    """Check the first expansion term against the oracle's linearisation at eta = 0."""
    grid = Grid(math.pi, 32)
    x = grid.x
    omega = PeriodicProfile(grid, 0.6 * np.cos(x) - 0.3 * np.sin(2 * x) + 0.2 * np.cos(3 * x))
    phi = PeriodicProfile(grid, np.sin(x) + 0.5 * np.cos(2 * x) - 0.25 * np.sin(4 * x))
    cfg = DnConfig(expansion_order=1)
    eps = 1e-3
    vals = {}
    for t in (-2, -1, 1, 2):
        vals[t] = dn_oracle(omega * (t * eps), phi, cfg, ny=32).values
    fd = (8 * (vals[1] - vals[-1]) - (vals[2] - vals[-2])) / (12 * eps)
    g1 = grid.inverse(Expansion(grid, omega.band_spectrum, 1).term(phi.band_spectrum, 1))
    err = float(np.max(np.abs(g1 - fd)) / np.max(np.abs(fd)))
    if err > 1e-8:
        raise ImplementationDefect(f"first expansion term disagrees with the elliptic oracle (rel {err:.2e})")
    return err
