"""Periodic computational domain and the spectral machinery built on it.

Internally fields are carried as one-sided spectra ``c = rfft(v) / N`` so that
``v(x) = sum_k c_k exp(i k (x - x_0))`` with ``x_0 = -half_length``.  The
discrete model is a Galerkin truncation: every field is projected onto the
band ``|j| <= N // 3`` and pointwise products are evaluated on a grid twice as
fine, which removes aliasing from products of up to five band-limited factors.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
import scipy.fft as sfft

from .errors import ConfigError, DomainError, ResolutionError


def _is_pow2(n):
    return n > 0 and n & (n - 1) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-half_length, half_length)``."""

    half_length: float
    n_points: int

    def __post_init__(self):
        if not self.half_length > 0:
            raise ConfigError(f"half_length must be positive, got {self.half_length}")
        if not _is_pow2(self.n_points) or self.n_points < 16:
            raise ConfigError(f"n_points must be a power of two >= 16, got {self.n_points}")

    @classmethod
    def for_carrier(cls, k0, mu, c_ell=12.0, points_per_carrier=16):
        """Domain ``l = c_ell 2 pi / (k0 mu)`` with at least ``points_per_carrier`` per wavelength."""
        half = c_ell * 2.0 * math.pi / (k0 * mu)
        dx_max = 2.0 * math.pi / k0 / points_per_carrier
        n = 1 << max(4, math.ceil(math.log2(2.0 * half / dx_max)))
        return cls(half, n)

    @property
    def length(self):
        return 2.0 * self.half_length

    @property
    def dx(self):
        return self.length / self.n_points

    @cached_property
    def x(self):
        return -self.half_length + self.dx * np.arange(self.n_points)

    @cached_property
    def k(self):
        """Signed wavenumbers in FFT order."""
        return 2.0 * math.pi * sfft.fftfreq(self.n_points, d=self.dx)

    @cached_property
    def kr(self):
        """Non-negative wavenumbers of the one-sided spectrum."""
        return 2.0 * math.pi * sfft.rfftfreq(self.n_points, d=self.dx)

    @property
    def k_step(self):
        return math.pi / self.half_length

    @cached_property
    def band(self):
        j = np.arange(self.n_points // 2 + 1)
        return j <= self.n_points // 3

    @cached_property
    def _weights(self):
        # one-sided spectrum weights for the L2 inner product
        w = np.full(self.n_points // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w * self.length

    @property
    def n_fine(self):
        return 2 * self.n_points

    # -- array-level transforms -------------------------------------------------

    def forward(self, values):
        return sfft.rfft(values, norm="forward")

    def inverse(self, coeffs):
        return sfft.irfft(coeffs, n=self.n_points, norm="forward")

    def to_fine(self, coeffs):
        """Band-limited interpolant sampled on the doubled grid."""
        return sfft.irfft(coeffs, n=self.n_fine, norm="forward")

    def from_fine(self, values_fine):
        """Project a doubled-grid field back onto the band."""
        c = sfft.rfft(values_fine, norm="forward")[: self.n_points // 2 + 1]
        c[~self.band] = 0.0
        return c

    def project(self, coeffs):
        c = np.array(coeffs, dtype=complex)
        c[~self.band] = 0.0
        return c

    def inner(self, a, b):
        """L2 inner product of two real fields given by their one-sided spectra."""
        return float(np.sum(self._weights * (a.real * b.real + a.imag * b.imag)))

    def norm0(self, a):
        return math.sqrt(max(self.inner(a, a), 0.0))

    def integrate_fine(self, values_fine):
        return self.length * float(np.mean(values_fine))

    def deriv(self, coeffs, order=1):
        return (1j * self.kr) ** order * coeffs

    def shift_phase(self, s):
        """Multiplier taking ``v(x)`` to ``v(x + s)``."""
        return np.exp(1j * self.kr * s)


@dataclass(frozen=True, eq=False)
class PeriodicProfile:
    """A real surface elevation sampled on a ``Grid``; immutable."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise DomainError(f"expected {self.grid.n_points} samples, got shape {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid, fn: Callable):
        return cls(grid, fn(grid.x))

    @classmethod
    def from_spectrum(cls, grid, coeffs):
        return cls(grid, grid.inverse(coeffs))

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.n_points))

    @cached_property
    def spectrum(self):
        """One-sided spectrum (forward normalisation)."""
        s = self.grid.forward(self.values)
        s.setflags(write=False)
        return s

    @cached_property
    def coeffs(self):
        """Unitary full-length discrete Fourier coefficients."""
        return transform(self)

    @cached_property
    def band_spectrum(self):
        return self.grid.project(self.spectrum)

    def projected(self):
        return PeriodicProfile.from_spectrum(self.grid, self.band_spectrum)

    def derivative(self, order=1):
        c = self.grid.deriv(self.spectrum, order)
        if order % 2 and self.grid.n_points % 2 == 0:
            c[-1] = 0.0
        return PeriodicProfile.from_spectrum(self.grid, c)

    def shifted(self, s):
        """Return ``x -> eta(x + s)`` via a spectral phase shift."""
        c = self.spectrum * self.grid.shift_phase(s)
        c[-1] = c[-1].real
        return PeriodicProfile.from_spectrum(self.grid, c)

    def reflected(self):
        """Return ``x -> eta(-x)``; the grid is symmetric under ``j -> N - j``."""
        return PeriodicProfile(self.grid, np.roll(self.values[::-1], 1))

    def inner(self, other):
        return self.grid.inner(self.spectrum, other.spectrum)

    def __add__(self, other):
        return PeriodicProfile(self.grid, self.values + other.values)

    def __sub__(self, other):
        return PeriodicProfile(self.grid, self.values - other.values)

    def __mul__(self, a):
        return PeriodicProfile(self.grid, a * self.values)

    __rmul__ = __mul__

    def __neg__(self):
        return PeriodicProfile(self.grid, -self.values)

    def admissibility(self, depth_floor, ball_radius):
        """Return ``(ok, 1 + min eta, ||eta||_2)`` for membership in the admissible set."""
        depth = 1.0 + float(self.values.min())
        h2 = sobolev_norm(self, 2)
        return depth > depth_floor and h2 < ball_radius, depth, h2


@dataclass(frozen=True, eq=False)
class ComplexProfile:
    """Complex samples on a grid, e.g. a positive-band component or an envelope."""

    grid: Grid
    values: np.ndarray = field(repr=False)
    support: tuple | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @cached_property
    def coeffs(self):
        return sfft.fft(self.values, norm="ortho")


# -- public operations -----------------------------------------------------------


def transform(p):
    """Unitary DFT of the samples; Parseval holds exactly."""
    return sfft.fft(p.values, norm="ortho")


def inverse_transform(grid, coeffs):
    v = sfft.ifft(coeffs, norm="ortho")
    if np.max(np.abs(v.imag)) <= 1e-12 * max(1.0, np.max(np.abs(v.real))):
        return PeriodicProfile(grid, v.real)
    return ComplexProfile(grid, v)


def apply_multiplier(p, symbol):
    """Multiply the spectrum of ``p`` by ``symbol(k)`` evaluated at signed grid wavenumbers.

    Returns a ``PeriodicProfile`` when the result is real, else a ``ComplexProfile``.
    """
    with np.errstate(all="ignore"):
        s = np.asarray(symbol(p.grid.k), dtype=complex)
    if s.shape != p.grid.k.shape:
        s = np.broadcast_to(s, p.grid.k.shape)
    if not np.all(np.isfinite(s)):
        bad = p.grid.k[~np.isfinite(s)]
        raise DomainError(f"symbol is not finite at k = {bad[:5]}")
    out = sfft.ifft(s * sfft.fft(p.values))
    if isinstance(p, PeriodicProfile):
        scale = max(1.0, float(np.max(np.abs(out.real))))
        if np.max(np.abs(out.imag)) <= 1e-12 * scale:
            return PeriodicProfile(p.grid, out.real)
    return ComplexProfile(p.grid, out)


def _band_mask(k, k0, delta0):
    return np.abs(np.abs(k) - k0) <= delta0


def _check_delta0(ctx, delta0):
    delta0 = ctx.k0 / 4.0 if delta0 is None else delta0
    if not 0.0 < delta0 < ctx.k0 / 3.0:
        raise DomainError(f"delta0 must lie in (0, k0/3) = (0, {ctx.k0 / 3:.6g}), got {delta0}")
    return delta0


def split_eta1(p, ctx, delta0=None):
    """Split ``p`` into the part with spectrum in ``S = {||k| - k0| <= delta0}`` and the rest."""
    delta0 = _check_delta0(ctx, delta0)
    c = np.array(p.spectrum)
    mask = _band_mask(p.grid.kr, ctx.k0, delta0)
    c1 = np.where(mask, c, 0.0)
    c2 = c - c1
    return PeriodicProfile.from_spectrum(p.grid, c1), PeriodicProfile.from_spectrum(p.grid, c2)


def positive_band(p, ctx, delta0=None):
    """``F^{-1}[chi_[k0-delta0, k0+delta0] F p]`` as complex samples."""
    delta0 = _check_delta0(ctx, delta0)
    k = p.grid.k
    mask = (k >= ctx.k0 - delta0) & (k <= ctx.k0 + delta0)
    if not mask.any():
        raise ResolutionError(
            f"no grid wavenumber in [{ctx.k0 - delta0:.4g}, {ctx.k0 + delta0:.4g}]"
        )
    c = sfft.fft(p.values)
    return ComplexProfile(p.grid, sfft.ifft(np.where(mask, c, 0.0)), support=(ctx.k0 - delta0, ctx.k0 + delta0))


def demodulate_zeta(p, mu, ctx, delta0=None):
    """Envelope ``zeta(X) = (2 / mu) eta1+(X / mu) exp(-i k0 X / mu)`` on the slow grid ``X = mu x``."""
    if not mu > 0:
        raise DomainError(f"mu must be positive, got {mu}")
    plus = positive_band(p, ctx, delta0)
    x = p.grid.x
    zeta = (2.0 / mu) * plus.values * np.exp(-1j * ctx.k0 * x)
    slow = Grid(mu * p.grid.half_length, p.grid.n_points)
    return ComplexProfile(slow, zeta, support=plus.support)


class Norms(NamedTuple):
    h0: float
    h1: float
    h2: float
    w1inf: float
    triple_alpha: float


def sobolev_norm(p, s):
    """``(int (1 + k^2)^s |eta_hat|^2 dk)^(1/2)`` for real or complex profiles."""
    c = sfft.fft(p.values, norm="forward")
    k = p.grid.k
    return math.sqrt(p.grid.length * float(np.sum((1.0 + k * k) ** s * np.abs(c) ** 2)))


def triple_norm(p, alpha, mu, k0):
    """Scaled norm penalising spectral distance from ``+-k0`` at rate ``mu^(-4 alpha)``."""
    c = sfft.fft(p.values, norm="forward")
    k = p.grid.k
    w = 1.0 + mu ** (-4.0 * alpha) * (np.abs(k) - k0) ** 4
    return math.sqrt(p.grid.length * float(np.sum(w * np.abs(c) ** 2)))


def norms(p, alpha=1.0, mu=1.0, k0=1.0):
    """Sobolev norms, the ``W^{1,inf}`` norm and the scaled norm of ``p``."""
    c = np.array(p.spectrum)
    if p.grid.n_points % 2 == 0:
        c[-1] = 0.0
    dv = p.grid.inverse(p.grid.deriv(c))
    w1inf = max(float(np.max(np.abs(p.values))), float(np.max(np.abs(dv))))
    return Norms(
        sobolev_norm(p, 0),
        sobolev_norm(p, 1),
        sobolev_norm(p, 2),
        w1inf,
        triple_norm(p, alpha, mu, k0),
    )


# -- serialisation -----------------------------------------------------------------


def write_profile_csv(p, path, header_lines=()):
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "eta"])
        for xi, vi in zip(p.grid.x, p.values):
            w.writerow([repr(float(xi)), repr(float(vi))])


def read_profile_csv(path):
    xs, vs = [], []
    with open(path, encoding="utf-8") as fh:
        rows = csv.reader(line for line in fh if not line.startswith("#"))
        head = next(rows)
        if head != ["x", "eta"]:
            raise DomainError(f"{path}: expected columns x,eta, got {head}")
        for row in rows:
            xs.append(float(row[0]))
            vs.append(float(row[1]))
    xs = np.array(xs)
    n = len(xs)
    dx = xs[1] - xs[0]
    grid = Grid(n * dx / 2.0, n)
    if abs(xs[0] + grid.half_length) > 1e-9 * grid.half_length:
        raise DomainError(f"{path}: grid does not start at -half_length")
    return PeriodicProfile(grid, np.array(vs))


def write_spectrum_csv(p, path, header_lines=()):
    c = p.coeffs
    order = np.argsort(p.grid.k, kind="stable")
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "re", "im"])
        for i in order:
            w.writerow([repr(float(p.grid.k[i])), repr(float(c[i].real)), repr(float(c[i].imag))])
