"""Periodic grids, discrete fractional operators and peak-weighted norms.

The whole library discretizes R^N by the periodic box [-L, L)^N with M points
per axis.  The fractional Laplacian is the Fourier multiplier |k|^{2s}; a
direct principal-value quadrature for closed-form functions is provided as an
independent cross-check.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft
from scipy.special import gamma, roots_jacobi, roots_legendre

from .errors import ConfigError, GridMismatch, OddPointCount, TailDominates

Array = np.ndarray


def fft_workers() -> int:
    """Thread count for FFTs, capped by PEAKFORGE_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("PEAKFORGE_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# grids and fields


@dataclass(frozen=True, eq=False)
class Grid:
    dim: int
    half_length: float
    points_per_dim: int

    @property
    def h(self) -> float:
        return 2.0 * self.half_length / self.points_per_dim

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_dim,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_dim**self.dim

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @cached_property
    def axis(self) -> Array:
        """Node coordinates along one axis, starting at -L."""
        return -self.half_length + self.h * np.arange(self.points_per_dim)

    @cached_property
    def wavenumbers(self) -> Array:
        """Angular wavenumbers 2*pi*m/(2L) in FFT order; index 0 is exactly 0."""
        return 2.0 * np.pi * sfft.fftfreq(self.points_per_dim, d=self.h)

    @cached_property
    def rwavenumbers(self) -> Array:
        return 2.0 * np.pi * sfft.rfftfreq(self.points_per_dim, d=self.h)

    @cached_property
    def points(self) -> Array:
        """Array of shape ``shape + (dim,)`` with node coordinates."""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def kabs_r(self) -> Array:
        """|k| on the half spectrum used by rfftn (last axis halved)."""
        ks = [self.wavenumbers] * (self.dim - 1) + [self.rwavenumbers]
        mesh = np.meshgrid(*ks, indexing="ij")
        return np.sqrt(sum(m * m for m in mesh))

    def kcomp_r(self, axis: int) -> Array:
        """Component k_axis on the rfftn half spectrum, Nyquist set to 0."""
        ks = [self.wavenumbers] * (self.dim - 1) + [self.rwavenumbers]
        ks = [k.copy() for k in ks]
        kk = ks[axis].copy()
        kk[self.points_per_dim // 2] = 0.0
        ks = [np.ones_like(k) for k in ks]
        ks[axis] = kk
        mesh = np.meshgrid(*ks, indexing="ij")
        return np.prod(mesh, axis=0)

    def same_as(self, other: "Grid") -> bool:
        return (self.dim, self.half_length, self.points_per_dim) == (
            other.dim,
            other.half_length,
            other.points_per_dim,
        )

    def inner_box_mask(self, fraction: float = 0.5) -> Array:
        """Nodes whose every coordinate satisfies |x_i| <= fraction * L."""
        inside = np.abs(self.axis) <= fraction * self.half_length + 1e-12
        mask = inside
        for _ in range(self.dim - 1):
            mask = np.multiply.outer(mask, inside)
        return mask

    def contains_ball(self, center: Sequence[float], radius: float) -> bool:
        c = np.asarray(center, dtype=float)
        L = self.half_length
        return bool(np.all(c - radius >= -L) and np.all(c + radius <= L - self.h))

    def to_dict(self) -> dict:
        return {"dim": self.dim, "L": self.half_length, "M": self.points_per_dim}


def make_grid(dim: int, half_length: float, points_per_dim: int) -> Grid:
    if dim not in (1, 2, 3):
        raise ConfigError(f"dim must be 1, 2 or 3, got {dim}")
    if not half_length > 0:
        raise ConfigError(f"half_length must be positive, got {half_length}")
    if points_per_dim % 2:
        raise OddPointCount(f"points_per_dim must be even, got {points_per_dim}")
    if points_per_dim < 16:
        raise ConfigError("points_per_dim must be at least 16")
    return Grid(int(dim), float(half_length), int(points_per_dim))


@dataclass(eq=False)
class Field:
    grid: Grid
    values: Array

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.size != self.grid.size:
            raise GridMismatch(f"{v.size} values for a grid of {self.grid.size} points")
        v = v.reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ConfigError("field values must be finite")
        self.values = v

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[Array], Array]) -> "Field":
        return cls(grid, fn(grid.points))

    @classmethod
    def zeros(cls, grid: Grid) -> "Field":
        return cls(grid, np.zeros(grid.shape))

    @property
    def flat(self) -> Array:
        return self.values.reshape(-1)

    def _other(self, other):
        if isinstance(other, Field):
            if not self.grid.same_as(other.grid):
                raise GridMismatch("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.values)

    def mean(self) -> float:
        return float(self.values.mean())


# ---------------------------------------------------------------------------
# exponent bookkeeping


@dataclass(frozen=True)
class FracOrder:
    """Exponent data: s, the critical power p_s, the perturbation eps and sigma."""

    dim: int
    s: float
    eps: float = 0.0
    sigma: float | None = None

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ConfigError(f"s must lie in (0, 1), got {self.s}")
        if self.dim <= 2 * self.s:
            raise ConfigError("need N > 2s")
        if self.eps < 0:
            raise ConfigError("eps must be nonnegative")
        if self.sigma is None:
            object.__setattr__(self, "sigma", default_sigma(self.dim, self.s))
        elif not self.sigma > 0:
            raise ConfigError("sigma must be positive")

    @property
    def p(self) -> float:
        return (self.dim + 2 * self.s) / (self.dim - 2 * self.s)

    @property
    def q(self) -> float:
        """Actual nonlinear power p_s - eps."""
        return self.p - self.eps

    def with_eps(self, eps: float) -> "FracOrder":
        return FracOrder(self.dim, self.s, eps, self.sigma)

    def require_reduction(self) -> None:
        if self.dim <= 4 * self.s:
            raise ConfigError(f"reduction needs N > 4s (N={self.dim}, s={self.s})")
        if self.q <= 1:
            raise ConfigError("need p_s - eps > 1")
        upper = min(self.s / 2, (self.dim - 4 * self.s) / 2)
        if not self.sigma < upper:
            raise ConfigError(f"sigma must lie in (0, {upper})")


def default_sigma(dim: int, s: float) -> float:
    """Midpoint of the admissible sigma interval, or min(s/2, 0.05) if empty."""
    if dim > 4 * s:
        return 0.5 * min(s / 2, (dim - 4 * s) / 2)
    return min(s / 2, 0.05)


@dataclass(frozen=True)
class PeakConfig:
    """Peak parameters (lambda_i, xi_i), cutoff radius delta, exponent data."""

    peaks: tuple[tuple[float, tuple[float, ...]], ...]
    delta: float
    order: FracOrder

    def __post_init__(self):
        peaks = tuple((float(lam), tuple(float(c) for c in np.atleast_1d(xi))) for lam, xi in self.peaks)
        object.__setattr__(self, "peaks", peaks)
        if not peaks:
            raise ConfigError("need at least one peak")
        for lam, xi in peaks:
            if not lam > 0:
                raise ConfigError("lambda must be positive")
            if len(xi) != self.order.dim:
                raise ConfigError("peak center has the wrong dimension")
        if not self.delta > 0:
            raise ConfigError("delta must be positive")

    @property
    def k(self) -> int:
        return len(self.peaks)

    @property
    def lambdas(self) -> Array:
        return np.array([lam for lam, _ in self.peaks])

    @property
    def centers(self) -> Array:
        return np.array([xi for _, xi in self.peaks])

    def min_distance(self) -> float:
        c = self.centers
        if len(c) < 2:
            return np.inf
        d = np.linalg.norm(c[:, None, :] - c[None, :, :], axis=-1)
        return float(d[np.triu_indices(len(c), 1)].min())

    def validate(self, grid: Grid | None = None) -> None:
        if self.k >= 2 and self.delta > self.min_distance() / 10 + 1e-12:
            raise ConfigError("delta must not exceed d/10 for k >= 2")
        if grid is not None:
            if grid.dim != self.order.dim:
                raise GridMismatch("grid and peak dimension differ")
            for xi in self.centers:
                if not grid.contains_ball(xi, 2 * self.delta):
                    raise ConfigError("cutoff ball B_{2 delta} leaves the grid box")

    def replace(self, lambdas=None, centers=None, order=None) -> "PeakConfig":
        lam = self.lambdas if lambdas is None else np.asarray(lambdas, float)
        cen = self.centers if centers is None else np.asarray(centers, float).reshape(self.k, -1)
        peaks = tuple((float(a), tuple(b)) for a, b in zip(lam, cen))
        return PeakConfig(peaks, self.delta, self.order if order is None else order)

    def to_dict(self) -> dict:
        return {
            "lambdas": self.lambdas.tolist(),
            "centers": self.centers.tolist(),
            "delta": self.delta,
            "s": self.order.s,
            "eps": self.order.eps,
            "sigma": self.order.sigma,
        }


# ---------------------------------------------------------------------------
# spectral operators


def apply_multiplier(values: Array, grid: Grid, mult: Array) -> Array:
    """Multiply the rfftn coefficients of ``values`` by ``mult`` and return to space."""
    w = fft_workers()
    coeff = sfft.rfftn(values, workers=w)
    return sfft.irfftn(coeff * mult, s=grid.shape, workers=w)


def frac_multiplier(grid: Grid, s: float) -> Array:
    return grid.kabs_r ** (2.0 * s)


def _frac_lap(values: Array, grid: Grid, s: float) -> Array:
    return apply_multiplier(values, grid, frac_multiplier(grid, s))


def frac_laplacian_spectral(f: Field, s: float) -> Field:
    """(-Delta)^s as the multiplier |k|^{2s}; the zero mode maps to 0."""
    if not 0.0 < s < 2.0:
        raise ConfigError("s out of range")
    return Field(f.grid, _frac_lap(f.values, f.grid, s))


def green_apply(h: Field, s: float) -> Field:
    """Discrete (-Delta)^{-s}: divide by |k|^{2s} with the zero mode gauged to 0."""
    mult = frac_multiplier(h.grid, s)
    inv = np.zeros_like(mult)
    nz = mult > 0
    inv[nz] = 1.0 / mult[nz]
    return Field(h.grid, apply_multiplier(h.values, h.grid, inv))


def inner_product_l2(f: Field, g: Field) -> float:
    if not f.grid.same_as(g.grid):
        raise GridMismatch("inner product of fields on different grids")
    return float(f.grid.cell_volume * np.sum(f.values * g.values))


# ---------------------------------------------------------------------------
# trigonometric interpolation at arbitrary points


def _phase_matrix(grid: Grid, coords: Array) -> Array:
    """exp(i k (x - x0)) for every coordinate and every full-spectrum index.

    The Nyquist column uses cos so the interpolant is real.
    """
    k = grid.wavenumbers
    d = coords[:, None] - grid.axis[0]
    ph = np.exp(1j * d * k[None, :])
    ny = grid.points_per_dim // 2
    ph[:, ny] = np.cos(d[:, 0] * k[ny])
    return ph


def spectral_coefficients(values: Array, grid: Grid) -> Array:
    return sfft.fftn(values, workers=fft_workers()) / grid.size


def interpolate_coefficients(coeff: Array, grid: Grid, points: Array, chunk: int = 2048) -> Array:
    """Evaluate the trigonometric series with full-spectrum ``coeff`` at ``points``."""
    pts = np.asarray(points, dtype=float).reshape(-1, grid.dim)
    out = np.empty(len(pts), dtype=complex)
    for a in range(0, len(pts), chunk):
        p = pts[a : a + chunk]
        if grid.dim == 1:
            out[a : a + chunk] = _phase_matrix(grid, p[:, 0]) @ coeff
        elif grid.dim == 2:
            e1 = _phase_matrix(grid, p[:, 0])
            e2 = _phase_matrix(grid, p[:, 1])
            out[a : a + chunk] = np.einsum("pi,pi->p", e1, e2 @ coeff.T)
        else:
            e1 = _phase_matrix(grid, p[:, 0])
            e2 = _phase_matrix(grid, p[:, 1])
            e3 = _phase_matrix(grid, p[:, 2])
            t = np.einsum("ijk,pk->pij", coeff, e3)
            t = np.einsum("pij,pj->pi", t, e2)
            out[a : a + chunk] = np.einsum("pi,pi->p", t, e1)
    return out.real


def spectral_interpolate(f: Field, points: Array) -> Array:
    """Values of the trigonometric interpolant of ``f`` at arbitrary points."""
    pts = np.asarray(points, dtype=float)
    shape = pts.shape[:-1] if pts.ndim > 1 else (pts.size // f.grid.dim,)
    coeff = spectral_coefficients(f.values, f.grid)
    return interpolate_coefficients(coeff, f.grid, pts).reshape(shape)


# ---------------------------------------------------------------------------
# direct principal-value quadrature


def frac_constant(dim: int, s: float) -> float:
    """c(N,s) making the PV singular integral equal the |k|^{2s} multiplier."""
    return 4.0**s * gamma(dim / 2 + s) / (np.pi ** (dim / 2) * abs(gamma(-s)))


def sphere_measure(dim: int) -> float:
    """Surface measure of the unit sphere S^{dim-1} in R^dim."""
    return 2.0 * np.pi ** (dim / 2) / gamma(dim / 2)


def sphere_rule(dim: int, n: int = 16) -> tuple[Array, Array]:
    """Directions and weights integrating over S^{dim-1} (weights sum to its measure)."""
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        phi = 2 * np.pi * (np.arange(n) + 0.5) / n
        return np.stack([np.cos(phi), np.sin(phi)], -1), np.full(n, 2 * np.pi / n)
    if dim == 3:
        c, wc = roots_legendre(max(n // 2, 2))
        phi = 2 * np.pi * (np.arange(n) + 0.5) / n
        C, P = np.meshgrid(c, phi, indexing="ij")
        S = np.sqrt(1 - C**2)
        dirs = np.stack([S * np.cos(P), S * np.sin(P), C], -1).reshape(-1, 3)
        w = np.multiply.outer(wc, np.full(n, 2 * np.pi / n)).reshape(-1)
        return dirs, w
    raise ConfigError("sphere rules exist for dim <= 3")


@dataclass(frozen=True)
class QuadSpec:
    """Radii and node counts for the principal-value quadrature."""

    r0: float = 0.05
    r_inf: float = 1.0e4
    n_inner: int = 24
    n_per_panel: int = 32
    panels_per_decade: int = 2
    n_angle: int = 16


def frac_laplacian_pv(
    fn: Callable[[Array], Array],
    x: Sequence[float],
    s: float,
    quad: QuadSpec | None = None,
    tail: str = "decay",
) -> float:
    """(-Delta)^s fn(x) from the singular-integral definition.

    ``fn`` maps an array of points (..., N) to values.  The integral is split
    into a symmetrized inner part on B_{r0}, log-spaced Gauss panels up to
    R_inf, and a tail beyond R_inf.  The f(x) part of the tail is exact; the
    part involving fn(x+z) assumes |fn| ~ |z|^{-(N-2s)} (``tail="decay"``) or
    fn constant at infinity (``tail="constant"``).
    """
    quad = quad or QuadSpec()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dim = x.size
    dirs, wdir = sphere_rule(dim, quad.n_angle)
    fx = float(np.asarray(fn(x[None, :])).reshape(-1)[0])
    omega = wdir.sum()

    def g(r: Array) -> Array:
        # symmetrized spherical mean of f(x) - f(x+z), z = r*theta
        pts_p = x + r[:, None, None] * dirs[None, :, :]
        pts_m = x - r[:, None, None] * dirs[None, :, :]
        vp = np.asarray(fn(pts_p)).reshape(len(r), -1)
        vm = np.asarray(fn(pts_m)).reshape(len(r), -1)
        return (omega * fx - 0.5 * (vp + vm) @ wdir)

    # inner ball: g(r) = O(r^2); weight r^{1-2s} handled by Gauss-Jacobi
    xj, wj = roots_jacobi(quad.n_inner, 0.0, 1.0 - 2 * s)
    r = 0.5 * quad.r0 * (1 + xj)
    w = wj * (0.5 * quad.r0) ** (2 - 2 * s)
    inner = np.sum(w * g(r) / r**2)

    # log-spaced panels between r0 and R_inf
    decades = np.log10(quad.r_inf / quad.r0)
    npan = max(1, int(np.ceil(decades * quad.panels_per_decade)))
    edges = quad.r0 * (quad.r_inf / quad.r0) ** (np.arange(npan + 1) / npan)
    xl, wl = roots_legendre(quad.n_per_panel)
    mid = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        rr = 0.5 * (b - a) * xl + 0.5 * (b + a)
        mid += np.sum(0.5 * (b - a) * wl * g(rr) * rr ** (-1 - 2 * s))

    R = quad.r_inf
    tail_exact = omega * fx * R ** (-2 * s) / (2 * s)
    pts_R = np.concatenate([x + R * dirs, x - R * dirs])
    mean_R = 0.5 * float(np.asarray(fn(pts_R)).reshape(-1) @ np.concatenate([wdir, wdir]))
    if tail == "constant":
        tail_est = -mean_R * R ** (-2 * s) / (2 * s)
    else:
        tail_est = -mean_R * R ** (-2 * s) / dim
    total = frac_constant(dim, s) * (inner + mid + tail_exact + tail_est)
    est = frac_constant(dim, s) * abs(tail_est + (tail_exact if tail == "constant" else 0.0))
    if tail == "decay" and est > 0.1 * abs(total):
        raise TailDominates(f"tail estimate {est:.3e} exceeds 10% of {total:.3e}")
    return float(total)


# ---------------------------------------------------------------------------
# peak-weighted norms


def peak_weight(points: Array, cfg: PeakConfig, kind: str = "star") -> Array:
    """Sum over peaks of lambda^{a} / (1 + lambda |x - xi|)^{a + sigma}."""
    N, s, sig = cfg.order.dim, cfg.order.s, cfg.order.sigma
    if kind == "star":
        a = (N - 2 * s) / 2
    elif kind == "star_star":
        a = (N + 2 * s) / 2
    else:
        raise ConfigError(f"unknown norm kind {kind!r}")
    pts = np.asarray(points, dtype=float)
    total = np.zeros(pts.shape[:-1])
    for lam, xi in cfg.peaks:
        r = np.linalg.norm(pts - np.asarray(xi), axis=-1)
        total += lam**a / (1 + lam * r) ** (a + sig)
    return total


def weighted_sup_norm(f: Field, cfg: PeakConfig, kind: str = "star") -> float:
    """sup |f| / sum_j weight_j over the grid nodes."""
    wgt = peak_weight(f.grid.points, cfg, kind)
    return float(np.max(np.abs(f.values) / wgt))


def mean_gauge_warning(h: Field) -> bool:
    """True when the zero-mode gauge of green_apply discards a visible mean."""
    vol = (2 * h.grid.half_length) ** h.grid.dim
    norm = np.sqrt(inner_product_l2(h, h))
    return bool(abs(h.mean()) * vol > 1e-6 * max(norm, 1e-300))


__all__ = [
    "Grid",
    "Field",
    "FracOrder",
    "PeakConfig",
    "QuadSpec",
    "make_grid",
    "frac_laplacian_spectral",
    "frac_laplacian_pv",
    "green_apply",
    "weighted_sup_norm",
    "inner_product_l2",
    "spectral_interpolate",
    "frac_constant",
    "sphere_rule",
    "sphere_measure",
    "peak_weight",
    "default_sigma",
    "fft_workers",
]
