"""s-harmonic extension to the upper half-space and half-sphere quadrature.

For a grid Field the extension is applied through its Fourier multiplier

    theta(r) = 2^{1-s} / Gamma(s) * r^s K_s(r),   r = |k| t,

which is the Fourier transform of the Poisson kernel P_s(., t).  This gives
the exact extension of the trigonometric interpolant at every height t.
Closed-form inputs in one dimension are extended by adaptive quadrature of
the kernel; a closed form may also carry its own exact extension.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.special import gamma, kve, roots_legendre

from .errors import ConfigError, ExtrapolationUnstable, KernelUnderresolved, NonConvergent
from .field_ops import (
    Field,
    Grid,
    frac_laplacian_spectral,
    interpolate_coefficients,
    spectral_coefficients,
    sphere_measure,
    sphere_rule,
    spectral_interpolate,
)

Array = np.ndarray


# ---------------------------------------------------------------------------
# kernel constants


def normalization_d(N: int, s: float) -> float:
    """d_{N,s} such that the Poisson kernel has unit mass, by radial quadrature.

    With r = tan(theta) the mass integral becomes
    |S^{N-1}| * int_0^{pi/2} sin^{N-1}(theta) cos^{2s-1}(theta) d theta.
    """
    if not 0 < s < 1:
        raise ConfigError("s must lie in (0, 1)")
    # the cos^{2s-1} endpoint factor is handled by the algebraic weight
    def smooth(th):
        c = np.cos(th)
        rest = np.pi / 2 - th
        ratio = c / rest if rest > 1e-300 else 1.0
        return np.sin(th) ** (N - 1) * ratio ** (2 * s - 1)

    val, err = integrate.quad(smooth, 0.0, np.pi / 2, weight="alg", wvar=(0.0, 2 * s - 1), epsabs=0, epsrel=1e-13, limit=200)
    if not err <= 1e-10 * abs(val):
        raise NonConvergent(f"kernel mass quadrature error {err:.2e}")
    return float(1.0 / (sphere_measure(N) * val))


def normalization_d_closed(N: int, s: float) -> float:
    """Closed form Gamma((N+2s)/2) / (pi^{N/2} Gamma(s)), used as a cross-check."""
    return float(gamma((N + 2 * s) / 2) / (np.pi ** (N / 2) * gamma(s)))


def kappa_s(s: float) -> float:
    """Dirichlet-to-Neumann factor of the unit-mass kernel.

    -lim t^{1-2s} d_t u~ = kappa_s (-Delta)^s u, with kappa_s = 2^{1-2s} Gamma(1-s)/Gamma(s).
    """
    return float(2.0 ** (1 - 2 * s) * gamma(1 - s) / gamma(s))


def poisson_kernel(x: Array, t, s: float, N: int | None = None) -> Array:
    x = np.asarray(x, dtype=float)
    if N is None:
        N = x.shape[-1] if x.ndim else 1
    r2 = np.sum(x * x, axis=-1) if x.ndim and x.shape[-1] == N else x * x
    t = np.asarray(t, dtype=float)
    return normalization_d_closed(N, s) * t ** (2 * s) / (r2 + t * t) ** ((N + 2 * s) / 2)


def theta_multiplier(r: Array, s: float) -> Array:
    """Fourier multiplier of the Poisson kernel, theta(0) = 1, decreasing."""
    r = np.asarray(r, dtype=float)
    out = np.ones_like(r)
    pos = r > 0
    rp = r[pos]
    out[pos] = 2.0 ** (1 - s) / gamma(s) * rp**s * kve(s, rp) * np.exp(-rp)
    return out


def theta_derivative(r: Array, s: float) -> Array:
    """d theta / dr = -2^{1-s}/Gamma(s) r^s K_{1-s}(r); behaves like r^{2s-1} at 0."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    pos = r > 0
    rp = r[pos]
    out[pos] = -(2.0 ** (1 - s)) / gamma(s) * rp**s * kve(1 - s, rp) * np.exp(-rp)
    return out


# ---------------------------------------------------------------------------
# sources: things that can be evaluated on R^N and extended to the half-space


@dataclass(frozen=True)
class HalfSpacePoint:
    x: tuple[float, ...]
    t: float

    def __post_init__(self):
        if not self.t > 0:
            raise ConfigError("half-space point needs t > 0")
        object.__setattr__(self, "x", tuple(float(c) for c in np.atleast_1d(self.x)))


class FieldExtension:
    """Evaluates a grid Field, its gradient, and its extension at arbitrary points."""

    def __init__(self, field: Field, s: float, allow_subgrid: bool = False):
        self.field = field
        self.grid = field.grid
        self.s = s
        self.dim = field.grid.dim
        self.allow_subgrid = allow_subgrid
        self.coeff = spectral_coefficients(field.values, field.grid)
        g = self.grid
        k = g.wavenumbers.copy()
        k[g.points_per_dim // 2] = 0.0  # no derivative of the Nyquist mode
        mesh = np.meshgrid(*([k] * self.dim), indexing="ij")
        self.kvec = mesh
        full = np.meshgrid(*([g.wavenumbers] * self.dim), indexing="ij")
        self.kabs = np.sqrt(sum(m * m for m in full))

    def values(self, points: Array) -> Array:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        return interpolate_coefficients(self.coeff, self.grid, pts)

    def gradient(self, points: Array) -> Array:
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        cols = [interpolate_coefficients(self.coeff * 1j * kk, self.grid, pts) for kk in self.kvec]
        return np.stack(cols, axis=-1)

    def extension(self, x: Array, t: Array, gradient: bool = True):
        """Values (n,) and, optionally, gradients (n, N+1) of the extension."""
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        t = np.broadcast_to(np.asarray(t, dtype=float), (len(x),))
        if not self.allow_subgrid and np.any(t < 2 * self.grid.h):
            raise KernelUnderresolved(f"t = {t.min():.3g} below 2h = {2 * self.grid.h:.3g}")
        val = np.empty(len(x))
        grad = np.empty((len(x), self.dim + 1)) if gradient else None
        levels, inverse = np.unique(t, return_inverse=True)
        for j, tj in enumerate(levels):
            sel = np.nonzero(inverse == j)[0]
            r = self.kabs * tj
            c = self.coeff * theta_multiplier(r, self.s)
            val[sel] = interpolate_coefficients(c, self.grid, x[sel])
            if gradient:
                for a, kk in enumerate(self.kvec):
                    grad[sel, a] = interpolate_coefficients(c * 1j * kk, self.grid, x[sel])
                ct = self.coeff * self.kabs * theta_derivative(r, self.s)
                grad[sel, self.dim] = interpolate_coefficients(ct, self.grid, x[sel])
        return (val, grad) if gradient else val


class ClosedForm:
    """A function on R^N given by formulas for its value and gradient.

    ``extension`` may be supplied as a callable (x, t) -> (value, gradient);
    otherwise the extension is computed by quadrature (one dimension only).
    """

    def __init__(
        self,
        dim: int,
        s: float,
        value: Callable[[Array], Array],
        grad: Callable[[Array], Array],
        extension: Callable | None = None,
        frac_lap: Callable[[Array], Array] | None = None,
    ):
        self.dim = dim
        self.s = s
        self._value = value
        self._grad = grad
        self._ext = extension
        self.frac_lap = frac_lap

    def values(self, points: Array) -> Array:
        return np.asarray(self._value(np.asarray(points, float).reshape(-1, self.dim)), float).reshape(-1)

    def gradient(self, points: Array) -> Array:
        g = np.asarray(self._grad(np.asarray(points, float).reshape(-1, self.dim)), float)
        return g.reshape(-1, self.dim)

    def extension(self, x: Array, t: Array, gradient: bool = True):
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        t = np.broadcast_to(np.asarray(t, dtype=float), (len(x),))
        if self._ext is not None:
            val, grad = self._ext(x, t)
            return (np.asarray(val), np.asarray(grad)) if gradient else np.asarray(val)
        if self.dim != 1:
            raise ConfigError("quadrature extension of closed forms is one-dimensional; sample to a Field")
        val, gx, gt = self._extend_1d(x[:, 0], np.asarray(t, dtype=float), gradient)
        return (val, np.stack([gx, gt], axis=-1)) if gradient else val

    def _extend_1d(self, x: Array, t: Array, gradient: bool):
        """Kernel quadrature for all (x_n, t_n) at once.

        z = x - t tan(phi) turns the kernel into d cos^{2s-1}(phi) d phi; on each
        half the substitution pi/2 - |phi| = sigma^{1/(2s)} absorbs the endpoint
        singularity, cos^{2s-1}(phi) d phi = ratio^{2s-1} d sigma / (2s).
        """
        s = self.s
        d = normalization_d_closed(1, s)
        n = len(x)
        top = (np.pi / 2) ** (2 * s)
        width = 3 * n if gradient else n

        def integrand(sig, sign):
            tau = sig ** (1.0 / (2 * s))
            if tau <= 0:
                return np.zeros(width)
            ratio = np.sin(tau) / tau
            jac = ratio ** (2 * s - 1) / (2 * s)
            tan = sign / np.tan(tau)
            z = (x - t * tan)[:, None]
            v = np.asarray(self._value(z), dtype=float).reshape(-1)
            if not gradient:
                return jac * v
            fp = np.asarray(self._grad(z), dtype=float).reshape(-1)
            return jac * np.concatenate([v, fp, -tan * fp])

        total = np.zeros(width)
        for sign in (1.0, -1.0):
            res, _ = integrate.quad_vec(
                lambda sg: integrand(sg, sign), 0.0, top, epsabs=1e-15, epsrel=1e-12, norm="max", limit=4000
            )
            total += res
        total *= d
        if not gradient:
            return total, None, None
        return total[:n], total[n : 2 * n], total[2 * n :]


def as_source(u, s: float, allow_subgrid: bool = False):
    if isinstance(u, Field):
        return FieldExtension(u, s, allow_subgrid=allow_subgrid)
    if isinstance(u, (FieldExtension, ClosedForm)):
        return u
    raise ConfigError(f"cannot extend object of type {type(u).__name__}")


def _split(X):
    if isinstance(X, HalfSpacePoint):
        return np.array([X.x]), np.array([X.t])
    x, t = X
    return np.atleast_2d(np.asarray(x, float)), np.atleast_1d(np.asarray(t, float))


def extend(u, X, s: float, allow_subgrid: bool = False) -> Array:
    """Extension value at a HalfSpacePoint or at arrays (x (n,N), t (n,))."""
    x, t = _split(X)
    src = as_source(u, s, allow_subgrid)
    out = src.extension(x, t, gradient=False)
    return out[0] if isinstance(X, HalfSpacePoint) else out


def extension_gradient(u, X, s: float, allow_subgrid: bool = False) -> Array:
    """(N+1)-gradient (x-components then t) of the extension."""
    x, t = _split(X)
    src = as_source(u, s, allow_subgrid)
    out = src.extension(x, t, gradient=True)[1]
    return out[0] if isinstance(X, HalfSpacePoint) else out


def extend_direct(u: Field, x: Sequence[float], t: float, s: float) -> float:
    """Extension by direct kernel quadrature on the grid (no periodic images)."""
    g = u.grid
    if t < 2 * g.h:
        raise KernelUnderresolved(f"t = {t:.3g} below 2h = {2 * g.h:.3g}")
    diff = g.points - np.asarray(x, dtype=float)
    return float(g.cell_volume * np.sum(poisson_kernel(diff, t, s, g.dim) * u.values))


# ---------------------------------------------------------------------------
# Dirichlet-to-Neumann check


def richardson(values: Sequence[float], exponents: Sequence[float], ratio: float = 2.0) -> tuple[float, list[float]]:
    """Eliminate t^e error terms from values at t0, t0/ratio, ...; returns the
    final extrapolant and the diagonal of the tableau."""
    row = list(map(float, values))
    diag = [row[-1]]
    for e in exponents[: len(row) - 1]:
        f = ratio**e
        row = [(f * b - a) / (f - 1) for a, b in zip(row[:-1], row[1:])]
        diag.append(row[-1])
    return diag[-1], diag


def dtn_values(u, x: Sequence[float], s: float, t_seq: Sequence[float], allow_subgrid: bool = False) -> Array:
    """-kappa_s^{-1} t^{1-2s} d_t u~(x, t) at each t."""
    src = as_source(u, s, allow_subgrid)
    t_seq = np.asarray(t_seq, dtype=float)
    xs = np.repeat(np.atleast_2d(np.asarray(x, float)), len(t_seq), axis=0)
    _, grad = src.extension(xs, t_seq, gradient=True)
    return -(t_seq ** (1 - 2 * s)) * grad[:, -1] / kappa_s(s)


def dtn_limit(u, x: Sequence[float], s: float, t_seq: Sequence[float], allow_subgrid: bool = False) -> float:
    t_seq = np.asarray(t_seq, dtype=float)
    if np.any(np.diff(t_seq) >= 0):
        raise ConfigError("t_seq must be strictly decreasing")
    ratios = t_seq[:-1] / t_seq[1:]
    if not np.allclose(ratios, ratios[0]):
        raise ConfigError("t_seq must be geometric")
    vals = dtn_values(u, x, s, t_seq, allow_subgrid)
    exps = [2 - 2 * s, 2.0, 4 - 2 * s, 4.0, 6 - 2 * s]
    best, diag = richardson(vals, exps, ratios[0])
    steps = np.abs(np.diff(diag))
    scale = max(np.max(np.abs(vals)), 1e-300)
    if len(steps) >= 2 and steps[-1] > 2 * steps[-2] and steps[-1] > 1e-9 * scale:
        raise ExtrapolationUnstable(f"extrapolants diverge: {diag}")
    return float(best)


def dtn_residual(u, x: Sequence[float], s: float, t_seq: Sequence[float]) -> float:
    """Extrapolated DtN value minus the spectral (-Delta)^s u at x."""
    lim = dtn_limit(u, x, s, t_seq)
    if isinstance(u, Field):
        ref = float(spectral_interpolate(frac_laplacian_spectral(u, s), np.atleast_2d(x))[0])
    elif isinstance(u, ClosedForm) and u.frac_lap is not None:
        ref = float(np.asarray(u.frac_lap(np.atleast_2d(np.asarray(x, float)))).reshape(-1)[0])
    else:
        raise ConfigError("need a Field or a closed form with a known fractional Laplacian")
    return lim - ref


def default_t_seq(t0: float, levels: int = 4) -> Array:
    return t0 * 2.0 ** -np.arange(levels)


# ---------------------------------------------------------------------------
# half-sphere quadrature


@dataclass(frozen=True)
class HalfSphereQuad:
    xi: Array
    rho: float
    x: Array  # (n, N)
    t: Array  # (n,)
    weights: Array  # (n,), surface measure
    normals: Array  # (n, N+1), outward unit normal (X - (xi, 0)) / rho

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def integrate(self, values: Array) -> float:
        return float(np.sum(self.weights * values))


def half_sphere_area(N: int, rho: float) -> float:
    return 0.5 * sphere_measure(N + 1) * rho**N


def half_sphere_quadrature(xi: Sequence[float], rho: float, refinement: int = 1, s: float = 0.25) -> HalfSphereQuad:
    """Product Gauss rule on {|X - (xi,0)| = rho, t > 0}.

    The polar angle alpha from the t-axis is graded towards the equator
    (t -> 0) so integrands carrying t^{2s-1} singularities converge.
    """
    if not rho > 0:
        raise ConfigError("rho must be positive")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    N = xi.size
    q = max(3, int(np.ceil(4 / (2 * s))))
    nu = 32 * refinement
    u, wu = roots_legendre(nu)
    u = 0.5 * (u + 1)
    wu = 0.5 * wu
    # alpha = pi/2 (1 - (1-u)^q): polynomial Jacobian, dense nodes near t = 0
    v = (1 - u) ** q
    gp = q * (1 - u) ** (q - 1)
    walpha = 0.5 * np.pi * gp * wu
    dirs, wdir = sphere_rule(N, 16 * refinement)
    # cos(alpha) = sin(pi v / 2) keeps t accurate right next to the equator
    sa, ca = np.cos(0.5 * np.pi * v), np.sin(0.5 * np.pi * v)
    x = xi + rho * sa[:, None, None] * dirs[None, :, :]
    t = np.repeat((rho * ca)[:, None], len(dirs), axis=1)
    w = (rho**N) * (sa ** (N - 1) * walpha)[:, None] * wdir[None, :]
    normals = np.concatenate(
        [
            (sa[:, None, None] * dirs[None, :, :]),
            np.repeat(ca[:, None, None], len(dirs), axis=1),
        ],
        axis=-1,
    )
    keep = t.reshape(-1) > 0
    return HalfSphereQuad(
        xi,
        float(rho),
        x.reshape(-1, N)[keep],
        t.reshape(-1)[keep],
        w.reshape(-1)[keep],
        normals.reshape(-1, N + 1)[keep],
    )


__all__ = [
    "normalization_d",
    "normalization_d_closed",
    "kappa_s",
    "poisson_kernel",
    "theta_multiplier",
    "theta_derivative",
    "HalfSpacePoint",
    "FieldExtension",
    "ClosedForm",
    "extend",
    "extension_gradient",
    "extend_direct",
    "dtn_values",
    "dtn_limit",
    "dtn_residual",
    "default_t_seq",
    "HalfSphereQuad",
    "half_sphere_quadrature",
    "half_sphere_area",
    "richardson",
]
