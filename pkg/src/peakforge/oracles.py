"""Sampled versions of the decay inequalities used by the construction.

Each bound has the form |LHS(x)| <= C * RHS(x).  We evaluate both sides on
sample points and report the fitted constant C = max LHS / RHS; a bound that
holds with a uniform constant shows up as a C that does not drift across
parameter sweeps or quadrature refinement.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .bubbles import BubbleParams, CutoffSpec, bubble, cutoff
from .errors import ConfigError
from .extension import FieldExtension
from .field_ops import Field, FracOrder, Grid, PeakConfig, _frac_lap, make_grid, peak_weight, sphere_measure, weighted_sup_norm

Array = np.ndarray


@dataclass(frozen=True)
class FittedConstant:
    """max and min of LHS / RHS over the samples."""

    C: float
    C_min: float
    samples: int

    def to_dict(self) -> dict:
        return {"C": self.C, "C_min": self.C_min, "samples": self.samples}


def _fit(ratios) -> FittedConstant:
    r = np.asarray(ratios, dtype=float)
    if not np.all(np.isfinite(r)):
        raise ConfigError("non-finite ratio in a sampled bound")
    return FittedConstant(float(r.max()), float(r.min()), int(r.size))


def stability(constants: Sequence[FittedConstant]) -> float:
    """Spread max C / min C across a sweep; 1 means perfectly stable."""
    cs = [c.C for c in constants]
    return float(max(cs) / min(cs))


# ---------------------------------------------------------------------------
# radial convolutions int f(|z|) |a - z|^{-mu} dz


def radial_convolution(f: Callable[[float], float], a: float, mu: float, N: int, epsrel: float = 1e-10) -> float:
    """int_{R^N} f(|z|) |a e_1 - z|^{-mu} dz for radial f and 0 < mu < N."""
    if not 0 < mu < N:
        raise ConfigError("need 0 < mu < N")
    a = abs(float(a))
    opts = dict(epsabs=0.0, epsrel=epsrel, limit=400)
    if N == 1:
        if a == 0.0:
            near = integrate.quad(f, 0.0, 1.0, weight="alg", wvar=(-mu, 0.0), **opts)[0]
            far = integrate.quad(lambda y: f(y) * y**-mu, 1.0, np.inf, **opts)[0]
            return 2.0 * (near + far)
        left = integrate.quad(lambda y: f(y) * (a + y) ** -mu, 0.0, np.inf, **opts)[0]
        mid = integrate.quad(f, 0.0, a, weight="alg", wvar=(0.0, -mu), **opts)[0]
        right = integrate.quad(lambda z: f(z), a, a + 1.0, weight="alg", wvar=(-mu, 0.0), **opts)[0]
        tail = integrate.quad(lambda z: f(z) * (z - a) ** -mu, a + 1.0, np.inf, **opts)[0]
        return left + mid + right + tail
    # polar coordinates about the singular point: z = a e_1 + r omega
    ring = sphere_measure(N - 1)

    def angular(r):
        h = lambda th: f(np.sqrt(a * a + r * r + 2 * a * r * np.cos(th))) * np.sin(th) ** (N - 2)
        return ring * integrate.quad(h, 0.0, np.pi, **opts)[0]

    cut = a + 1.0
    near = integrate.quad(angular, 0.0, cut, weight="alg", wvar=(N - 1 - mu, 0.0), **opts)[0]
    tail = integrate.quad(lambda r: angular(r) * r ** (N - 1 - mu), cut, np.inf, **opts)[0]
    return near + tail


# Riesz potential of a polynomially decaying profile ----------------------------


def riesz_integral(x: float, N: int, beta: float, gam: float, epsrel: float = 1e-10) -> float:
    """int |x - y|^{-(N - beta)} (1 + |y|)^{-gamma} dy."""
    return radial_convolution(lambda r: (1.0 + r) ** -gam, x, N - beta, N, epsrel)


def riesz_bound(x: float, N: int, beta: float, gam: float) -> float:
    """Decay profile of the Riesz integral; three regimes in gamma vs N."""
    if not (0 < beta < N and gam > beta):
        raise ConfigError("need 0 < beta < N and gamma > beta")
    r = abs(float(x))
    if gam < N:
        return (1 + r) ** (beta - gam)
    if gam == N:
        return (1 + abs(np.log(r)) if r > 0 else np.inf) / (1 + r) ** (N - beta)
    return (1 + r) ** (beta - N)


def fit_riesz_constant(N: int, beta: float, gam: float, radii: Sequence[float], epsrel: float = 1e-10) -> FittedConstant:
    return _fit([riesz_integral(r, N, beta, gam, epsrel) / riesz_bound(r, N, beta, gam) for r in radii])


# convolution seen from a point of the half-sphere ------------------------------


def half_sphere_integral(a: float, t: float, N: int, alpha: float, beta: float, epsrel: float = 1e-10) -> float:
    """int (t + |z|)^{-alpha} |a - z|^{-beta} dz with |a|^2 + t^2 = rho^2."""
    if not t > 0:
        raise ConfigError("need t > 0")
    return radial_convolution(lambda r: (t + r) ** -alpha, a, beta, N, epsrel)


def half_sphere_bound(a: float, t: float, N: int, alpha: float, beta: float) -> float:
    if not (alpha > N and 0 < beta < N):
        raise ConfigError("need alpha > N and 0 < beta < N")
    d = 1.0 + abs(float(a))
    return d**-beta * t ** (N - alpha) + d ** (N - alpha - beta)


def half_sphere_samples(rho: float, n: int = 50, seed: int = 0) -> tuple[Array, Array]:
    """Random (|y - xi|, t) on the upper half-sphere of radius rho."""
    rng = np.random.default_rng(seed)
    ang = rng.uniform(0.0, 0.5 * np.pi, n)
    return rho * np.cos(ang), rho * np.sin(ang)


def fit_half_sphere_constant(
    N: int, alpha: float, beta: float, rho: float, n: int = 50, seed: int = 0, epsrel: float = 1e-10
) -> FittedConstant:
    a, t = half_sphere_samples(rho, n, seed)
    return _fit(
        [half_sphere_integral(ai, ti, N, alpha, beta, epsrel) / half_sphere_bound(ai, ti, N, alpha, beta) for ai, ti in zip(a, t)]
    )


# ---------------------------------------------------------------------------
# grid-based bounds


def truncated_extension_ratios(
    lam: float, order: FracOrder, rho: float, grid: Grid, delta: float = 2.0, n: int = 24
) -> tuple[FittedConstant, FittedConstant]:
    """Sampled ratios for the extension of eta U_{lam,0} on the half-sphere of radius rho.

    Value:    |W~(x,t)| lam^{(N-2s)/2} (1 + |x|)^{N-2s}
    Gradient: |grad W~(x,t)| lam^{(N-2s)/2} (1 + |x|)^{N-2s+1}
    """
    N, s = order.dim, order.s
    xi = (0.0,) * N
    pts = grid.points
    W = cutoff(pts, CutoffSpec(delta, xi)) * bubble(pts, BubbleParams(lam, xi, order))
    ext = FieldExtension(Field(grid, W), s, allow_subgrid=True)
    ang = np.pi * (np.arange(n) + 0.5) / (2 * n)  # angle from the boundary plane
    rng = np.random.default_rng(1)
    dirs = rng.standard_normal((n, N))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    x = rho * np.cos(ang)[:, None] * dirs
    t = rho * np.sin(ang)
    val, grad = ext.extension(x, t, gradient=True)
    r = np.linalg.norm(x, axis=1)
    a = (N - 2 * s) / 2
    v_ratio = np.abs(val) * lam**a * (1 + r) ** (N - 2 * s)
    g_ratio = np.linalg.norm(grad, axis=1) * lam**a * (1 + r) ** (N - 2 * s + 1)
    return _fit(v_ratio), _fit(g_ratio)


def cutoff_residual(lam: float, order: FracOrder, grid: Grid, delta: float = 2.0) -> Array:
    """J = (-Delta)^s(eta U) - eta U^{p_s} on the grid, for a bubble at the origin."""
    pts = grid.points
    xi = (0.0,) * order.dim
    eta = cutoff(pts, CutoffSpec(delta, xi))
    U = bubble(pts, BubbleParams(lam, xi, order))
    return _frac_lap(eta * U, grid, order.s) - eta * U**order.p


def cutoff_residual_constant(lam: float, order: FracOrder, grid: Grid, delta: float = 2.0) -> FittedConstant:
    """Fitted C in |J(x)| (1 + |x|)^{N+2s} lam^{(N-2s)/2} <= C."""
    N, s = order.dim, order.s
    J = cutoff_residual(lam, order, grid, delta)
    r = np.linalg.norm(grid.points, axis=-1)
    return _fit((np.abs(J) * (1 + r) ** (N + 2 * s) * lam ** ((N - 2 * s) / 2)).reshape(-1))


def linear_solve_constant(
    lam: float, order: FracOrder, V, grid: Grid | None = None, samples: int = 4, delta: float = 2.0, seed: int = 0
) -> FittedConstant:
    """Fitted C in ||L(h)||_* <= C ||h||_** over random right-hand sides h."""
    # local import: reduction depends on this package's lower layers only
    from .reduction import ProjectedProblem

    if grid is None:
        M = max(256, int(2 ** np.ceil(np.log2(32.0 * lam / 0.25))))
        grid = make_grid(order.dim, 16.0, M)
    cfg = PeakConfig(((lam, (0.0,) * order.dim),), delta, order)
    prob = ProjectedProblem(grid, cfg, V)
    wss = peak_weight(grid.points, cfg, "star_star")
    rng = np.random.default_rng(seed)
    ratios = []
    for _ in range(samples):
        h = wss * rng.uniform(-1.0, 1.0, grid.shape)
        hn = weighted_sup_norm(Field(grid, h), cfg, "star_star")
        phi, _ = prob.solve(h)
        ratios.append(weighted_sup_norm(Field(grid, phi), cfg, "star") / hn)
    return _fit(ratios)


__all__ = [
    "FittedConstant",
    "stability",
    "radial_convolution",
    "riesz_integral",
    "riesz_bound",
    "fit_riesz_constant",
    "half_sphere_integral",
    "half_sphere_bound",
    "half_sphere_samples",
    "fit_half_sphere_constant",
    "truncated_extension_ratios",
    "cutoff_residual",
    "cutoff_residual_constant",
    "linear_solve_constant",
]
