"""Local Pohozaev identities on balls B_rho(xi) and half-spheres in R^{N+1}_+.

All identities come from the divergence theorem applied to the extension
equation div(t^{1-2s} grad u~) = 0 on the half-ball, with the flat part of the
boundary converted through -t^{1-2s} d_t u~ -> kappa_s (-Delta)^s u.  Notation:
q = p_s - eps, D = (x - xi).grad, Y = X - (xi, 0), nu the outward normal.

mode "self":  u solves (-Delta)^s u + V u = u_+^q.

    translation   1/2 int dV/dx_l u^2
                  = oint (V u^2/2 - u_+^{q+1}/(q+1)) nu_l
                    + (2 kappa)^{-1} int'' t^{1-2s} (|grad u~|^2 nu_l - 2 d_l u~ d_nu u~)
    dilation      (N/(q+1) - (N-2s)/2) int u_+^{q+1} - s int V u^2 - 1/2 int DV u^2
                  = kappa^{-1} int'' t^{1-2s} ((Y.grad u~) d_nu u~ - |grad u~|^2 (Y.nu)/2
                                              + (N-2s)/2 u~ d_nu u~)
                    + oint (u_+^{q+1}/(q+1) - V u^2/2) (x-xi).nu

mode "linearized":  additionally w solves (-Delta)^s w + V w = q u_+^{q-1} w.

    translation   int dV/dx_l u w
                  = oint (V u w - u_+^q w) nu_l
                    + kappa^{-1} int'' t^{1-2s} (<grad u~, grad w~> nu_l
                                                - d_l u~ d_nu w~ - d_l w~ d_nu u~)
    dilation      (N-2s)/2 eps int u_+^q w - 2s int V u w - int DV u w
                  = kappa^{-1} int'' t^{1-2s} ((Y.grad u~) d_nu w~ + (Y.grad w~) d_nu u~
                                              - <grad u~, grad w~> (Y.nu)
                                              + (N-2s)/2 (u~ d_nu w~ + w~ d_nu u~))
                    + oint (u_+^q w - V u w) (x-xi).nu

Ball integrals are exact for the trigonometric interpolant of the integrand
in one dimension (spectral antiderivative) and use a polar Gauss rule with
spectral interpolation otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import roots_legendre

from .errors import BallOutsideGrid, ConfigError, ResolutionTooCoarse
from .extension import ClosedForm, FieldExtension, as_source, half_sphere_quadrature, kappa_s
from .field_ops import (
    Field,
    Grid,
    interpolate_coefficients,
    spectral_coefficients,
    sphere_rule,
)
from .potentials import PotentialModel

Array = np.ndarray


@dataclass(frozen=True)
class PohozaevContext:
    s: float
    eps: float = 0.0
    V: object = None  # PotentialModel, number or None
    refinement: int = 1


@dataclass
class IdentityReport:
    kind: str
    lhs: float
    rhs: float
    residual: float
    terms: dict
    rho: float
    center: tuple
    axis: int | None = None
    mode: str = "self"
    comparison: dict = field(default_factory=dict)
    magnitude: float = 0.0  # largest integral of |integrand| over the terms

    @property
    def scale(self) -> float:
        return max([abs(v) for v in self.terms.values()] + [self.magnitude, 1e-300])

    @property
    def relative_residual(self) -> float:
        return abs(self.residual) / self.scale

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "axis": self.axis,
            "mode": self.mode,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "scale": self.scale,
            "magnitude": self.magnitude,
            "terms": dict(self.terms),
            "rho": self.rho,
            "center": list(self.center),
            "comparison": dict(self.comparison),
        }


def _report(kind, lhs_terms, rhs_terms, rho, center, axis=None, mode="self", comparison=None, magnitude=0.0):
    lhs = float(sum(lhs_terms.values()))
    rhs = float(sum(rhs_terms.values()))
    terms = {f"lhs:{k}": float(v) for k, v in lhs_terms.items()}
    terms.update({f"rhs:{k}": float(v) for k, v in rhs_terms.items()})
    return IdentityReport(kind, lhs, rhs, lhs - rhs, terms, float(rho), tuple(map(float, center)), axis, mode, comparison or {}, float(magnitude))


# ---------------------------------------------------------------------------
# ball and sphere integrals


def _interval_integral(values: Array, grid: Grid, a: float, b: float) -> float:
    """Exact integral over [a, b] of the 1-D trigonometric interpolant."""
    c = spectral_coefficients(values, grid)
    k = grid.wavenumbers
    x0 = grid.axis[0]
    ny = grid.points_per_dim // 2
    da, db = a - x0, b - x0
    total = c[0].real * (b - a)
    idx = np.arange(len(k))
    reg = (idx != 0) & (idx != ny)
    kk = k[reg]
    total += np.sum(c[reg] * (np.exp(1j * kk * db) - np.exp(1j * kk * da)) / (1j * kk)).real
    kn = k[ny]
    total += c[ny].real * (np.sin(kn * db) - np.sin(kn * da)) / kn
    return float(total)


def ball_integral(values: Array, grid: Grid, center, rho: float, n_radial: int = 48, n_angle: int = 64) -> float:
    """int_{B_rho(center)} F for grid samples ``values`` of F."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if not grid.contains_ball(center, rho):
        raise BallOutsideGrid(f"ball of radius {rho} at {center.tolist()} leaves the grid")
    values = np.asarray(values, dtype=float).reshape(grid.shape)
    if grid.dim == 1:
        return _interval_integral(values, grid, center[0] - rho, center[0] + rho)
    r, wr = roots_legendre(n_radial)
    r = 0.5 * rho * (r + 1)
    wr = 0.5 * rho * wr * r ** (grid.dim - 1)
    dirs, wd = sphere_rule(grid.dim, n_angle)
    pts = center + r[:, None, None] * dirs[None, :, :]
    coeff = spectral_coefficients(values, grid)
    vals = interpolate_coefficients(coeff, grid, pts.reshape(-1, grid.dim)).reshape(len(r), len(dirs))
    return float(wr @ vals @ wd)


def sphere_nodes(center, rho: float, n_angle: int = 64) -> tuple[Array, Array, Array]:
    """Points, outward normals and surface weights on the sphere dB_rho in R^N."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    dirs, wd = sphere_rule(center.size, n_angle)
    return center + rho * dirs, dirs, wd * rho ** (center.size - 1)


# ---------------------------------------------------------------------------
# data shared by the identities


def _potential_grad(V, points: Array) -> Array:
    if isinstance(V, PotentialModel):
        return V.grad(points)
    return np.zeros(points.shape)


def _potential_val(V, points: Array) -> Array:
    if isinstance(V, PotentialModel):
        return V.value(points)
    return np.full(points.shape[:-1], 0.0 if V is None else float(V))


class _Pieces:
    """Volume, sphere and half-sphere samples of u (and w) around one ball.

    Grid Fields are integrated over the ball through their interpolants;
    closed forms (one dimension) use Gauss-Legendre nodes and the quadrature
    extension, which sees no periodic images.
    """

    def __init__(self, u, w, center, rho: float, ctx: PohozaevContext):
        center = np.atleast_1d(np.asarray(center, dtype=float))
        self.closed = isinstance(u, ClosedForm)
        if self.closed:
            if w is not None and not isinstance(w, ClosedForm):
                raise ConfigError("u and w must both be Fields or both closed forms")
            self.grid = None
            N = u.dim
        else:
            g = u.grid
            if w is not None and not g.same_as(w.grid):
                raise ConfigError("u and w must share a grid")
            if not g.contains_ball(center, rho):
                raise BallOutsideGrid(f"ball of radius {rho} leaves the grid box")
            if rho < 8 * g.h:
                raise ResolutionTooCoarse(f"rho = {rho:.3g} is below 8h = {8 * g.h:.3g}")
            self.grid = g
            N = g.dim
        if center.size != N:
            raise ConfigError("center has the wrong dimension")
        self.center, self.rho, self.ctx = center, float(rho), ctx
        self.magnitude = 0.0
        self.N, self.s = N, ctx.s
        self.q = (N + 2 * self.s) / (N - 2 * self.s) - ctx.eps
        self.kappa = kappa_s(self.s)
        eu = as_source(u, self.s, allow_subgrid=True)
        ew = None if w is None else as_source(w, self.s, allow_subgrid=True)
        # volume samples
        if self.closed:
            pts, self.vw = _ball_nodes(center, rho)
            self.uv = eu.values(pts)
            self.wv = None if ew is None else ew.values(pts)
        else:
            pts = self.grid.points
            self.uv = u.values
            self.wv = None if w is None else w.values
        self.V = _potential_val(ctx.V, pts)
        self.dV = _potential_grad(ctx.V, pts)
        self.DV = np.sum((pts - center) * self.dV, axis=-1)
        # sphere in R^N
        self.sx, self.snu, self.sw = sphere_nodes(center, rho)
        self.sV = _potential_val(ctx.V, self.sx)
        self.su = eu.values(self.sx)
        # half-sphere
        hs = half_sphere_quadrature(center, rho, ctx.refinement, self.s)
        self.hs = hs
        self.tw = hs.t ** (1 - 2 * self.s)
        self.hu, self.hgu = eu.extension(hs.x, hs.t)
        if ew is not None:
            self.sw_ = ew.values(self.sx)
            self.hw, self.hgw = ew.extension(hs.x, hs.t)

    # each integral also records the integral of |integrand| as a magnitude
    def _ball(self, values: Array) -> float:
        if self.closed:
            return float(np.sum(self.vw * np.asarray(values).reshape(-1)))
        return ball_integral(values, self.grid, self.center, self.rho)

    def ball(self, values: Array) -> float:
        self.magnitude = max(self.magnitude, abs(self._ball(np.abs(values))))
        return self._ball(values)

    def sphere(self, values: Array) -> float:
        self.magnitude = max(self.magnitude, float(np.sum(self.sw * np.abs(values))))
        return float(np.sum(self.sw * values))

    def half(self, values: Array) -> float:
        self.magnitude = max(self.magnitude, self.hs.integrate(self.tw * np.abs(values)))
        return self.hs.integrate(self.tw * values)


def _ball_nodes(center: Array, rho: float, n_radial: int = 96, n_angle: int = 64) -> tuple[Array, Array]:
    """Gauss nodes and weights on B_rho(center), split at the center."""
    N = center.size
    r, wr = roots_legendre(n_radial)
    r = 0.5 * rho * (r + 1)
    wr = 0.5 * rho * wr * r ** (N - 1)
    dirs, wd = sphere_rule(N, n_angle)
    pts = center + r[:, None, None] * dirs[None, :, :]
    return pts.reshape(-1, N), np.multiply.outer(wr, wd).reshape(-1)


def _resolve_mode(u, w, mode: str | None):
    same = w is None or w is u
    if mode is None:
        mode = "self" if same else "linearized"
    if mode == "self":
        if not same and not (isinstance(u, Field) and isinstance(w, Field) and np.array_equal(u.values, w.values)):
            raise ConfigError("mode 'self' needs w = u")
        return None, mode
    if mode == "linearized":
        return (u if w is None else w), mode
    raise ConfigError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# identities


def translation_identity(
    u,
    w,
    center,
    rho: float,
    axis: int,
    ctx: PohozaevContext,
    mode: str | None = None,
) -> IdentityReport:
    """Translation-type identity in direction ``axis`` (0-based) on B_rho(center)."""
    w, mode = _resolve_mode(u, w, mode)
    P = _Pieces(u, w, center, rho, ctx)
    if not 0 <= axis < P.N:
        raise ConfigError("axis out of range")
    q, kap = P.q, P.kappa
    nu_s = P.snu[:, axis]
    nu_h = P.hs.normals
    gu = P.hgu
    dnu_u = np.sum(gu * nu_h, axis=-1)
    uv = P.uv
    sup = np.maximum(P.su, 0.0)
    if mode == "self":
        lhs = {"potential_gradient": 0.5 * P.ball(P.dV[..., axis] * uv * uv)}
        S = P.half(np.sum(gu * gu, axis=-1) * nu_h[:, axis] - 2 * gu[:, axis] * dnu_u)
        rhs = {
            "sphere_potential": P.sphere(0.5 * P.sV * P.su**2 * nu_s),
            "sphere_nonlinear": -P.sphere(sup ** (q + 1) / (q + 1) * nu_s),
            "half_sphere": S / (2 * kap),
        }
    else:
        wv = P.wv
        gw = P.hgw
        dnu_w = np.sum(gw * nu_h, axis=-1)
        lhs = {"potential_gradient": P.ball(P.dV[..., axis] * uv * wv)}
        rhs = {
            "sphere_potential": P.sphere(P.sV * P.su * P.sw_ * nu_s),
            "sphere_nonlinear": -P.sphere(sup**q * P.sw_ * nu_s),
            "half_sphere_gradient": P.half(np.sum(gu * gw, axis=-1) * nu_h[:, axis]) / kap,
            "half_sphere_mixed_u": -P.half(gu[:, axis] * dnu_w) / kap,
            "half_sphere_mixed_w": -P.half(gw[:, axis] * dnu_u) / kap,
        }
    return _report("translation", lhs, rhs, rho, P.center, axis, mode, magnitude=P.magnitude)


def dilation_identity(
    u,
    w,
    center,
    rho: float,
    ctx: PohozaevContext,
    mode: str | None = None,
) -> IdentityReport:
    """Dilation-type identity on B_rho(center).

    In linearized mode the ``comparison`` map also carries the residual with
    the alternative eps-coefficient (N-2)/2 in place of (N-2s)/2.
    """
    w, mode = _resolve_mode(u, w, mode)
    P = _Pieces(u, w, center, rho, ctx)
    N, s, q, kap, eps = P.N, P.s, P.q, P.kappa, ctx.eps
    nu_h = P.hs.normals
    Y = P.rho * nu_h
    Ydotnu = P.rho
    xdotnu = P.rho  # (x - xi).nu on the sphere
    gu = P.hgu
    dnu_u = np.sum(gu * nu_h, axis=-1)
    Yu = np.sum(gu * Y, axis=-1)
    uv = P.uv
    up = np.maximum(uv, 0.0)
    sup = np.maximum(P.su, 0.0)
    comparison = {}
    if mode == "self":
        lhs = {
            "nonlinear": (N / (q + 1) - (N - 2 * s) / 2) * P.ball(up ** (q + 1)),
            "potential": -s * P.ball(P.V * uv * uv),
            "potential_dilation": -0.5 * P.ball(P.DV * uv * uv),
        }
        bracket = Yu * dnu_u - 0.5 * np.sum(gu * gu, axis=-1) * Ydotnu + (N - 2 * s) / 2 * P.hu * dnu_u
        rhs = {
            "half_sphere": P.half(bracket) / kap,
            "sphere_nonlinear": P.sphere(sup ** (q + 1) / (q + 1) * xdotnu),
            "sphere_potential": -P.sphere(0.5 * P.sV * P.su**2 * xdotnu),
        }
    else:
        wv = P.wv
        gw = P.hgw
        dnu_w = np.sum(gw * nu_h, axis=-1)
        Yw = np.sum(gw * Y, axis=-1)
        nl = P.ball(up**q * wv)
        lhs = {
            "eps_term": (N - 2 * s) / 2 * eps * nl,
            "potential": -2 * s * P.ball(P.V * uv * wv),
            "potential_dilation": -P.ball(P.DV * uv * wv),
        }
        bracket = (
            Yu * dnu_w
            + Yw * dnu_u
            - np.sum(gu * gw, axis=-1) * Ydotnu
            + (N - 2 * s) / 2 * (P.hu * dnu_w + P.hw * dnu_u)
        )
        rhs = {
            "half_sphere": P.half(bracket) / kap,
            "sphere_nonlinear": P.sphere(sup**q * P.sw_ * xdotnu),
            "sphere_potential": -P.sphere(P.sV * P.su * P.sw_ * xdotnu),
        }
        alt = (N - 2) / 2 * eps * nl
        lhs_alt = sum(lhs.values()) - lhs["eps_term"] + alt
        comparison = {
            "eps_coefficient_alt": (N - 2) / 2,
            "lhs_alt": float(lhs_alt),
            "residual_alt": float(lhs_alt - sum(rhs.values())),
        }
    return _report("dilation", lhs, rhs, rho, P.center, None, mode, comparison, P.magnitude)


# ---------------------------------------------------------------------------
# choice of the radius


def rho_candidates(delta: float, n: int = 16) -> Array:
    """n radii strictly inside (2 delta, 5 delta)."""
    return 2 * delta + 3 * delta * (np.arange(n) + 0.5) / n


def boundary_energy(u: Field, w: Field | None, center, rho: float, s: float, refinement: int = 1) -> float:
    """Half-sphere integral of t^{1-2s} (|grad u~|^2 + |grad w~|^2)."""
    hs = half_sphere_quadrature(center, rho, refinement, s)
    tw = hs.t ** (1 - 2 * s)
    total = 0.0
    for f in (u, u if w is None else w):
        _, g = FieldExtension(f, s, allow_subgrid=True).extension(hs.x, hs.t)
        total += hs.integrate(tw * np.sum(g * g, axis=-1))
    return float(total)


def pick_rho(center, delta: float, u: Field, w: Field | None, s: float, n: int = 16) -> float:
    """Radius in (2 delta, 5 delta) minimizing the half-sphere gradient energy."""
    if not u.grid.contains_ball(center, 5 * delta):
        raise BallOutsideGrid("the 5 delta ball leaves the grid box")
    cands = rho_candidates(delta, n)
    energies = [boundary_energy(u, w, center, r, s) for r in cands]
    return float(cands[int(np.argmin(energies))])


__all__ = [
    "PohozaevContext",
    "IdentityReport",
    "translation_identity",
    "dilation_identity",
    "pick_rho",
    "rho_candidates",
    "boundary_energy",
    "ball_integral",
    "sphere_nodes",
]
