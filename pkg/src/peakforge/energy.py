"""Energy functional, the dilation pairing and the expansion constants A, B.

For a single truncated bubble the pairing <I'(W), dW/dlambda> behaves like

    A eps / lambda + B V(xi) lambda^{-2s-1}

with constants given by radial integrals.  After r = tan(theta) both integrals
live on [0, pi/2] with an algebraic (B) or logarithmic (A) endpoint factor at
theta = pi/2, which QUADPACK's weighted rules integrate to full precision.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .bubbles import basis_Z, gamma_const, multibump
from .errors import ConfigError, NonConvergent, ResolutionTooCoarse
from .field_ops import Field, FracOrder, Grid, PeakConfig, _frac_lap, sphere_measure
from .potentials import PotentialModel

Array = np.ndarray


def potential_values(V, grid: Grid) -> Array:
    """Grid samples of V given as a PotentialModel, a Field or a number."""
    if isinstance(V, PotentialModel):
        if V.dim != grid.dim:
            raise ConfigError("potential and grid dimension differ")
        return V.value(grid.points)
    if isinstance(V, Field):
        return V.values
    if V is None:
        return np.zeros(grid.shape)
    return np.full(grid.shape, float(V))


def potential_at(V, xi) -> float:
    if isinstance(V, PotentialModel):
        return float(V.value(np.atleast_1d(np.asarray(xi, float))))
    if V is None:
        return 0.0
    if isinstance(V, Field):
        raise ConfigError("need an analytic potential to evaluate V(xi)")
    return float(V)


# ---------------------------------------------------------------------------
# energy


def energy(u: Field, eps: float, V, s: float) -> float:
    """I(u) = 1/2 <(-Delta)^s u, u> + 1/2 <V u, u> - int u_+^{q+1} / (q+1)."""
    g = u.grid
    N = g.dim
    q1 = FracOrder(N, s, eps).q + 1
    vals = u.values
    quad = np.sum(_frac_lap(vals, g, s) * vals) + np.sum(potential_values(V, g) * vals * vals)
    nonlin = np.sum(np.maximum(vals, 0.0) ** q1) / q1
    return float(g.cell_volume * (0.5 * quad - nonlin))


def energy_gradient(u: Field, eps: float, V, s: float) -> Field:
    """L^2 gradient I'(u) = (-Delta)^s u + V u - u_+^q."""
    g = u.grid
    q = FracOrder(g.dim, s, eps).q
    v = u.values
    return Field(g, _frac_lap(v, g, s) + potential_values(V, g) * v - np.maximum(v, 0.0) ** q)


# ---------------------------------------------------------------------------
# expansion constants


@dataclass(frozen=True)
class ExpansionConstants:
    A: float
    B: float
    N: int
    s: float
    quadrature_error_estimate: float

    def to_dict(self) -> dict:
        return {"N": self.N, "s": self.s, "A": self.A, "B": self.B, "quad_err": self.quadrature_error_estimate}


_QUAD = dict(epsabs=0.0, epsrel=1e-13, limit=200)


def _ratio(th: float) -> float:
    """cos(theta) / (pi/2 - theta), smooth and equal to 1 at pi/2."""
    rest = np.pi / 2 - th
    return np.cos(th) / rest if rest > 1e-8 else 1.0 - rest * rest / 6.0


def _check(val: float, err: float, what: str) -> float:
    rel = err / max(abs(val), 1e-300)
    if not rel <= 1e-8:
        raise NonConvergent(f"{what}: quadrature error estimate {rel:.2e}")
    return rel


def _require(N: int, s: float) -> None:
    if not (0 < s < 1 and N > 4 * s):
        raise ConfigError("expansion constants need 0 < s < 1 and N > 4s")


def _radial_B(N: int, s: float) -> tuple[float, float]:
    # int (1-r^2)/(1+r^2)^{N-2s+1} r^{N-1} dr = int cos(2t) sin^{N-1} cos^{N-4s-1} dt
    beta = N - 4 * s - 1
    f = lambda th: np.cos(2 * th) * np.sin(th) ** (N - 1) * _ratio(th) ** beta
    return integrate.quad(f, 0.0, np.pi / 2, weight="alg", wvar=(0.0, beta), **_QUAD)


def _radial_A(N: int) -> tuple[float, float]:
    # int (1-r^2)/(1+r^2)^{N+1} log(1+r^2) r^{N-1} dr
    #   = -2 int cos(2t) (sin t cos t)^{N-1} log(cos t) dt
    # and log cos t = log(pi/2 - t) + log(ratio)
    base = lambda th: np.cos(2 * th) * np.sin(th) ** (N - 1) * _ratio(th) ** (N - 1)
    sing, e1 = integrate.quad(base, 0.0, np.pi / 2, weight="alg-logb", wvar=(0.0, float(N - 1)), **_QUAD)
    smooth = lambda th: np.cos(2 * th) * (np.sin(th) * np.cos(th)) ** (N - 1) * np.log(_ratio(th))
    reg, e2 = integrate.quad(smooth, 0.0, np.pi / 2, **_QUAD)
    return -2.0 * (sing + reg), 2.0 * (e1 + e2)


def constant_B(N: int, s: float) -> float:
    return expansion_constants(N, s).B


def constant_A(N: int, s: float) -> float:
    return expansion_constants(N, s).A


def expansion_constants(N: int, s: float) -> ExpansionConstants:
    _require(N, s)
    g = gamma_const(N, s)
    p = (N + 2 * s) / (N - 2 * s)
    om = sphere_measure(N)
    ia, ea = _radial_A(N)
    ib, eb = _radial_B(N, s)
    ra = _check(ia, ea, "constant A")
    rb = _check(ib, eb, "constant B")
    A = -(((N - 2 * s) / 2) ** 2) * g ** (p + 1) * om * ia
    B = (N - 2 * s) / 2 * g**2 * om * ib
    return ExpansionConstants(float(A), float(B), N, s, float(max(ra, rb)))


# ---------------------------------------------------------------------------
# pairing and its prediction


def _check_resolution(cfg: PeakConfig, grid: Grid, limit: float = 0.25) -> None:
    worst = float(np.max(cfg.lambdas)) * grid.h
    if worst > limit:
        raise ResolutionTooCoarse(f"lambda h = {worst:.3g} exceeds {limit}")


def pairing_terms(cfg: PeakConfig, i: int, eps: float, V, grid: Grid) -> dict:
    """Pieces of <I'(W), Z_{i,0}>: critical part, potential part, subcritical excess.

    critical = <(-Delta)^s W - W^{p_s}, Z>, potential = <V W, Z>,
    excess = <W^{p_s} - W^{p_s - eps}, Z>; their sum is the pairing.
    """
    _check_resolution(cfg, grid)
    order = cfg.order
    N, s = order.dim, order.s
    p = order.p
    q = p - eps
    pts = grid.points
    W = multibump(pts, cfg)
    Z = basis_Z(i, 0, pts, cfg)
    dv = grid.cell_volume
    Wp = np.maximum(W, 0.0)
    terms = {
        "critical": dv * float(np.sum((_frac_lap(W, grid, s) - Wp**p) * Z)),
        "potential": dv * float(np.sum(potential_values(V, grid) * W * Z)),
        "excess": dv * float(np.sum((Wp**p - Wp**q) * Z)),
    }
    terms["total"] = terms["critical"] + terms["potential"] + terms["excess"]
    return terms


def pairing_dlambda(cfg: PeakConfig, i: int, eps: float, V, grid: Grid) -> float:
    """<(-Delta)^s W + V W - W^{p_s - eps}, eta_i dU_i/dlambda> on the grid."""
    return pairing_terms(cfg, i, eps, V, grid)["total"]


def expansion_prediction(lam: float, xi, eps: float, V, constants: ExpansionConstants) -> float:
    v = potential_at(V, xi)
    return constants.A * eps / lam + constants.B * v * lam ** (-2 * constants.s - 1)


def predicted_lambda(eps: float, v_xi: float, constants: ExpansionConstants) -> float:
    """Root (-A eps / (B V(xi)))^{-1/(2s)} of the leading-order pairing."""
    if not v_xi > 0:
        raise ConfigError("need V(xi) > 0")
    if not eps > 0:
        raise ConfigError("need eps > 0")
    return float((-constants.A / (constants.B * v_xi) * eps) ** (-1.0 / (2 * constants.s)))


__all__ = [
    "energy",
    "energy_gradient",
    "ExpansionConstants",
    "expansion_constants",
    "constant_A",
    "constant_B",
    "pairing_dlambda",
    "pairing_terms",
    "expansion_prediction",
    "predicted_lambda",
    "potential_values",
    "potential_at",
]
