"""Closed-form bubbles, their parameter derivatives, cutoffs and the multi-bump ansatz.

Point arguments are arrays of shape (..., N); results have shape (...).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from .errors import ConfigError
from .field_ops import Field, FracOrder, Grid, PeakConfig

Array = np.ndarray


def gamma_const(N: int, s: float) -> float:
    """Normalization making U = gamma (lam/(1+lam^2 r^2))^{(N-2s)/2} solve (-Delta)^s U = U^{p_s}.

    gamma^{p_s - 1} = 2^{2s} Gamma((N+2s)/2) / Gamma((N-2s)/2).
    """
    if not (0 < s < 1 and N > 2 * s):
        raise ConfigError("need 0 < s < 1 and N > 2s")
    base = 2.0 ** (2 * s) * gamma((N + 2 * s) / 2) / gamma((N - 2 * s) / 2)
    return float(base ** ((N - 2 * s) / (4 * s)))


def gamma_const_printed(N: int, s: float) -> float:
    """The literal Gamma ratio 2^{(N-2s)/2} Gamma((N+2s)/2)/Gamma((N-2s)/2).

    Agrees with ``gamma_const`` only for special (N, s) such as (3, 1/2); kept
    to document the difference (see the README).
    """
    return float(2.0 ** ((N - 2 * s) / 2) * gamma((N + 2 * s) / 2) / gamma((N - 2 * s) / 2))


@dataclass(frozen=True)
class BubbleParams:
    lam: float
    xi: tuple[float, ...]
    order: FracOrder

    def __post_init__(self):
        if not self.lam > 0:
            raise ConfigError("lambda must be positive")
        object.__setattr__(self, "xi", tuple(float(c) for c in np.atleast_1d(self.xi)))


@dataclass(frozen=True)
class CutoffSpec:
    delta: float
    center: tuple[float, ...]

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError("delta must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))


def _diff(x: Array, xi) -> Array:
    return np.asarray(x, dtype=float) - np.asarray(xi, dtype=float)


def bubble(x: Array, p: BubbleParams) -> Array:
    N, s = p.order.dim, p.order.s
    r2 = np.sum(_diff(x, p.xi) ** 2, axis=-1)
    return gamma_const(N, s) * (p.lam / (1 + p.lam**2 * r2)) ** ((N - 2 * s) / 2)


def dbubble_dlambda(x: Array, p: BubbleParams) -> Array:
    N, s = p.order.dim, p.order.s
    lam = p.lam
    r2 = np.sum(_diff(x, p.xi) ** 2, axis=-1)
    return bubble(x, p) * ((N - 2 * s) / 2) * (1 - lam**2 * r2) / (lam * (1 + lam**2 * r2))


def dbubble_dxi(x: Array, p: BubbleParams, axis: int) -> Array:
    N, s = p.order.dim, p.order.s
    lam = p.lam
    d = _diff(x, p.xi)
    r2 = np.sum(d**2, axis=-1)
    return bubble(x, p) * (N - 2 * s) * lam**2 * d[..., axis] / (1 + lam**2 * r2)


def bubble_gradient(x: Array, p: BubbleParams) -> Array:
    """Spatial gradient of U (equals minus the xi-gradient)."""
    return -np.stack([dbubble_dxi(x, p, a) for a in range(p.order.dim)], axis=-1)


# ---------------------------------------------------------------------------
# cutoff


def _f(t: Array) -> Array:
    t = np.asarray(t, dtype=float)
    pos = t > 0
    out = np.zeros_like(t)
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def _fprime(t: Array) -> Array:
    t = np.asarray(t, dtype=float)
    pos = t > 0
    out = np.zeros_like(t)
    out[pos] = np.exp(-1.0 / t[pos]) / t[pos] ** 2
    return out


def cutoff_radial(r: Array, delta: float) -> Array:
    """eta(r): 1 on [0, delta], 0 beyond 2 delta, exp(-1/t) partition in between."""
    a = _f((2 * delta - r) / delta)
    b = _f((r - delta) / delta)
    return a / (a + b)


def cutoff_radial_derivative(r: Array, delta: float) -> Array:
    ta, tb = (2 * delta - r) / delta, (r - delta) / delta
    a, b = _f(ta), _f(tb)
    da, db = _fprime(ta), _fprime(tb)
    return -(da * b + a * db) / (delta * (a + b) ** 2)


def cutoff(x: Array, spec: CutoffSpec) -> Array:
    r = np.linalg.norm(_diff(x, spec.center), axis=-1)
    return cutoff_radial(r, spec.delta)


def cutoff_grad(x: Array, spec: CutoffSpec) -> Array:
    d = _diff(x, spec.center)
    r = np.linalg.norm(d, axis=-1)
    dr = cutoff_radial_derivative(r, spec.delta)
    with np.errstate(invalid="ignore", divide="ignore"):
        unit = np.where(r[..., None] > 0, d / r[..., None], 0.0)
    return dr[..., None] * unit


# ---------------------------------------------------------------------------
# multi-bump ansatz and the approximate kernel basis


def _peak(cfg: PeakConfig, i: int) -> tuple[BubbleParams, CutoffSpec]:
    if not 0 <= i < cfg.k:
        raise ConfigError(f"peak index {i} out of range for k={cfg.k}")
    lam, xi = cfg.peaks[i]
    return BubbleParams(lam, xi, cfg.order), CutoffSpec(cfg.delta, xi)


def truncated_bubble(x: Array, cfg: PeakConfig, i: int) -> Array:
    """W_i = eta_i U_i."""
    bp, cs = _peak(cfg, i)
    return cutoff(x, cs) * bubble(x, bp)


def multibump(x: Array, cfg: PeakConfig) -> Array:
    return sum(truncated_bubble(x, cfg, i) for i in range(cfg.k))


def basis_Z(i: int, l: int, x: Array, cfg: PeakConfig) -> Array:
    """Z_{i,0} = eta_i dU/dlambda; Z_{i,l} = d(eta_i U_i)/d xi^l for l >= 1.

    Peaks are indexed from 0 here; l runs over 0..N.
    """
    N = cfg.order.dim
    if not 0 <= l <= N:
        raise ConfigError(f"basis index l={l} out of range 0..{N}")
    bp, cs = _peak(cfg, i)
    if l == 0:
        return cutoff(x, cs) * dbubble_dlambda(x, bp)
    # moving the center moves both U and eta: d eta / d xi = -grad eta
    return cutoff(x, cs) * dbubble_dxi(x, bp, l - 1) - bubble(x, bp) * cutoff_grad(x, cs)[..., l - 1]


def bubble_source(p: BubbleParams):
    """U_{lambda,xi} as a closed form carrying its gradient and (-Delta)^s U = U^{p_s}."""
    from .extension import ClosedForm

    N, s = p.order.dim, p.order.s
    return ClosedForm(
        N, s, lambda x: bubble(x, p), lambda x: bubble_gradient(x, p), frac_lap=lambda x: bubble(x, p) ** p.order.p
    )


def dlambda_gradient(x: Array, p: BubbleParams) -> Array:
    N, s = p.order.dim, p.order.s
    lam = p.lam
    d = _diff(x, p.xi)
    r2 = np.sum(d**2, axis=-1)
    base = 1 + lam**2 * r2
    g = (1 - lam**2 * r2) / base
    a = (N - 2 * s) / 2
    U = bubble(x, p)
    gradU = bubble_gradient(x, p)
    return (a / lam) * (gradU * g[..., None] - (4 * lam**2 * U / base**2)[..., None] * d)


def dlambda_source(p: BubbleParams):
    """Z^0 = dU/dlambda as a closed form; (-Delta)^s Z^0 = p_s U^{p_s-1} Z^0."""
    from .extension import ClosedForm

    N, s, ps = p.order.dim, p.order.s, p.order.p
    return ClosedForm(
        N,
        s,
        lambda x: dbubble_dlambda(x, p),
        lambda x: dlambda_gradient(x, p),
        frac_lap=lambda x: ps * bubble(x, p) ** (ps - 1) * dbubble_dlambda(x, p),
    )


def multibump_field(grid: Grid, cfg: PeakConfig) -> Field:
    return Field(grid, multibump(grid.points, cfg))


def bubble_field(grid: Grid, p: BubbleParams) -> Field:
    return Field(grid, bubble(grid.points, p))


__all__ = [
    "gamma_const",
    "gamma_const_printed",
    "BubbleParams",
    "CutoffSpec",
    "bubble",
    "dbubble_dlambda",
    "dbubble_dxi",
    "bubble_gradient",
    "cutoff",
    "cutoff_grad",
    "cutoff_radial",
    "multibump",
    "truncated_bubble",
    "basis_Z",
    "multibump_field",
    "bubble_source",
    "dlambda_source",
    "dlambda_gradient",
    "bubble_field",
]
