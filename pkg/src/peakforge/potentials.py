"""Gaussian-sum potentials V(x) = v0 + sum_j a_j exp(-|x - c_j|^2 / w_j)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .field_ops import Field, Grid

Array = np.ndarray


@dataclass(frozen=True)
class Bump:
    center: tuple[float, ...]
    amplitude: float
    width: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.width > 0:
            raise ConfigError("bump width must be positive")


@dataclass(frozen=True)
class PotentialModel:
    dim: int
    baseline: float
    bumps: tuple[Bump, ...] = ()
    declared_critical_points: tuple[tuple[float, ...], ...] = field(default=())

    def __post_init__(self):
        if self.baseline < 0:
            raise ConfigError("baseline must be nonnegative")
        bumps = tuple(b if isinstance(b, Bump) else Bump(**b) for b in self.bumps)
        object.__setattr__(self, "bumps", bumps)
        for b in bumps:
            if len(b.center) != self.dim:
                raise ConfigError("bump center has the wrong dimension")
        crit = tuple(tuple(float(c) for c in np.atleast_1d(p)) for p in self.declared_critical_points)
        object.__setattr__(self, "declared_critical_points", crit)

    # analytic evaluations --------------------------------------------------
    def value(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        out = np.full(x.shape[:-1], float(self.baseline))
        for b in self.bumps:
            d = x - np.asarray(b.center)
            out = out + b.amplitude * np.exp(-np.sum(d * d, axis=-1) / b.width)
        return out

    def grad(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        for b in self.bumps:
            d = x - np.asarray(b.center)
            e = b.amplitude * np.exp(-np.sum(d * d, axis=-1) / b.width)
            out = out - (2.0 / b.width) * e[..., None] * d
        return out

    def hessian(self, x: Array) -> Array:
        x = np.asarray(x, dtype=float)
        n = self.dim
        out = np.zeros(x.shape + (n,))
        eye = np.eye(n)
        for b in self.bumps:
            d = x - np.asarray(b.center)
            e = b.amplitude * np.exp(-np.sum(d * d, axis=-1) / b.width)
            outer = d[..., :, None] * d[..., None, :]
            out = out + e[..., None, None] * (4.0 / b.width**2 * outer - 2.0 / b.width * eye)
        return out

    def field(self, grid: Grid) -> Field:
        return Field(grid, self.value(grid.points))

    def is_constant(self) -> bool:
        return all(b.amplitude == 0 for b in self.bumps)

    def check_nonnegative(self, grid: Grid) -> bool:
        return bool(np.all(self.value(grid.points) >= 0))

    def validate(self, grid: Grid | None = None, tol: float = 1e-8) -> None:
        if grid is not None and not self.check_nonnegative(grid):
            raise ConfigError("potential is negative somewhere on the grid")
        for p in self.declared_critical_points:
            rep = verify_critical_point(p, self, tol)
            if not rep["ok"]:
                raise ConfigError(f"declared critical point {p} fails: {rep}")
            if self.value(np.asarray(p)) <= 0:
                raise ConfigError("V must be positive at declared critical points")

    def shifted(self, c: float) -> "PotentialModel":
        return PotentialModel(self.dim, self.baseline + c, self.bumps, self.declared_critical_points)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "baseline": self.baseline,
            "bumps": [
                {"center": list(b.center), "amplitude": b.amplitude, "width": b.width} for b in self.bumps
            ],
            "critical_points": [list(p) for p in self.declared_critical_points],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PotentialModel":
        try:
            return cls(
                int(d["dim"]),
                float(d.get("baseline", 0.0)),
                tuple(Bump(tuple(b["center"]), float(b["amplitude"]), float(b["width"])) for b in d.get("bumps", [])),
                tuple(tuple(p) for p in d.get("critical_points", [])),
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"bad potential spec: {exc}") from exc


def potential_value(x, model: PotentialModel):
    return model.value(x)


def potential_grad(x, model: PotentialModel):
    return model.grad(x)


def potential_hessian(x, model: PotentialModel):
    return model.hessian(x)


def verify_critical_point(xi_star, model: PotentialModel, tol: float = 1e-8) -> dict:
    x = np.atleast_1d(np.asarray(xi_star, dtype=float))
    g = float(np.linalg.norm(model.grad(x)))
    eig = np.linalg.eigvalsh(model.hessian(x))
    ok = g <= tol and float(np.min(np.abs(eig))) >= tol
    return {"ok": bool(ok), "grad_norm": g, "hessian_spectrum": eig.tolist()}


def constant_potential(dim: int, v0: float = 0.0) -> PotentialModel:
    return PotentialModel(dim, v0)


# presets ---------------------------------------------------------------------
# The presets are wells: V = 1 far away and V(xi*) = 1/16 at the bottom.  With
# s = 0.2 the predicted concentration lambda grows like V(xi*)^{1/(2s)}, so a small
# V(xi*) keeps lambda on laptop-sized grids, while V = O(1) in the far field keeps the
# low modes of the linearized operator away from zero on the torus.
PRESET_BASELINE = 1.0
PRESET_BOTTOM = 1.0 / 16
K1_WIDTH = 64.0

K2_HALF_SEPARATION = 11.0
K2_WIDTH = 16.0


def preset_k1(dim: int = 1) -> PotentialModel:
    c = (0.0,) * dim
    depth = PRESET_BASELINE - PRESET_BOTTOM
    return PotentialModel(dim, PRESET_BASELINE, (Bump(c, -depth, K1_WIDTH),), (c,))


def preset_k2(dim: int = 1) -> PotentialModel:
    """Two equal wells at +-xi*; their overlap is e^{-30}, so the centers are critical to 1e-12."""
    a = (K2_HALF_SEPARATION,) + (0.0,) * (dim - 1)
    b = (-K2_HALF_SEPARATION,) + (0.0,) * (dim - 1)
    depth = PRESET_BASELINE - PRESET_BOTTOM
    bumps = (Bump(a, -depth, K2_WIDTH), Bump(b, -depth, K2_WIDTH))
    return PotentialModel(dim, PRESET_BASELINE, bumps, (a, b))


PRESETS = {"k1-default": preset_k1, "k2-default": preset_k2}
