"""Lyapunov-Schmidt reduction on a periodic grid.

For parameters (lambda_i, xi_i) the correction phi solves the projected problem

    A phi = N(phi) + R + sum_{i,l} c_i^l W_i^{p_s-1} Z_{i,l},
    <W_i^{p_s-1} Z_{i,l}, phi> = 0,

with A = (-Delta)^s + V - p_s W^{p_s-1}.  The parameters are then adjusted by
an outer Newton iteration until the reduced equations (one dilation pairing and
N translation identities per peak) vanish, which forces every c_i^l to zero.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh, minres

from .bubbles import basis_Z, cutoff, bubble, BubbleParams, CutoffSpec, multibump
from .energy import expansion_constants, potential_at, potential_values, predicted_lambda
from .errors import (
    ConfigError,
    EigNotConverged,
    KrylovStagnation,
    NotContracting,
    OuterNewtonDiverged,
    ResolutionTooCoarse,
)
from .field_ops import (
    Field,
    FracOrder,
    Grid,
    PeakConfig,
    _frac_lap,
    apply_multiplier,
    frac_multiplier,
    make_grid,
    weighted_sup_norm,
)
from .pohozaev import PohozaevContext, pick_rho, translation_identity

Array = np.ndarray


# ---------------------------------------------------------------------------
# the projected linear problem


class ProjectedProblem:
    """Operator A, constraint columns b_{i,l} = W_i^{p_s-1} Z_{i,l} and a solver.

    The saddle system [[A, -B], [-B^T, 0]] is symmetric and solved by MINRES
    with the SPD block preconditioner diag((|k|^{2s} + mean V)^{-1}, S^{-1}),
    S = B^T P B the small Schur complement.
    """

    def __init__(self, grid: Grid, cfg: PeakConfig, V, max_iter: int = 3000):
        cfg.validate(grid)
        self.grid, self.cfg = grid, cfg
        order = cfg.order
        self.N, self.s, self.p = order.dim, order.s, order.p
        pts = grid.points
        self.n = grid.size
        self.W = multibump(pts, cfg)
        self.Vv = potential_values(V, grid)
        self.pWp1 = self.p * np.maximum(self.W, 0.0) ** (self.p - 1)
        cols, labels = [], []
        for i in range(cfg.k):
            Wi = np.maximum(multibump_i(pts, cfg, i), 0.0)
            Wi_p1 = Wi ** (self.p - 1)
            for l in range(self.N + 1):
                Z = basis_Z(i, l, pts, cfg)
                cols.append((Wi_p1 * Z).reshape(-1))
                labels.append((i, l))
        self.B = np.stack(cols, axis=1)
        self.labels = labels
        self.bnorm = np.linalg.norm(self.B, axis=0)
        self.Bh = self.B / self.bnorm
        self.m = self.B.shape[1]
        self.mult = frac_multiplier(grid, self.s)
        shift = max(float(np.mean(self.Vv)), 1e-3)
        self.prec_mult = 1.0 / (self.mult + shift)
        PB = np.stack([self._prec_field(self.Bh[:, j]) for j in range(self.m)], axis=1)
        self.schur = self.Bh.T @ PB
        self.schur_inv = np.linalg.inv(self.schur)
        self.gram = np.linalg.inv(self.Bh.T @ self.Bh)
        self.max_iter = max_iter
        self.last_iterations = 0

    # operators on flat vectors
    def apply_A(self, v: Array) -> Array:
        f = v.reshape(self.grid.shape)
        out = apply_multiplier(f, self.grid, self.mult) + (self.Vv - self.pWp1) * f
        return out.reshape(-1)

    def _prec_field(self, v: Array) -> Array:
        return apply_multiplier(v.reshape(self.grid.shape), self.grid, self.prec_mult).reshape(-1)

    def _kkt(self, x: Array) -> Array:
        phi, c = x[: self.n], x[self.n :]
        return np.concatenate([self.apply_A(phi) - self.Bh @ c, -(self.Bh.T @ phi)])

    def _prec(self, x: Array) -> Array:
        return np.concatenate([self._prec_field(x[: self.n]), self.schur_inv @ x[self.n :]])

    def project(self, phi: Array) -> Array:
        """Remove the components along the constraint columns."""
        return phi - self.Bh @ (self.gram @ (self.Bh.T @ phi))

    def solve(self, h: Array, tol: float = 1e-8) -> tuple[Array, Array]:
        """phi (grid shape) and multipliers c (k, N+1) with A phi - sum c b = h."""
        rhs = np.concatenate([np.asarray(h, float).reshape(-1), np.zeros(self.m)])
        hn = np.linalg.norm(rhs)
        if hn == 0:
            return np.zeros(self.grid.shape), np.zeros((self.cfg.k, self.N + 1))
        size = self.n + self.m
        op = LinearOperator((size, size), matvec=self._kkt, dtype=float)
        pre = LinearOperator((size, size), matvec=self._prec, dtype=float)
        count = [0]

        def cb(_):
            count[0] += 1

        # MINRES stops on the preconditioned residual; tighten until the true one is small
        x = None
        rtol = tol * 1e-2
        for _ in range(4):
            x, info = minres(op, rhs, x0=x, rtol=rtol, maxiter=self.max_iter, M=pre, callback=cb)
            phi = self.project(x[: self.n])
            chat = x[self.n :]
            res = np.linalg.norm(self.apply_A(phi) - self.Bh @ chat - rhs[: self.n]) / hn
            if res <= tol:
                break
            rtol *= 1e-2
        self.last_iterations = count[0]
        if not res <= tol:
            raise KrylovStagnation(f"saddle solve stalled at relative residual {res:.2e} (info={info})")
        c = (chat / self.bnorm).reshape(self.cfg.k, self.N + 1)
        return phi.reshape(self.grid.shape), c


def multibump_i(x: Array, cfg: PeakConfig, i: int) -> Array:
    lam, xi = cfg.peaks[i]
    bp = BubbleParams(lam, xi, cfg.order)
    return cutoff(x, CutoffSpec(cfg.delta, xi)) * bubble(x, bp)


def projected_linear_solve(h: Field, cfg: PeakConfig, V=None, tol: float = 1e-8) -> tuple[Field, Array]:
    """Solve A phi = h + sum c b subject to the orthogonality constraints."""
    prob = ProjectedProblem(h.grid, cfg, V)
    phi, c = prob.solve(h.values, tol)
    return Field(h.grid, phi), c


# ---------------------------------------------------------------------------
# nonlinear terms


@dataclass
class NonlinearTerms:
    N1: Field
    N2: Field
    R1: Field
    R2: Field
    R3: Field

    @property
    def N(self) -> Field:
        return self.N1 + self.N2

    @property
    def R(self) -> Field:
        return self.R1 + self.R2 + self.R3

    @property
    def total(self) -> Field:
        return self.N + self.R

    def as_dict(self) -> dict:
        return {"N1": self.N1, "N2": self.N2, "R1": self.R1, "R2": self.R2, "R3": self.R3}


def _remainder(grid: Grid, cfg: PeakConfig, eps: float, V) -> tuple[Array, Array, Array, Array]:
    """W, R1, R2, R3 on the grid; J_i is computed spectrally."""
    pts = grid.points
    s, p = cfg.order.s, cfg.order.p
    q = p - eps
    W = np.zeros(grid.shape)
    R1 = np.zeros(grid.shape)
    R2 = np.zeros(grid.shape)
    for i in range(cfg.k):
        lam, xi = cfg.peaks[i]
        bp = BubbleParams(lam, xi, cfg.order)
        eta = cutoff(pts, CutoffSpec(cfg.delta, xi))
        U = bubble(pts, bp)
        Wi = eta * U
        W += Wi
        R1 -= eta * U**p
        R2 -= _frac_lap(Wi, grid, s) - eta * U**p
    R1 += np.maximum(W, 0.0) ** q
    R3 = -potential_values(V, grid) * W
    return W, R1, R2, R3


def nonlinear_rhs(phi: Field, cfg: PeakConfig, eps: float, V=None) -> NonlinearTerms:
    """N1, N2 and R1, R2, R3 with N(phi) + R = (W+phi)_+^q - (-Delta)^s W - V W - p_s W^{p_s-1} phi."""
    g = phi.grid
    W, R1, R2, R3 = _remainder(g, cfg, eps, V)
    return _nonlinear(phi.values, W, cfg.order.p, eps, g, R1, R2, R3)


def _nonlinear(phi: Array, W: Array, p: float, eps: float, g: Grid, R1, R2, R3) -> NonlinearTerms:
    q = p - eps
    Wp = np.maximum(W, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        wq1 = np.where(Wp > 0, Wp ** (q - 1), 0.0)
        wp1 = np.where(Wp > 0, Wp ** (p - 1), 0.0)
    N1 = np.maximum(W + phi, 0.0) ** q - Wp**q - q * wq1 * phi
    N2 = (q * wq1 - p * wp1) * phi
    F = lambda a: Field(g, a)
    return NonlinearTerms(F(N1), F(N2), F(R1), F(R2), F(R3))


# ---------------------------------------------------------------------------
# fixed point for phi


@dataclass
class ReductionState:
    cfg: PeakConfig
    phi: Field
    multipliers: Array  # (k, N+1)
    residual_star_star: float
    iterations: int
    eps: float = 0.0
    contraction_factors: list = field(default_factory=list)
    phi_norms: list = field(default_factory=list)

    @property
    def phi_star(self) -> float:
        return weighted_sup_norm(self.phi, self.cfg, "star")

    @property
    def contraction_factor(self) -> float:
        return max(self.contraction_factors) if self.contraction_factors else 0.0


def fixed_point_phi(
    cfg: PeakConfig,
    eps: float,
    V,
    grid: Grid,
    tol: float = 1e-6,
    max_iter: int = 60,
    problem: ProjectedProblem | None = None,
    lin_tol: float = 1e-8,
) -> ReductionState:
    """phi_{n+1} = L(N(phi_n) + R) from phi_0 = 0 until ||phi_{n+1} - phi_n||_* < tol."""
    order = cfg.order.with_eps(eps)
    order.require_reduction()
    cfg = replace(cfg, order=order)
    _check_resolution(cfg, grid)
    prob = problem or ProjectedProblem(grid, cfg, V)
    # the linear solves must be quieter than the requested step size
    lin_tol = min(lin_tol, max(1e-12, 1e-2 * tol))
    W, R1, R2, R3 = _remainder(grid, cfg, eps, V)
    star = lambda a: weighted_sup_norm(Field(grid, a), cfg, "star")
    phi = np.zeros(grid.shape)
    c = np.zeros((cfg.k, order.dim + 1))
    prev_step = None
    ratios, norms = [], []
    bad = 0
    for it in range(1, max_iter + 1):
        terms = _nonlinear(phi, W, order.p, eps, grid, R1, R2, R3)
        new, c = prob.solve(terms.total.values, lin_tol)
        step = star(new - phi)
        phi = new
        norms.append(star(phi))
        if not np.isfinite(step) or norms[-1] > 1e6:
            raise NotContracting(f"fixed point diverged at iteration {it}")
        if prev_step is not None and prev_step > 0:
            ratio = step / prev_step
            ratios.append(ratio)
            bad = bad + 1 if ratio > 0.9 else 0
            if bad >= 3:
                raise NotContracting(f"contraction factor above 0.9 for 3 steps (last {ratio:.3f})")
        prev_step = step
        if step < tol:
            break
    else:
        raise NotContracting(f"no convergence in {max_iter} iterations (last step {step:.2e})")
    terms = _nonlinear(phi, W, order.p, eps, grid, R1, R2, R3)
    lhs = prob.apply_A(phi.reshape(-1)).reshape(grid.shape)
    resid = lhs - terms.total.values - (prob.B @ c.reshape(-1)).reshape(grid.shape)
    rss = weighted_sup_norm(Field(grid, resid), cfg, "star_star")
    return ReductionState(cfg, Field(grid, phi), c, rss, it, eps, ratios, norms)


def _check_resolution(cfg: PeakConfig, grid: Grid, limit: float = 0.25) -> None:
    worst = float(np.max(cfg.lambdas)) * grid.h
    if worst > limit:
        raise ResolutionTooCoarse(f"lambda h = {worst:.3g} exceeds {limit}")


# ---------------------------------------------------------------------------
# reduced equations


def pde_residual_field(u: Field, eps: float, V, s: float) -> Field:
    g = u.grid
    q = FracOrder(g.dim, s, eps).q
    v = u.values
    return Field(g, _frac_lap(v, g, s) + potential_values(V, g) * v - np.maximum(v, 0.0) ** q)


def reduced_residuals(
    cfg: PeakConfig,
    eps: float,
    V,
    state: ReductionState,
    rhos: list | None = None,
    problem: ProjectedProblem | None = None,
) -> Array:
    """k(N+1) numbers: per peak the dilation pairing and N translation identities.

    Each component is divided by the Gram entry <b_{j,l}, Z_{j,l}> so that it
    is measured in the units of the multiplier c_j^l.
    """
    grid = state.phi.grid
    cfg = state.cfg
    N, s = cfg.order.dim, cfg.order.s
    pts = grid.points
    u = Field(grid, multibump(pts, cfg) + state.phi.values)
    Iu = pde_residual_field(u, eps, V, s).values
    if rhos is None:
        rhos = [pick_rho(xi, cfg.delta, u, None, s) for xi in cfg.centers]
    prob = problem or ProjectedProblem(grid, cfg, V)
    ctx = PohozaevContext(s, eps, V)
    out = []
    dv = grid.cell_volume
    for i in range(cfg.k):
        xi = cfg.centers[i]
        for l in range(N + 1):
            Z = basis_Z(i, l, pts, cfg)
            col = prob.B[:, prob.labels.index((i, l))].reshape(grid.shape)
            gram = dv * float(np.sum(col * Z))
            if l == 0:
                raw = dv * float(np.sum(Iu * Z))
            else:
                # with a source F the identity residual is -<F, d_l u> ~ <F, Z_{j,l}>
                raw = translation_identity(u, None, xi, rhos[i], l - 1, ctx).residual
            out.append(raw / gram)
    return np.asarray(out)


# ---------------------------------------------------------------------------
# outer Newton


@dataclass
class SolverOptions:
    half_length: float = 16.0
    points_per_dim: int | None = None  # None: chosen from lambda
    delta: float = 2.0
    tol_reduced: float = 1e-5
    max_newton: int = 25
    fp_tol: float = 1e-6
    fp_max_iter: int = 60
    lam_h: float = 0.2  # target lambda h when choosing M
    min_points: int = 1024
    max_points: int = 2**22
    lambdas: list | None = None  # initial lambdas (default: predicted)

    def grid_for(self, dim: int, lam_max: float) -> Grid:
        if self.points_per_dim is not None:
            return make_grid(dim, self.half_length, self.points_per_dim)
        need = 2 * self.half_length * lam_max / self.lam_h
        M = max(self.min_points, int(2 ** np.ceil(np.log2(need))))
        return make_grid(dim, self.half_length, M)


@dataclass
class Solution:
    state: ReductionState
    u: Field
    pde_residual: float
    predicted_lambda: Array
    parameter_law_error: Array
    reduced: Array = None
    newton_iterations: int = 0
    rhos: list = None

    @property
    def cfg(self) -> PeakConfig:
        return self.state.cfg

    def diagnostics(self) -> dict:
        st = self.state
        return {
            "eps": st.eps,
            "lambdas": st.cfg.lambdas.tolist(),
            "centers": st.cfg.centers.tolist(),
            "delta": st.cfg.delta,
            "s": st.cfg.order.s,
            "grid": self.u.grid.to_dict(),
            "phi_star": st.phi_star,
            "pde_residual": self.pde_residual,
            "residual_star_star": st.residual_star_star,
            "predicted_lambda": np.asarray(self.predicted_lambda).tolist(),
            "parameter_law_error": np.asarray(self.parameter_law_error).tolist(),
            "multipliers": st.multipliers.tolist(),
            "reduced_residuals": None if self.reduced is None else np.asarray(self.reduced).tolist(),
            "fixed_point_iterations": st.iterations,
            "contraction_factor": st.contraction_factor,
            "newton_iterations": self.newton_iterations,
            "rho": self.rhos,
        }


def predicted_parameters(eps: float, V, xi_stars, s: float) -> Array:
    """lambda_j = (-A / (B V(xi*_j)) eps)^{-1/(2s)} for each declared center."""
    xs = np.atleast_2d(np.asarray(xi_stars, dtype=float))
    N = xs.shape[1]
    const = expansion_constants(N, s)
    return np.array([predicted_lambda(eps, potential_at(V, x), const) for x in xs])


def _pack(cfg: PeakConfig) -> Array:
    return np.concatenate([np.concatenate([[np.log(lam)], xi]) for lam, xi in cfg.peaks])


def _unpack(x: Array, cfg: PeakConfig) -> PeakConfig:
    N = cfg.order.dim
    x = x.reshape(cfg.k, N + 1)
    return cfg.replace(lambdas=np.exp(x[:, 0]), centers=x[:, 1:])


def solve_peaks(eps: float, V, init, s: float, opts: SolverOptions | None = None, log=None) -> Solution:
    """Outer Newton with finite-difference Jacobian on the reduced equations.

    ``init`` lists the center guesses; the initial lambdas default to the
    leading-order prediction at those centers.  Steps are 1e-3 relative in
    lambda and 1e-3 absolute in xi.  The balls for the translation identities
    are chosen once, at the initial configuration.
    """
    opts = opts or SolverOptions()
    centers = np.atleast_2d(np.asarray(init, dtype=float))
    N = centers.shape[1]
    order = FracOrder(N, s, eps)
    order.require_reduction()
    pred = predicted_parameters(eps, V, centers, s)
    lam0 = np.asarray(opts.lambdas, float) if opts.lambdas is not None else pred
    cfg = PeakConfig(tuple((float(a), tuple(c)) for a, c in zip(lam0, centers)), opts.delta, order)
    grid = opts.grid_for(N, float(np.max(lam0)) * 1.5)
    cfg.validate(grid)
    W0 = Field(grid, multibump(grid.points, cfg))
    rhos = [pick_rho(xi, cfg.delta, W0, None, s) for xi in cfg.centers]

    adaptive = opts.points_per_dim is None

    def regrid(x) -> bool:
        # refine the grid when the iterate's lambda outgrows it; True if changed
        nonlocal grid
        if not adaptive:
            return False
        lam_max = float(np.max(np.exp(x.reshape(cfg.k, -1)[:, 0])))
        g = opts.grid_for(N, 1.5 * lam_max)
        if g.shape[0] <= grid.shape[0] or g.size > opts.max_points:
            return False
        grid = g
        return True

    def evaluate(x):
        c = _unpack(x, cfg)
        c.validate(grid)
        prob = ProjectedProblem(grid, c, V)
        st = fixed_point_phi(c, eps, V, grid, opts.fp_tol, opts.fp_max_iter, problem=prob)
        F = reduced_residuals(c, eps, V, st, rhos, prob)
        return F, st

    x = _pack(cfg)
    try:
        F, st = evaluate(x)
    except ResolutionTooCoarse as exc:
        raise OuterNewtonDiverged(f"initial configuration unresolved: {exc}") from exc
    it = 0
    steps = np.tile(np.r_[1e-3, np.full(N, 1e-3)], cfg.k)
    while np.max(np.abs(F)) > opts.tol_reduced:
        if regrid(x):
            F, st = evaluate(x)
            continue
        it += 1
        if it > opts.max_newton:
            raise OuterNewtonDiverged(f"no convergence in {opts.max_newton} Newton steps, |F| = {np.max(np.abs(F)):.2e}")
        J = np.empty((len(F), len(x)))
        for j in range(len(x)):
            xp = x.copy()
            xm = x.copy()
            xp[j] += steps[j]
            xm[j] -= steps[j]
            J[:, j] = (evaluate(xp)[0] - evaluate(xm)[0]) / (2 * steps[j])
        try:
            dx = -np.linalg.solve(J, F)
        except np.linalg.LinAlgError as exc:
            raise OuterNewtonDiverged("singular reduced Jacobian") from exc
        # cap the step: at most 30% in lambda and delta/4 in xi
        cap = np.tile(np.r_[0.3, np.full(N, opts.delta / 4)], cfg.k)
        scale = max(1.0, float(np.max(np.abs(dx) / cap)))
        dx = dx / scale
        t = 1.0
        fn = np.max(np.abs(F))
        while True:
            try:
                Fn, stn = evaluate(x + t * dx)
                ok = np.max(np.abs(Fn)) < (1 - 1e-4 * t) * fn
            except ResolutionTooCoarse:
                if regrid(x + t * dx):
                    F, st = evaluate(x)
                    fn = np.max(np.abs(F))
                    continue
                ok = False
            except (NotContracting, ConfigError, KrylovStagnation):
                ok = False
            if ok:
                break
            t *= 0.5
            if t < 1e-3:
                raise OuterNewtonDiverged(f"line search failed at Newton step {it}, |F| = {fn:.2e}")
        x = x + t * dx
        F, st = Fn, stn
        if log is not None:
            log(it, np.exp(x.reshape(cfg.k, -1)[:, 0]), x.reshape(cfg.k, -1)[:, 1:], np.max(np.abs(F)))
    cfg_final = st.cfg
    u = Field(grid, multibump(grid.points, cfg_final) + st.phi.values)
    res = weighted_sup_norm(pde_residual_field(u, eps, V, s), cfg_final, "star_star")
    lam = cfg_final.lambdas
    pred = predicted_parameters(eps, V, cfg_final.centers, s)
    return Solution(st, u, res, pred, np.abs(lam / pred - 1), F, it, rhos)


def continuation_guess(done: list[tuple[float, Array]], eps: float, s: float) -> Array:
    """Initial lambdas at eps from solved (eps, lambdas) pairs.

    One previous point: scale by the leading-order law eps^{-1/(2s)}.
    Two or more: extrapolate with the local log-log slope of the last two.
    """
    e1, l1 = done[-1]
    if len(done) == 1:
        slope = -1.0 / (2 * s)
    else:
        e0, l0 = done[-2]
        slope = np.log(l1 / l0) / np.log(e1 / e0)
    return np.asarray(l1) * (eps / e1) ** slope


def solve_sweep(eps_list, V, init, s: float, opts: SolverOptions | None = None, log=None) -> list:
    """solve_peaks along eps_list, largest eps first, warm-starting lambda.

    Returns (eps, Solution or the raised PeakforgeError) in the input order.
    The first point starts from the leading-order prediction.
    """
    from .errors import PeakforgeError

    opts = opts or SolverOptions()
    order = sorted(range(len(eps_list)), key=lambda j: -float(eps_list[j]))
    out: dict = {}
    done: list = []
    for j in order:
        eps = float(eps_list[j])
        o = replace(opts, lambdas=None if not done else list(continuation_guess(done, eps, s)))
        try:
            sol = solve_peaks(eps, V, init, s, o, log)
        except PeakforgeError as exc:
            out[j] = (eps, exc)
            continue
        done.append((eps, sol.cfg.lambdas))
        out[j] = (eps, sol)
    return [out[j] for j in range(len(eps_list))]


# ---------------------------------------------------------------------------
# linearized operator spectrum


def linearized_operator(u: Field, eps: float, V, s: float) -> tuple[LinearOperator, Array]:
    """(-Delta)^s + V - (p_s - eps) u_+^{p_s - 1 - eps} as a LinearOperator."""
    g = u.grid
    q = FracOrder(g.dim, s, eps).q
    up = np.maximum(u.values, 0.0)
    with np.errstate(divide="ignore"):
        pot = potential_values(V, g) - q * np.where(up > 0, up ** (q - 1), 0.0)
    mult = frac_multiplier(g, s)

    def mv(v):
        f = np.asarray(v, float).reshape(g.shape)
        return (apply_multiplier(f, g, mult) + pot * f).reshape(-1)

    return LinearOperator((g.size, g.size), matvec=mv, dtype=float), pot


def nondegeneracy_spectrum(u: Field, eps: float, V, s: float, count: int = 4, tol: float = 1e-10) -> Array:
    """``count`` eigenvalues of smallest magnitude, by shift-invert Lanczos.

    The inverse is applied by MINRES preconditioned with (|k|^{2s} + c)^{-1}.
    """
    g = u.grid
    H, pot = linearized_operator(u, eps, V, s)
    shift = max(float(np.mean(potential_values(V, g))), 0.05)
    pm = 1.0 / (frac_multiplier(g, s) + shift)
    P = LinearOperator(H.shape, matvec=lambda v: apply_multiplier(np.asarray(v).reshape(g.shape), g, pm).reshape(-1), dtype=float)

    def inv(b):
        x, info = minres(H, b, rtol=tol, maxiter=5000, M=P)
        if info != 0:
            raise EigNotConverged(f"inner solve failed (info={info})")
        return x

    OPinv = LinearOperator(H.shape, matvec=inv, dtype=float)
    rng = np.random.default_rng(0)
    try:
        vals = eigsh(H, k=count, sigma=0.0, which="LM", OPinv=OPinv, v0=rng.standard_normal(g.size), tol=1e-10, maxiter=2000, return_eigenvectors=False)
    except Exception as exc:  # ArpackNoConvergence and friends
        raise EigNotConverged(str(exc)) from exc
    return vals[np.argsort(np.abs(vals))]


def kernel_floor(u: Field, eps: float, V, s: float, fields: list[Field]) -> float:
    """max ||H Z|| / ||Z|| over the given approximate kernel fields."""
    H, _ = linearized_operator(u, eps, V, s)
    return max(float(np.linalg.norm(H @ f.flat) / np.linalg.norm(f.flat)) for f in fields)


# ---------------------------------------------------------------------------
# solution files


_MAGIC = b"PKFG"
_HEADER = struct.Struct("<4sIdIdd")


def write_solution(path: str, u: Field, s: float, eps: float) -> None:
    """Binary: header (magic, dims, L, M, s, eps) then float64 LE row-major values."""
    g = u.grid
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, g.dim, g.half_length, g.points_per_dim, float(s), float(eps)))
        fh.write(np.ascontiguousarray(u.values, dtype="<f8").tobytes())


def read_solution(path: str) -> tuple[Field, float, float]:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        magic, dim, L, M, s, eps = _HEADER.unpack(head)
        if magic != _MAGIC:
            raise ConfigError(f"{path} is not a solution file")
        grid = make_grid(dim, L, M)
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != grid.size:
        raise ConfigError("solution payload has the wrong length")
    return Field(grid, data.reshape(grid.shape).astype(float)), s, eps


def write_diagnostics(path: str, sol: Solution, extra: dict | None = None) -> None:
    d = sol.diagnostics()
    if extra:
        d.update(extra)
    with open(path, "w") as fh:
        json.dump(d, fh, indent=2, sort_keys=True)


__all__ = [
    "ProjectedProblem",
    "projected_linear_solve",
    "NonlinearTerms",
    "nonlinear_rhs",
    "ReductionState",
    "fixed_point_phi",
    "reduced_residuals",
    "SolverOptions",
    "Solution",
    "solve_peaks",
    "solve_sweep",
    "continuation_guess",
    "predicted_parameters",
    "nondegeneracy_spectrum",
    "linearized_operator",
    "kernel_floor",
    "pde_residual_field",
    "write_solution",
    "read_solution",
    "write_diagnostics",
]
