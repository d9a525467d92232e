"""Batch front-end: ``peakforge <command> [--config FILE] [--preset NAME] [--a.b=value ...]``.

Commands: constants | build | sweep | pohozaev | spectrum | extension-check.
Every output embeds the library version and a hash of the resolved config.
Exit codes: 0 ok, 1 config error, 2 verification failure, 3 solver failure.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .bubbles import BubbleParams, bubble_field, bubble_source, dlambda_source, gamma_const
from .energy import expansion_constants
from .errors import ConfigError, PeakforgeError, SolverError, VerificationError
from .extension import default_t_seq, dtn_limit
from .field_ops import Field, FracOrder, frac_laplacian_spectral, make_grid, spectral_interpolate
from .pohozaev import PohozaevContext, dilation_identity, pick_rho, translation_identity
from .potentials import PRESETS as POTENTIAL_PRESETS
from .potentials import PotentialModel
from .reduction import (
    SolverOptions,
    nondegeneracy_spectrum,
    read_solution,
    solve_peaks,
    solve_sweep,
    write_diagnostics,
    write_solution,
)

COMMANDS = ("constants", "build", "sweep", "pohozaev", "spectrum", "extension-check")

DEFAULTS: dict = {
    "dim": 1,
    "s": 0.2,
    "epsilon": 0.2,
    "epsilon_list": [0.4, 0.2, 0.1, 0.05],
    "grid": {"L": 16.0, "M": None, "lam_h": 0.2},
    "potential": {"preset": "k1-default"},
    "peaks": [[0.0]],
    "delta": 2.0,
    "tolerances": {"reduced": 1e-5, "fixed_point": 1e-6, "identity": 1e-5, "dtn": 1e-2},
    "newton": {"max_iter": 25},
    "sweep": {"continuation": True},
    "constants": {"cases": [[1, 0.2], [2, 0.3], [3, 0.5]]},
    "pohozaev": {"source": "solution", "solution": None, "rho": None, "lambda": 1.0},
    "spectrum": {"source": "solution", "solution": None, "count": 4},
    "extension": {"source": "bubble", "points": 10, "t0": 0.4, "levels": 4, "L": 640.0, "M": 65536},
    "output_path": "peakforge-out",
}

PRESETS: dict = {
    "k1-default": {"peaks": [[0.0]], "potential": {"preset": "k1-default"}},
    "k2-default": {"peaks": [[-11.0], [11.0]], "potential": {"preset": "k2-default"}, "grid": {"L": 24.0}},
    "exact-bubble": {
        "epsilon": 0.0,
        "potential": {"preset": "zero"},
        "pohozaev": {"source": "exact-bubble", "rho": [1.0, 3.0]},
        "spectrum": {"source": "bubble"},
        "extension": {"source": "bubble"},
    },
}


# ---------------------------------------------------------------------------
# configuration


# replaced wholesale rather than merged key by key
_LEAVES = {"potential"}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if where in _LEAVES:
            out[key] = copy.deepcopy(val)
        elif isinstance(out[key], dict) and isinstance(val, dict):
            out[key] = _merge(out[key], val, where + ".")
        elif isinstance(out[key], dict):
            raise ConfigError(f"config key {where!r} must be an object")
        else:
            out[key] = val
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_overrides(items: list[str]) -> dict:
    """['--grid.M=512', ...] -> {'grid': {'M': 512}}."""
    tree: dict = {}
    for item in items:
        if not item.startswith("--") or "=" not in item:
            raise ConfigError(f"overrides look like --a.b=value, got {item!r}")
        key, _, val = item[2:].partition("=")
        parts = key.split(".")
        node = tree
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = _parse_value(val)
    return tree


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def validate_config(cfg: dict) -> None:
    _require(isinstance(cfg["dim"], int) and cfg["dim"] >= 1, "dim must be a positive integer")
    _require(isinstance(cfg["s"], (int, float)) and 0 < cfg["s"] < 1, "s must lie in (0, 1)")
    _require(isinstance(cfg["epsilon"], (int, float)) and cfg["epsilon"] >= 0, "epsilon must be >= 0")
    eps_list = cfg["epsilon_list"]
    _require(isinstance(eps_list, list) and all(isinstance(e, (int, float)) and e > 0 for e in eps_list), "epsilon_list must be positive numbers")
    g = cfg["grid"]
    _require(isinstance(g["L"], (int, float)) and g["L"] > 0, "grid.L must be positive")
    _require(g["M"] is None or (isinstance(g["M"], int) and g["M"] >= 8 and g["M"] % 2 == 0), "grid.M must be an even integer >= 8")
    peaks = cfg["peaks"]
    _require(isinstance(peaks, list) and len(peaks) >= 1, "peaks must be a non-empty list")
    for p in peaks:
        _require(isinstance(p, list) and len(p) == cfg["dim"], "each peak guess needs dim coordinates")
    _require(isinstance(cfg["delta"], (int, float)) and cfg["delta"] > 0, "delta must be positive")
    for key, val in cfg["tolerances"].items():
        _require(isinstance(val, (int, float)) and val > 0, f"tolerances.{key} must be positive")
    for case in cfg["constants"]["cases"]:
        _require(isinstance(case, list) and len(case) == 2, "constants.cases holds [N, s] pairs")
    _require(cfg["pohozaev"]["source"] in ("solution", "exact-bubble"), "pohozaev.source is 'solution' or 'exact-bubble'")
    _require(cfg["spectrum"]["source"] in ("solution", "bubble"), "spectrum.source is 'solution' or 'bubble'")
    _require(cfg["extension"]["source"] in ("bubble", "gaussian"), "extension.source is 'bubble' or 'gaussian'")
    _require(isinstance(cfg["sweep"]["continuation"], bool), "sweep.continuation must be true or false")
    _require(isinstance(cfg["output_path"], str), "output_path must be a string")
    make_potential(cfg)


def resolve_config(path: str | None, preset: str | None, overrides: list[str]) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
        cfg = _merge(cfg, PRESETS[preset])
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        _require(isinstance(doc, dict), "config must be a JSON object")
        cfg = _merge(cfg, doc)
    cfg = _merge(cfg, parse_overrides(overrides))
    validate_config(cfg)
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def make_potential(cfg: dict):
    spec = cfg["potential"]
    _require(isinstance(spec, dict), "potential must be an object")
    if "preset" in spec:
        name = spec["preset"]
        if name == "zero":
            return None
        if name not in POTENTIAL_PRESETS:
            raise ConfigError(f"unknown potential preset {name!r}")
        return POTENTIAL_PRESETS[name](cfg["dim"])
    model = PotentialModel.from_dict(spec)
    _require(model.dim == cfg["dim"], "potential dimension differs from dim")
    return model


def solver_options(cfg: dict) -> SolverOptions:
    g = cfg["grid"]
    tol = cfg["tolerances"]
    return SolverOptions(
        half_length=float(g["L"]),
        points_per_dim=g["M"],
        delta=float(cfg["delta"]),
        tol_reduced=float(tol["reduced"]),
        fp_tol=float(tol["fixed_point"]),
        max_newton=int(cfg["newton"]["max_iter"]),
        lam_h=float(g["lam_h"]),
    )


# ---------------------------------------------------------------------------
# output helpers


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


class Output:
    def __init__(self, cfg: dict, command: str):
        self.dir = Path(cfg["output_path"])
        self.dir.mkdir(parents=True, exist_ok=True)
        self.meta = {"version": __version__, "config_hash": config_hash(cfg), "command": command}

    def csv(self, name: str, header: list[str], rows: list[list], footer: list[str] = ()) -> Path:
        path = self.dir / name
        with open(path, "w", newline="") as fh:
            fh.write(f"# peakforge {self.meta['version']} config_hash={self.meta['config_hash']}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(v) for v in r])
            for line in footer:
                fh.write(f"# {line}\n")
        return path

    def json(self, name: str, payload: dict) -> Path:
        path = self.dir / name
        doc = {"meta": self.meta, **payload}
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return path


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# commands


def cmd_constants(cfg: dict) -> Path:
    out = Output(cfg, "constants")
    rows = []
    for N, s in cfg["constants"]["cases"]:
        c = expansion_constants(int(N), float(s))
        rows.append([int(N), float(s), gamma_const(int(N), float(s)), c.A, c.B, c.quadrature_error_estimate])
    return out.csv("constants.csv", ["N", "s", "gamma", "A", "B", "quad_err"], rows)


def _build(cfg: dict, eps: float):
    V = make_potential(cfg)
    return solve_peaks(eps, V, cfg["peaks"], float(cfg["s"]), solver_options(cfg))


def cmd_build(cfg: dict) -> list[Path]:
    out = Output(cfg, "build")
    eps, s = float(cfg["epsilon"]), float(cfg["s"])
    try:
        sol = _build(cfg, eps)
    except SolverError as exc:
        raise type(exc)(f"build stage {type(exc).__name__}: {exc}") from exc
    paths = []
    binp = out.dir / "solution.bin"
    write_solution(str(binp), sol.u, s, eps)
    paths.append(binp)
    diag = out.dir / "diagnostics.json"
    write_diagnostics(str(diag), sol, {"meta": out.meta})
    paths.append(diag)
    delta = float(cfg["delta"])
    r = np.linspace(0.0, 5 * delta, 101)
    W = sol.u - sol.state.phi
    for j, xi in enumerate(sol.cfg.centers):
        pts = xi[None, :] + r[:, None] * np.eye(len(xi))[0]
        u_r = spectral_interpolate(sol.u, pts)
        w_r = spectral_interpolate(W, pts)
        rows = [[a, b, c] for a, b, c in zip(r, u_r, w_r)]
        paths.append(out.csv(f"profile_peak{j}.csv", ["r", "u", "W"], rows))
    return paths


def _record(eps: float, sol, k: int) -> dict:
    if isinstance(sol, PeakforgeError):
        return {"eps": eps, "ok": False, "message": f"{type(sol).__name__}: {sol}", "k": k}
    return {
        "eps": eps,
        "ok": True,
        "lambdas": sol.cfg.lambdas.tolist(),
        "pred": np.asarray(sol.predicted_lambda).tolist(),
        "phi": sol.state.phi_star,
        "residual": sol.pde_residual,
        "k": k,
    }


def _sweep_point(args):
    cfg, eps = args
    try:
        sol = _build(cfg, eps)
    except PeakforgeError as exc:
        sol = exc
    return _record(eps, sol, len(cfg["peaks"]))


def pool_size(n: int) -> int:
    try:
        cap = int(os.environ.get("PEAKFORGE_THREADS", "1"))
    except ValueError:
        cap = 1
    return max(1, min(cap, n))


def loglog_slope(eps, lam) -> float:
    x, y = np.log(np.asarray(eps, float)), np.log(np.asarray(lam, float))
    return float(np.polyfit(x, y, 1)[0])


def cmd_sweep(cfg: dict) -> Path:
    out = Output(cfg, "sweep")
    eps_list = [float(e) for e in cfg["epsilon_list"]]
    k = len(cfg["peaks"])
    if cfg["sweep"]["continuation"]:
        # sequential: each point warm-starts from the previous solutions
        pairs = solve_sweep(eps_list, make_potential(cfg), cfg["peaks"], float(cfg["s"]), solver_options(cfg))
        results = [_record(e, r, k) for e, r in pairs]
    else:
        jobs = [(cfg, e) for e in eps_list]
        workers = pool_size(len(jobs))
        if workers == 1:
            results = [_sweep_point(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=workers) as ex:
                results = list(ex.map(_sweep_point, jobs))
    header = ["eps"] + [f"lambda_{j}" for j in range(k)] + [f"lambda_pred_{j}" for j in range(k)]
    header += ["phi_norm", "residual", "status"]
    rows = []
    for r in results:
        if r["ok"]:
            rows.append([r["eps"], *r["lambdas"], *r["pred"], r["phi"], r["residual"], "ok"])
        else:
            rows.append([r["eps"]] + ["nan"] * (2 * k + 2) + ["failed: " + r["message"]])
    good = [r for r in results if r["ok"]]
    footer = []
    for j in range(k):
        if len(good) >= 2:
            slope = loglog_slope([r["eps"] for r in good], [r["lambdas"][j] for r in good])
            footer.append(f"fitted_slope_{j}={_fmt(slope)}")
        else:
            footer.append(f"fitted_slope_{j}=nan")
    footer.append(f"expected_slope={_fmt(-1.0 / (2 * float(cfg['s'])))}")
    return out.csv("sweep.csv", header, rows, footer)


def _load_solution(cfg: dict, section: str):
    path = cfg[section]["solution"]
    if path is None:
        path = str(Path(cfg["output_path"]) / "solution.bin")
    if not Path(path).exists():
        raise ConfigError(f"solution file {path} not found; run build first or set {section}.solution")
    return read_solution(path)


def cmd_pohozaev(cfg: dict) -> Path:
    out = Output(cfg, "pohozaev")
    pc = cfg["pohozaev"]
    tol = float(cfg["tolerances"]["identity"])
    N = int(cfg["dim"])
    reports = []
    if pc["source"] == "exact-bubble":
        s = float(cfg["s"])
        center = tuple(float(c) for c in cfg["peaks"][0])
        bp = BubbleParams(float(pc["lambda"]), center, FracOrder(N, s))
        u, w = bubble_source(bp), dlambda_source(bp)
        ctx = PohozaevContext(s)
        rhos = pc["rho"] if pc["rho"] is not None else [1.0]
        targets = [(center, float(r)) for r in np.atleast_1d(rhos)]
    else:
        field, s, eps = _load_solution(cfg, "pohozaev")
        u, w = field, None
        ctx = PohozaevContext(s, eps, make_potential(cfg))
        targets = []
        for c in cfg["peaks"]:
            if pc["rho"] is None:
                targets.append((tuple(c), pick_rho(c, float(cfg["delta"]), field, None, s)))
            else:
                targets.extend((tuple(c), float(r)) for r in np.atleast_1d(pc["rho"]))
    for center, rho in targets:
        reports.append(dilation_identity(u, None, center, rho, ctx))
        for a in range(N):
            reports.append(translation_identity(u, None, center, rho, a, ctx))
        if w is not None:
            reports.append(dilation_identity(u, w, center, rho, ctx))
            for a in range(N):
                reports.append(translation_identity(u, w, center, rho, a, ctx))
    worst = max(r.relative_residual for r in reports)
    path = out.json("pohozaev.json", {"reports": [r.to_dict() for r in reports], "max_relative_residual": worst, "tolerance": tol})
    if not worst <= tol:
        raise VerificationError(f"identity residual {worst:.3e} exceeds {tol:.1e} of the term scale")
    return path


def cmd_spectrum(cfg: dict) -> Path:
    out = Output(cfg, "spectrum")
    count = int(cfg["spectrum"]["count"])
    if cfg["spectrum"]["source"] == "bubble":
        s = float(cfg["s"])
        N = int(cfg["dim"])
        M = cfg["grid"]["M"] or 1024
        g = make_grid(N, float(cfg["grid"]["L"]), int(M))
        u = bubble_field(g, BubbleParams(1.0, (0.0,) * N, FracOrder(N, s)))
        eps, V = 0.0, None
    else:
        u, s, eps = _load_solution(cfg, "spectrum")
        V = make_potential(cfg)
    vals = nondegeneracy_spectrum(u, eps, V, s, count)
    rows = [[i, v, abs(v)] for i, v in enumerate(vals)]
    return out.csv("spectrum.csv", ["index", "eigenvalue", "abs"], rows, [f"min_abs={_fmt(float(np.min(np.abs(vals))))}"])


def cmd_extension_check(cfg: dict) -> Path:
    out = Output(cfg, "extension-check")
    ec = cfg["extension"]
    s, N = float(cfg["s"]), int(cfg["dim"])
    if ec["source"] == "bubble":
        g = make_grid(N, float(ec["L"]), int(ec["M"]))
        u = bubble_field(g, BubbleParams(1.0, (0.0,) * N, FracOrder(N, s)))
    else:
        g = make_grid(N, float(cfg["grid"]["L"]), int(cfg["grid"]["M"] or 1024))
        u = Field.from_function(g, lambda x: np.exp(-np.sum(x * x, axis=-1)))
    ref_field = frac_laplacian_spectral(u, s)
    n = int(ec["points"])
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1.0, 1.0, (n, N))
    ts = default_t_seq(float(ec["t0"]), int(ec["levels"]))
    rows = []
    ref = spectral_interpolate(ref_field, pts)
    scale = float(np.max(np.abs(ref)))
    for x, r in zip(pts, ref):
        lim = dtn_limit(u, x, s, ts)
        rows.append([*x, lim, r, lim - r, abs(lim - r) / scale])
    worst = max(row[-1] for row in rows)
    tol = float(cfg["tolerances"]["dtn"])
    header = [f"x{i}" for i in range(N)] + ["dtn", "frac_lap", "residual", "relative"]
    path = out.csv("extension_check.csv", header, rows, [f"max_relative={_fmt(worst)}"])
    if not worst <= tol:
        raise VerificationError(f"DtN residual {worst:.3e} exceeds {tol:.1e} of the scale")
    return path


DISPATCH = {
    "constants": cmd_constants,
    "build": cmd_build,
    "sweep": cmd_sweep,
    "pohozaev": cmd_pohozaev,
    "spectrum": cmd_spectrum,
    "extension-check": cmd_extension_check,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="peakforge", description="multi-peak solutions of a fractional Schroedinger equation")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="JSON experiment config")
    ap.add_argument("--preset", help=f"base config preset: {', '.join(sorted(PRESETS))}")
    ap.add_argument("--version", action="version", version=f"peakforge {__version__}")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args, rest = ap.parse_known_args(argv)
    try:
        cfg = resolve_config(args.config, args.preset, rest)
        result = DISPATCH[args.command](cfg)
    except ConfigError as exc:
        _say(f"config error: {exc}")
        return 1
    except VerificationError as exc:
        _say(f"verification failed: {exc}")
        return 2
    except SolverError as exc:
        _say(f"solver failed: {exc}")
        return 3
    for p in result if isinstance(result, list) else [result]:
        print(p)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
