"""Experiment drivers: thinning sequences, the bound matrix, solver convergence.

Every driver returns a list of flat row dicts (one per case, in a fixed
order) and, when ``config.out`` is set, writes a CSV table and a JSON
summary there.  Failed solves become rows with ``status`` set to the error.
"""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .anisotropy import parse_norm, wulff_shape
from .convex_geometry import (
    anisotropic_inradius,
    henrot_parameters,
    make_henrot_triangle,
    make_rectangle,
    make_square,
    make_thinning_rectangle,
    random_convex_body,
)
from .errors import BadParameter, TorsionError
from .estimates import evaluate, psi_bounds, summarise, write_json, write_reports_csv
from .mesh import column_mesh, graded_stations, refine, triangulate
from .torsion import SolverOptions, exact_wulff_rigidity, solve_torsion

log = logging.getLogger(__name__)

DEFAULT_NORMS = ("euclidean", "quad:q11=1,q12=0,q22=4", "rot:angle=0.6,base=quad:q11=1,q12=0,q22=3")
DEFAULT_SHAPES = ("wulff", "square", "rectangle", "random", "henrot")


@dataclass
class ExperimentConfig:
    experiment: str = "bound-matrix"
    norms: tuple = DEFAULT_NORMS
    p: tuple = (1.5, 2.0, 3.0)
    shapes: tuple = DEFAULT_SHAPES
    eps: tuple = (0.2, 0.1, 0.05, 0.02)
    a_rect: float = 1.0
    a_tri: tuple = (0.3, 0.15, 0.05)
    henrot_a: float = 0.3
    # mesh size: bound-matrix -> fraction of 2|Ω|/P; thin sequences -> fraction
    # of the cross width; convergence -> absolute on the unit Wulff shape
    h: float | None = None
    levels: int = 3
    max_aspect: float = 32.0
    seed: int = 7
    tol: float = 1e-9
    delta: float | None = None
    max_iters: int = 200
    continuation: bool = True
    slack: float = 2e-2
    p_tol: float = 5e-3
    sv_tol: float = 1e-2
    workers: int = 1
    out: str | None = None

    DEFAULT_H = {"bound-matrix": 0.025, "rect-limit": 1 / 32, "triangle-limit": 1 / 32, "convergence": 0.1}

    @property
    def mesh_h(self):
        return self.h if self.h is not None else self.DEFAULT_H.get(self.experiment, 0.05)

    def solver_options(self):
        return SolverOptions(
            tol=self.tol, delta=self.delta, max_iters=self.max_iters, continuation=self.continuation
        )

    def validate(self):
        """Fail fast on anything a later solve would reject."""
        if self.experiment not in self.DEFAULT_H:
            raise BadParameter(f"unknown experiment {self.experiment!r}")
        for n in self.norms:
            parse_norm(n)
        if not self.p or any(not (pk > 1.0 and math.isfinite(pk)) for pk in self.p):
            raise BadParameter(f"every p must lie in (1, inf), got {self.p}")
        if not 0.0 < self.mesh_h < 1.0 and self.experiment != "convergence":
            raise BadParameter("relative h must lie in (0, 1)")
        if self.mesh_h <= 0.0:
            raise BadParameter("h must be positive")
        if self.experiment == "rect-limit":
            if any(e >= self.a_rect or e <= 0 for e in self.eps):
                raise BadParameter("every eps must lie in (0, a)")
            if list(self.eps) != sorted(self.eps, reverse=True):
                raise BadParameter("eps list must be decreasing")
        if self.experiment == "triangle-limit":
            for a in self.a_tri:
                henrot_parameters(a)
        if self.experiment == "bound-matrix":
            unknown = set(self.shapes) - set(DEFAULT_SHAPES)
            if unknown:
                raise BadParameter(f"unknown shapes {sorted(unknown)}")
            henrot_parameters(self.henrot_a)
        if self.levels < 1 or self.workers < 1:
            raise BadParameter("levels and workers must be positive")
        if not (self.tol > 0 and self.max_iters > 0):
            raise BadParameter("tol and max_iters must be positive")
        return self

    @classmethod
    def from_file(cls, path, **overrides):
        """Read ``key = value`` lines (``#`` comments); ``overrides`` win."""
        values = {}
        for ln in Path(path).read_text().splitlines():
            ln = ln.split("#", 1)[0].strip()
            if not ln:
                continue
            if "=" not in ln:
                raise BadParameter(f"{path}: expected key = value, got {ln!r}")
            k, v = (s.strip() for s in ln.split("=", 1))
            values[k.replace("-", "_")] = v
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_strings(values)

    @classmethod
    def from_strings(cls, values):
        kinds = {f.name: f.default for f in fields(cls)}
        out = {}
        for k, v in values.items():
            if k not in kinds:
                raise BadParameter(f"unknown config key {k!r}")
            out[k] = _coerce(k, v, kinds[k])
        return cls(**out)


def _coerce(key, value, default):
    try:
        return _coerce_value(key, value, default)
    except ValueError as exc:
        raise BadParameter(f"{key}: cannot parse {value!r}") from exc


def _coerce_value(key, value, default):
    if not isinstance(value, str):
        return tuple(value) if isinstance(value, list) else value
    if key in ("norms", "shapes"):
        return tuple(s.strip() for s in value.split(";") if s.strip())
    if isinstance(default, str) or key == "out":
        return value
    if isinstance(default, tuple):
        return tuple(float(s) for s in value.replace(";", ",").split(",") if s.strip())
    if isinstance(default, bool):
        if value.lower() in ("on", "true", "yes", "1"):
            return True
        if value.lower() in ("off", "false", "no", "0"):
            return False
        raise ValueError(value)
    if isinstance(default, int):
        return int(value)
    if value.lower() == "none":
        return None
    return float(value)


# -- helpers ------------------------------------------------------------------------


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def _emit(rows, summary, cfg, stem, columns=None):
    if cfg.out is None:
        return
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_reports_csv(rows, out / f"{stem}.csv", columns=columns, comment=f"experiment={stem} seed={cfg.seed}")
    write_json(summary, out / f"{stem}.json")
    _write_plot_data(rows, out / f"{stem}.dat", columns)


def _write_plot_data(rows, path, columns):
    """Whitespace-separated numeric columns for gnuplot."""
    cols = [c for c in (columns or list(rows[0]) if rows else []) if all(_numeric(r.get(c)) for r in rows)]
    if not cols:
        return
    lines = ["# " + " ".join(cols)]
    lines += [" ".join(repr(float(r[c])) for c in cols) for r in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def _numeric(v):
    return isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)


def _inradius_scale(body):
    return 2.0 * body.area / body.perimeter


def make_shape(name, norm, cfg):
    if name == "wulff":
        return wulff_shape(norm, 1.0, n_vertices=720)
    if name == "square":
        return make_square(1.0)
    if name == "rectangle":
        return make_rectangle(2.0, 0.5, name="rectangle(4:1)")
    if name == "random":
        return random_convex_body(seed=cfg.seed)
    if name == "henrot":
        return make_henrot_triangle(cfg.henrot_a)[0]
    raise BadParameter(f"unknown shape {name!r}")


# -- bound matrix ---------------------------------------------------------------------


def _matrix_mesh(shape, body, cfg):
    if shape == "henrot":
        # elongated: structured columns keep the node count near 1e4
        return henrot_mesh(cfg.henrot_a, cfg.mesh_h, max_aspect=4.0)[2]
    return triangulate(body, cfg.mesh_h * _inradius_scale(body))


def _bound_case(args):
    cfg, shape, norm_spec, p = args
    norm = parse_norm(norm_spec)
    body = make_shape(shape, norm, cfg)
    base = {"shape": shape, "body": body.name, "norm": norm.name, "p": p}
    try:
        t0 = time.perf_counter()
        mesh = _matrix_mesh(shape, body, cfg)
        sol = solve_torsion(mesh, norm, p, cfg.solver_options())
        R_F, centre = anisotropic_inradius(body, norm)
        rep = evaluate(sol, body, R_F, slack=cfg.slack, p_tol=cfg.p_tol, sv_tol=cfg.sv_tol)
        if shape == "wulff":
            lo = psi_bounds(p)[0]
            rep.extra["wulff_psi_rel"] = rep.Psi / lo - 1.0
            m_lo = R_F ** sol.q / (sol.q * 2 ** (sol.q - 1.0))
            rep.extra["wulff_M_rel"] = sol.M / m_lo - 1.0
            rep.extra["wulff_gauge_rel"] = 1.0 - rep.extra["gauge_T"] / sol.T
        # informational: argmax of u against the inradius centre
        rep.extra["argmax_offset"] = float(np.linalg.norm(sol.x_max - centre)) / mesh.h
        rep.extra["status"] = "ok"
        log.info("%s %s p=%g: %.1fs", body.name, norm.name, p, time.perf_counter() - t0)
        return {**base, **rep.record(), "shape": shape}, rep
    except TorsionError as exc:
        return {**base, "status": f"{type(exc).__name__}: {exc}", "ok": False}, None


def run_bound_matrix(cfg: ExperimentConfig):
    """All estimates over shapes × norms × p.  Returns ``(rows, summary)``."""
    cfg = replace(cfg, experiment="bound-matrix").validate()
    cases = [(cfg, s, n, float(p)) for n in cfg.norms for s in cfg.shapes for p in cfg.p]
    t0 = time.perf_counter()
    results = _map(_bound_case, cases, cfg.workers)
    rows = [r for r, _ in results]
    reports = [rep for _, rep in results if rep is not None]
    summary = summarise(reports)
    errors = [r for r in rows if r.get("status") != "ok"]
    summary["errors"] = [{"body": r["body"], "norm": r["norm"], "p": r["p"], "status": r["status"]} for r in errors]
    summary["ok"] = summary["ok"] and not errors
    summary["rows"] = len(rows)
    summary["seed"] = cfg.seed
    summary["h_relative"] = cfg.mesh_h
    # timing lives in the summary only, so CSV bodies are reproducible byte for byte
    summary["seconds"] = time.perf_counter() - t0
    _emit(rows, summary, cfg, "bound_matrix")
    return rows, summary


# -- thinning rectangles -------------------------------------------------------------------


def rectangle_mesh(eps, a, rel_h, max_aspect=32.0):
    """Column mesh of ]-ε,ε[×]-a,a[ with ~1/rel_h cells across the short side."""
    ny = max(2, 2 * math.ceil(0.5 / rel_h))
    body = make_thinning_rectangle(eps, a)
    st = graded_stations(-a, a, lambda y: 2.0 * eps, ny, max_aspect=max_aspect)
    return body, column_mesh(body, st, ny, axis=1)


def _rect_case(args):
    cfg, norm_spec, p, eps = args
    norm = parse_norm(norm_spec)
    q = p / (p - 1.0)
    row = {"norm": norm.name, "p": p, "eps": eps, "a": cfg.a_rect, "limit": 1.0 / (q + 1.0)}
    try:
        body, mesh = rectangle_mesh(eps, cfg.a_rect, cfg.mesh_h, cfg.max_aspect)
        sol = solve_torsion(mesh, norm, p, cfg.solver_options())
        R_F, _ = anisotropic_inradius(body, norm)
        psi = sol.T / (body.area * R_F**q)
        row.update(
            n_nodes=mesh.n_nodes,
            T=sol.T,
            M=sol.M,
            R_F=R_F,
            Psi=psi,
            deficit=1.0 / (q + 1.0) - psi,
            status="ok",
        )
    except TorsionError as exc:
        row["status"] = f"{type(exc).__name__}: {exc}"
    return row


def run_rectangle_limit(cfg: ExperimentConfig):
    """Ψ(Ω_ε) on ]-ε,ε[×]-a,a[ as ε decreases; the deficit 1/(q+1) - Ψ should shrink."""
    cfg = replace(cfg, experiment="rect-limit").validate()
    cases = [(cfg, n, float(p), float(e)) for n in cfg.norms for p in cfg.p for e in cfg.eps]
    rows = _map(_rect_case, cases, cfg.workers)
    groups = {}
    for r in rows:
        groups.setdefault((r["norm"], r["p"]), []).append(r)
    checks = []
    for (n, p), rs in groups.items():
        ok = all(r["status"] == "ok" for r in rs)
        d = [r.get("deficit", math.nan) for r in rs]
        checks.append(
            {
                "norm": n,
                "p": p,
                "deficit_positive": ok and all(x > 0 for x in d),
                "deficit_decreasing": ok and all(x > y for x, y in zip(d, d[1:])),
                "final_Psi": rs[-1].get("Psi", math.nan),
            }
        )
    summary = {
        "experiment": "rect-limit",
        "groups": checks,
        "ok": all(c["deficit_positive"] and c["deficit_decreasing"] for c in checks),
    }
    cols = ["norm", "p", "eps", "a", "n_nodes", "T", "M", "R_F", "Psi", "limit", "deficit", "status"]
    _emit(rows, summary, cfg, "rect_limit", cols)
    return rows, summary


# -- thinning triangles ----------------------------------------------------------------------


def henrot_mesh(a, rel_h, max_aspect=32.0):
    """Column mesh of τ_a with ~1/rel_h cells across every vertical chord."""
    ny = max(2, 2 * math.ceil(0.5 / rel_h))
    par = henrot_parameters(a)
    tau, ellipse = make_henrot_triangle(a)
    hb, ht = par["half_base"], par["height"]
    st = graded_stations(
        -hb, hb, lambda x: ht * max(0.0, 1.0 - abs(x) / hb), ny,
        features=(0.0,), max_aspect=max_aspect, floor=0.5 * ht / ny,
    )
    return tau, ellipse, column_mesh(tau, st, ny)


def _tri_case(args):
    cfg, a = args
    par = henrot_parameters(a)
    m_e = par["ellipse_max"]
    R = par["inradius"]
    b, h = 2.0 * par["half_base"], par["height"]
    row = {
        "a": a,
        "area": par["area"],
        "perimeter": par["perimeter"],
        "R": R,
        "M_ellipse": m_e,
        "R2_half": R * R / 2.0,
        "sandwich_ratio": R * R / (2.0 * m_e),
        # as printed in the source example, with sqrt(2h² + b²) in place of the perimeter leg
        "sandwich_ratio_printed": (b * h / (b + math.sqrt(2 * h * h + b * b))) ** 2 / (2.0 * m_e),
    }
    try:
        tau, _, mesh = henrot_mesh(a, cfg.mesh_h, cfg.max_aspect)
        sol = solve_torsion(mesh, parse_norm("euclidean"), 2.0, cfg.solver_options())
        R_lp, _ = anisotropic_inradius(tau, parse_norm("euclidean"))
        phi = sol.T / (tau.area * sol.M)
        row.update(
            n_nodes=mesh.n_nodes,
            R_lp=R_lp,
            T=sol.T,
            M=sol.M,
            Phi=phi,
            Phi_excess=phi - 1.0 / 3.0,
            rigidity_ratio=sol.T * par["perimeter"] ** 2 / par["area"] ** 3,
            sandwich_ok=bool(m_e * (1 - cfg.slack) <= sol.M <= R * R / 2.0 * (1 + cfg.slack)),
            status="ok",
        )
    except TorsionError as exc:
        row["status"] = f"{type(exc).__name__}: {exc}"
    return row


def run_triangle_limit(cfg: ExperimentConfig):
    """Φ(τ_a) for the thinning isosceles triangles (euclidean, p = 2)."""
    cfg = replace(cfg, experiment="triangle-limit", norms=("euclidean",), p=(2.0,)).validate()
    cases = [(cfg, float(a)) for a in cfg.a_tri]
    rows = _map(_tri_case, cases, cfg.workers)
    ok_rows = all(r["status"] == "ok" for r in rows)
    phis = [r.get("Phi", math.nan) for r in rows]
    order = np.argsort([-r["a"] for r in rows])
    phis_sorted = [phis[i] for i in order]
    summary = {
        "experiment": "triangle-limit",
        "Phi_decreasing": ok_rows and all(x > y for x, y in zip(phis_sorted, phis_sorted[1:])),
        "Phi_above_third": ok_rows and all(x >= 1.0 / 3.0 - 0.01 for x in phis),
        "sandwich_ok": ok_rows and all(r["sandwich_ok"] for r in rows),
    }
    summary["ok"] = summary["Phi_decreasing"] and summary["Phi_above_third"] and summary["sandwich_ok"]
    cols = [
        "a", "n_nodes", "area", "perimeter", "R", "R_lp", "T", "M", "Phi", "Phi_excess",
        "M_ellipse", "R2_half", "sandwich_ratio", "sandwich_ratio_printed", "rigidity_ratio",
        "sandwich_ok", "status",
    ]
    _emit(rows, summary, cfg, "triangle_limit", cols)
    return rows, summary


# -- convergence -----------------------------------------------------------------------------


def run_convergence(cfg: ExperimentConfig):
    """T_h on nested Wulff meshes h, h/2, ... against the closed form."""
    cfg = replace(cfg, experiment="convergence").validate()
    rows = []
    checks = []
    for spec in cfg.norms:
        norm = parse_norm(spec)
        body = wulff_shape(norm, 1.0, n_vertices=720)
        for p in cfg.p:
            exact = exact_wulff_rigidity(norm, 1.0, p, body.area)
            mesh = triangulate(body, cfg.mesh_h)
            errs, ts = [], []
            for level in range(cfg.levels):
                if level:
                    mesh = refine(mesh)
                sol = solve_torsion(mesh, norm, float(p), cfg.solver_options())
                err = abs(sol.T - exact) / exact
                order = math.log2(errs[-1] / err) if errs and err > 0 else math.nan
                errs.append(err)
                ts.append(sol.T)
                rows.append(
                    {
                        "norm": norm.name, "p": float(p), "level": level, "h": mesh.h,
                        "n_nodes": mesh.n_nodes, "T": sol.T, "T_exact": exact,
                        "rel_error": err, "order": order,
                        "iterations": sol.diagnostics["iterations"],
                    }
                )
            checks.append(
                {
                    "norm": norm.name,
                    "p": float(p),
                    "monotone": all(x < y for x, y in zip(ts, ts[1:])),
                    "finest_error": errs[-1],
                    "final_order": rows[-1]["order"],
                }
            )
    summary = {"experiment": "convergence", "cases": checks, "ok": all(c["monotone"] for c in checks)}
    _emit(rows, summary, cfg, "convergence")
    return rows, summary


RUNNERS = {
    "bound-matrix": run_bound_matrix,
    "rect-limit": run_rectangle_limit,
    "triangle-limit": run_triangle_limit,
    "convergence": run_convergence,
}
