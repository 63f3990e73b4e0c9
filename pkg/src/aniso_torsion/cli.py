"""Command-line entry point: ``aniso-torsion <experiment> [options]``.

Exit status is 0 when every check of the experiment passes, 1 when some
check fails, and 2 for invalid input.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .anisotropy import parse_norm
from .convex_geometry import anisotropic_inradius, load_body
from .errors import TorsionError
from .estimates import evaluate
from .experiments import RUNNERS, ExperimentConfig
from .mesh import triangulate
from .torsion import SolverOptions, save_solution, solve_torsion


def _common(sp):
    sp.add_argument("--config", help="key = value file; flags override it")
    sp.add_argument("--norm", action="append", help="norm spec, repeatable (e.g. quad:q11=1,q12=0,q22=4)")
    sp.add_argument("--p", help="comma-separated exponents")
    sp.add_argument("--h", type=float, help="mesh size (meaning depends on the experiment)")
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--tol", type=float, help="Newton residual tolerance")
    sp.add_argument("--delta", type=float, help="gradient regularisation")
    sp.add_argument("--max-iters", type=int)
    sp.add_argument("--continuation", choices=("on", "off"))
    sp.add_argument("--workers", type=int, help="parallel processes")
    sp.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(prog="aniso-torsion", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sp = sub.add_parser("rect-limit", help="Ψ on thinning rectangles")
    _common(sp)
    sp.add_argument("--eps", help="comma-separated half-widths (decreasing)")
    sp.add_argument("--a", dest="a_rect", type=float, help="half-length")
    sp = sub.add_parser("triangle-limit", help="Φ on thinning isosceles triangles")
    _common(sp)
    sp.add_argument("--a", dest="a_tri", help="comma-separated triangle parameters in (0, 1/sqrt 2)")
    sp = sub.add_parser("bound-matrix", help="all estimates over shapes × norms × p")
    _common(sp)
    sp.add_argument("--shapes", help="semicolon-separated subset of wulff;square;rectangle;random;henrot")
    sp.add_argument("--seed", type=int, help="seed of the random convex body")
    sp = sub.add_parser("convergence", help="Wulff-shape convergence study")
    _common(sp)
    sp.add_argument("--levels", type=int, help="number of nested refinements")
    sp = sub.add_parser("solve", help="solve on one body file and export the solution")
    sp.add_argument("body", help="body file: first line nv, then nv lines 'x y'")
    sp.add_argument("--norm", default="euclidean")
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--h", type=float, required=True, help="target edge length")
    sp.add_argument("--out", required=True, help="output stem (writes .txt and .json)")
    sp.add_argument("--tol", type=float, default=1e-9)
    sp.add_argument("--delta", type=float)
    sp.add_argument("--max-iters", type=int, default=200)
    sp.add_argument("--continuation", choices=("on", "off"), default="on")
    sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def config_from_args(args) -> ExperimentConfig:
    overrides = {"experiment": args.command}
    if args.norm:
        overrides["norms"] = ";".join(args.norm)
    for key in ("p", "h", "out", "tol", "delta", "max_iters", "continuation", "workers",
                "eps", "a_rect", "a_tri", "shapes", "seed", "levels"):
        v = getattr(args, key, None)
        if v is not None:
            overrides[key] = v if isinstance(v, str) else str(v)
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig.from_strings(overrides)


def _solve(args):
    norm = parse_norm(args.norm)
    body = load_body(args.body)
    mesh = triangulate(body, args.h)
    opts = SolverOptions(
        tol=args.tol, delta=args.delta, max_iters=args.max_iters, continuation=args.continuation == "on"
    )
    sol = solve_torsion(mesh, norm, args.p, opts)
    save_solution(sol, args.out)
    R_F, _ = anisotropic_inradius(body, norm)
    rep = evaluate(sol, body, R_F)
    print(json.dumps({"T": sol.T, "M": sol.M, "R_F": R_F, "Phi": rep.Phi, "Psi": rep.Psi, "ok": rep.ok}))
    return 0 if rep.ok else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "solve":
            return _solve(args)
        cfg = config_from_args(args)
        _, summary = RUNNERS[args.command](cfg)
    except TorsionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, indent=2, default=str))
    return 0 if summary["ok"] else 1


if __name__ == "__main__":
    sys.exit(main())
