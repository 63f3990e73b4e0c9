"""Sensitivity of T to the gradient regularisation δ (halving it repeatedly)."""

from aniso_torsion import SolverOptions, make_henrot_triangle, parse_norm, random_convex_body, solve_torsion, triangulate

bodies = [random_convex_body(7), make_henrot_triangle(0.3)[0]]
norms = ["euclidean", "quad:q11=1,q12=0,q22=4", "lr:r=4,w=1,1"]

print(f"{'body':<22} {'norm':<26} {'p':>4} {'delta':>9} {'max rel change':>15}")
for body in bodies:
    mesh = triangulate(body, 0.05 * 2 * body.area / body.perimeter)
    for spec in norms:
        norm = parse_norm(spec)
        for p in (1.5, 2.0, 3.0):
            base = solve_torsion(mesh, norm, p)
            d = base.diagnostics["delta"]
            worst = max(
                abs(solve_torsion(mesh, norm, p, SolverOptions(delta=d * f)).T / base.T - 1)
                for f in (0.5, 0.25, 1e-2)
            )
            print(f"{body.name:<22} {norm.name:<26} {p:>4g} {d:9.1e} {worst:15.2e}")
