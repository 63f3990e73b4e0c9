"""Φ on the thinning isosceles triangles τ_a together with the ellipse sandwich."""

import sys

from aniso_torsion import ExperimentConfig, run_triangle_limit

out = sys.argv[1] if len(sys.argv) > 1 else "results"
cfg = ExperimentConfig(a_tri=(0.5, 0.4, 0.3, 0.2, 0.15, 0.1, 0.05, 0.03), out=out)
rows, summary = run_triangle_limit(cfg)

print(f"{'a':>5} {'nodes':>7} {'Phi':>8} {'Phi-1/3':>9} {'M(E_a)':>10} {'M':>10} {'R^2/2':>10} {'ratio':>7}")
for r in rows:
    print(
        f"{r['a']:>5g} {r['n_nodes']:>7} {r['Phi']:8.5f} {r['Phi_excess']:9.2e} {r['M_ellipse']:10.3e}"
        f" {r['M']:10.3e} {r['R2_half']:10.3e} {r['sandwich_ratio']:7.4f}"
    )
print({k: v for k, v in summary.items() if k != "experiment"})
