"""Ψ on the thinning rectangles ]-ε,ε[ × ]-1,1[ for every norm and p."""

import sys

from aniso_torsion import ExperimentConfig, run_rectangle_limit

out = sys.argv[1] if len(sys.argv) > 1 else "results"
cfg = ExperimentConfig(eps=(0.2, 0.1, 0.05, 0.02, 0.01), out=out)
rows, summary = run_rectangle_limit(cfg)

print(f"{'norm':<44} {'p':>4} {'eps':>6} {'nodes':>7} {'Psi':>8} {'limit':>7} {'deficit':>9}")
for r in rows:
    print(
        f"{r['norm']:<44} {r['p']:>4g} {r['eps']:>6g} {r['n_nodes']:>7} {r['Psi']:8.5f}"
        f" {r['limit']:7.4f} {r['deficit']:9.2e}"
    )
sys.exit(0 if summary["ok"] else 1)
