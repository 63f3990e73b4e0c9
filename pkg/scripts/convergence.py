"""Rigidity error on nested Wulff meshes against the closed form."""

import sys

from aniso_torsion import ExperimentConfig, run_convergence

out = sys.argv[1] if len(sys.argv) > 1 else "results"
cfg = ExperimentConfig(norms=("euclidean", "quad:q11=1,q12=0,q22=4", "lr:r=4,w=1,1"), levels=4, out=out)
rows, summary = run_convergence(cfg)

print(f"{'norm':<26} {'p':>4} {'h':>8} {'nodes':>7} {'rel err':>9} {'order':>6}")
for r in rows:
    print(f"{r['norm']:<26} {r['p']:>4g} {r['h']:8.4f} {r['n_nodes']:>7} {r['rel_error']:9.2e} {r['order']:6.2f}")
sys.exit(0 if summary["ok"] else 1)
