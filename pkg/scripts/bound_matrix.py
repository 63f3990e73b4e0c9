"""Every estimate over 3 norms x 5 shapes x p in {1.5, 2, 3}; writes results/bound_matrix.*"""

import sys

from aniso_torsion import ExperimentConfig, run_bound_matrix

out = sys.argv[1] if len(sys.argv) > 1 else "results"
rows, summary = run_bound_matrix(ExperimentConfig(out=out))

print(f"{'body':<44} {'norm':<44} {'p':>4} {'Phi':>7} {'Psi':>7} {'P/M':>9} ok")
for r in rows:
    if r["status"] != "ok":
        print(f"{r['body']:<44} {r['norm']:<44} {r['p']:>4g}  {r['status']}")
        continue
    print(
        f"{r['body']:<44} {r['norm']:<44} {r['p']:>4g} {r['Phi']:7.4f} {r['Psi']:7.4f}"
        f" {r['P_max'] / r['M']:9.1e} {r['ok']}"
    )
print(f"\n{summary['passed']}/{summary['rows']} rows pass in {summary['seconds']:.0f}s")
for k, v in sorted(summary["min_margins"].items()):
    print(f"  min margin {k:<17} {v:+.3e}")
sys.exit(0 if summary["ok"] else 1)
