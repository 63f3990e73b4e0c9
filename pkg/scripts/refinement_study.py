"""Bound-matrix margins at h and h/2: genuine violations would not shrink with h."""

from aniso_torsion import ExperimentConfig, run_bound_matrix

margins = {}
for h in (0.05, 0.025):
    rows, summary = run_bound_matrix(ExperimentConfig(h=h))
    margins[h] = summary["min_margins"]
    print(f"h_rel={h}: {summary['passed']}/{summary['rows']} pass, {summary['seconds']:.0f}s")
    for f in summary["failures"]:
        print(f"  fails {f['failed']} on {f['body']} / {f['norm']} / p={f['p']:g}")

print(f"\n{'check':<18} {'h':>11} {'h/2':>11}")
for k in sorted(margins[0.05]):
    print(f"{k:<18} {margins[0.05][k]:+11.3e} {margins[0.025][k]:+11.3e}")
