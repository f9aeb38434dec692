"""Train with one pen, test with another, with and without normalization.

Scenarios 4 and 5 train and test on different pens using raw levels and
lose accuracy. Scenarios 6 and 7 first convert both sides to N/mm^2 and
recover the matched-pen results. The sweep moves a growing share of
users onto the mismatched pen.

    python3 demos/04_mismatch_scenarios.py [out_dir]

The DET plot is written to out_dir (default: results/demo04).
"""

import sys
from pathlib import Path

from stylusnorm import scenarios
from stylusnorm.dataio import SyntheticConfig, synth_database
from stylusnorm.evaluation import write_det_svg

out = Path(sys.argv[1] if len(sys.argv) > 1 else "results/demo04")
out.mkdir(parents=True, exist_ok=True)

db = synth_database(SyntheticConfig(n_users=50, n_train=5, n_test=5, seed=7))
results = [scenarios.run_scenario(k, db, s=2, bits=6) for k in scenarios.TABLE_ORDER]

print(f"{'scenario':>12s} {'ident %':>8s} {'minDCF %':>9s} {'EER %':>7s}")
for r in results:
    print(f"{r.scenario:>12s} {r.identification_rate:8.1f} {r.min_dcf:9.3f} {r.eer:7.2f}")
print()
print(scenarios.results_table(results))

write_det_svg(out / "det.svg", {r.scenario: r.curve for r in results}, title="random forgeries")
print(f"DET curves written to {out / 'det.svg'}")

print("share of users tested on the other pen:")
for pt in scenarios.mismatch_sweep(db, [0, 25, 50, 75, 100], s=2, bits=6):
    print(f"  {pt.fraction:5.0f}%  ident {pt.identification_rate:5.1f}%  minDCF {pt.min_dcf:.3f}%")
