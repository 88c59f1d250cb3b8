"""
Replaying the stability argument step by step
=============================================

A coarse grid and a fine grid of the same interval are coupled by sending
every fine cell to the center of its coarse cell. Each inequality used to
carry BM from one space to the other is evaluated on actual numbers.
"""
from pathlib import Path

from approxbm import ExperimentSpec, run_stability_replay

spec = ExperimentSpec.load(Path(__file__).parent / "data" / "interval_exp.json")
spec.s_grid = [0.5]
report = run_stability_replay(spec, 8, 64)

print(f"coupling cost delta={report.delta:.4f}, eps={report.eps:.4f}, "
      f"slack delta^2/eps^2={report.slack:.4f}")
pair = next(p for p in report.pairs if (p.K, p.L) == ("left", "right"))
print(f"pair {pair.K} / {pair.L} at s={pair.s}")
for step in pair.steps:
    print(f"  {step.name:<14} {step.lhs:10.6f} >= {step.rhs:10.6f}  {'ok' if step.holds else 'FAILS'}")
print(f"all pairs: {len(report.failures)} failing steps")
