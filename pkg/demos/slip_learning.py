"""
Learning where a running model can keep running
===============================================

The spring-loaded inverted pendulum is examined once per step, at the apex.
The state is the share of the total energy stored as height; the action is
the leg angle at touchdown.  Low apexes with steep legs are infeasible
(the foot would start underground), which puts a sharp edge on the lower
part of the viable region; expect most failures there.

Run from the repository root; outputs go to out/demo_slip (about a minute).
"""

from pathlib import Path

import numpy as np

from viability.config import ExperimentConfig
from viability.dynamics import Slip
from viability.experiment import cmd_learn
from viability.render import render_run

# a single step: apex at s = 0.35 with the leg at 45 degrees comes back to itself
slip = Slip()
for alpha in (0.6, 0.7842, 0.9):
    out = slip.step(0.35, alpha)
    print(f"alpha={alpha:.4f}: next s = {out.next_state[0]:.4f} failed={out.failed} {out.reason}")

print("steep leg from a low apex:", slip.step(0.1, 0.2).reason)

out_dir = Path("out/demo_slip")
cfg = ExperimentConfig.builtin("slip").with_overrides(output_dir=out_dir)
report = cmd_learn(cfg, out_dir)
print(f"failure rate {report['failure_rate']:.3f} over {report['samples']} samples")
print(f"cautious set: precision {report['caut_precision']:.3f} recall {report['caut_recall']:.3f}")
print(f"share of failures with s < 0.25: {report['failures_bottom_quartile']:.2f}")

# where did the failures happen?
import json

records = [json.loads(line) for line in open(out_dir / "learn/trace.jsonl")]
failed = np.array([r["state"][0] for r in records if r["failed"]])
counts, edges = np.histogram(failed, bins=4, range=(0, 1))
for lo, hi, c in zip(edges[:-1], edges[1:], counts):
    print(f"  s in [{lo:.2f}, {hi:.2f}): {c} failures")

for snap in render_run(out_dir / "learn"):
    print(f"snapshot after {snap['iteration']} samples -> {snap['image']}")
