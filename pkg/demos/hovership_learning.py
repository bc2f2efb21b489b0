"""
Learning the safe region of a hovering ship
===========================================

The ship hovers below a ceiling; s is the distance from the ceiling and the
action is thrust.  Gravity grows near the ground, so above a depth of
about 0.57 even full thrust cannot hold the ship.  The learner only gets to
sample the true dynamics, starting from a prior built on a wrong model with
30% weaker gravity.

Run from the repository root; outputs go to out/demo_hovership.
"""

import json
from pathlib import Path

from viability.config import ExperimentConfig
from viability.experiment import cmd_learn, cmd_oracle
from viability.render import render_run

out = Path("out/demo_hovership")
cfg = ExperimentConfig.builtin("hovership").with_overrides(output_dir=out)
print(cfg.dump())

# ground truth for scoring (about a second)
cmd_oracle(cfg, out)
summary = json.loads((out / "oracle/summary.json").read_text())
print("oracle:", summary)

report = cmd_learn(cfg, out)
print(f"failure rate {report['failure_rate']:.3f} over {report['samples']} samples")
print(f"cautious set: precision {report['caut_precision']:.3f} recall {report['caut_recall']:.3f}")
print(f"mean |Lambda_hat - Lambda| on S_V: {report['measure_error']:.4f}")

for snap in render_run(out / "learn"):
    print(f"iteration {snap['iteration']}: {snap['failures']} failures so far -> {snap['image']}")
