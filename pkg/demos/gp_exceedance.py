"""
Posterior exceedance probabilities
==================================

The learner never looks at the GP mean alone: it thresholds the probability
that the measure exceeds a level.  Here is that probability along a 1-D
slice as data arrives.
"""

import numpy as np

from viability.gp import KernelParams, fit, prob_exceeds

kernel = KernelParams((0.2,), 1.0, smoothness=2.5)
x = np.array([[0.1], [0.4], [0.5]])
y = np.array([1.0, 0.8, -0.2])
grid = np.linspace(0, 1, 11)[:, None]

for n in range(len(x) + 1):
    post = fit(x[:n], y[:n], kernel, 1e-3, prior_mean=0.5)
    p = prob_exceeds(post, grid, 0.0)
    print(f"{n} points:", " ".join(f"{v:.2f}" for v in p))

# far from data the probability returns to the prior value P[N(0.5, 1) > 0]
print("prior value:", round(float(prob_exceeds(fit(x[:0], y[:0], kernel, 1e-3, 0.5), [0.9], 0.0)), 4))
