"""
Viability on a five-state toy table
===================================

Brute-force the viable set of a tiny finite system and read off the
safety measure.  State 5 is the failure state; state 4 is not a failure
yet, but every action from it crashes.
"""

import numpy as np

from viability.dynamics import ToySystem
from viability.oracle import ground_truth, longest_unviable_horizon

toy = ToySystem()
print("transition table (rows: states 1-5, columns: actions 0-2)")
print(toy.successors)

gt = ground_truth(toy)

# the viability kernel: states from which some action avoids failure forever
print("S_V =", [int(i) + 1 for i in np.flatnonzero(gt.s_viable.values)])

# Lambda(s) counts the viable actions; Lambda_Q(s, a) is Lambda at the successor
print("Lambda   =", gt.measure.values.tolist())
print("Lambda_Q =")
print(gt.q_measure.values)

# state 3 has a single way to stay alive, so it is the riskiest viable state
print("viable actions at state 3:", np.flatnonzero(gt.q_viable.values[2]).tolist())

# how many steps a trajectory can survive after leaving the viable set
print("longest unviable horizon:", longest_unviable_horizon(toy, gt.q_viable))
