"""Which open-loop RLNC policy gets picked as the target probability rises.

A policy splits the 25 slots between the four nested windows.  With fifteen
receivers no split gets everyone through layer 4, so low targets are met for
three layers by spending most slots on window 3, while high targets only hold
for two layers and move the slots down to window 2.
"""

import numpy as np

from idnc_video import LayeredGop, all_receivers_prob, select_policy

gop = LayeredGop((8, 3, 3, 3))
eps = np.random.default_rng(1).uniform(0.05, 0.35, size=15)

for lam in (0.2, 0.5, 0.65, 0.8, 0.95):
    z = select_policy(gop, 25, eps, lam)
    probs = [all_receivers_prob(gop, z, eps, ell) for ell in range(1, 5)]
    print(f"lambda={lam:.2f} policy={z} P[all decode 1..ell] = {np.round(probs, 3).tolist()}")
