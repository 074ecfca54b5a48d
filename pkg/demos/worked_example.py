"""Two receivers, two one-packet layers, two slots left.

Receiver 0 already holds the base packet; receiver 1 holds nothing.  Sending
the base packet first protects the base layer for both; sending the
enhancement packet first serves both receivers at once but gambles the base
layer of receiver 1.
"""

import numpy as np

from idnc_video import EwIdnc, LayeredGop, NowIdnc, ew_idnc_step, post_selection_bound
from idnc_video.sim import exact_session_probabilities

F = np.array([[0, 1], [1, 1]], dtype=bool)  # True = missing
gop = LayeredGop((1, 1))
eps = [0.2, 0.2]

print("bound after sending the base packet, window 1:", post_selection_bound(F, gop, 1, 2, {1}, eps).value)
print("bound after sending the enhancement packet, window 2:", post_selection_bound(F, gop, 2, 2, {0, 1}, eps).value)

for lam in (0.9, 0.6):
    d = ew_idnc_step(F, gop, 2, lam, eps)
    print(f"lambda={lam}: window {d.window}, sends packet(s) {sorted(d.packets)}, bound {d.bound.value:.4f}")

for name, sched in [("smallest window", NowIdnc()), ("always expand", EwIdnc(0.0))]:
    p = exact_session_probabilities(F, gop, 2, eps, sched)
    print(f"{name:>15}: P[all decode layer 1] = {p[0]:.4f}, P[all decode both] = {p[1]:.4f}")
