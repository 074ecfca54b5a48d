"""Effect of the expansion threshold on the worst and average receiver.

Fifteen receivers with erasure rates in [0.05, 0.35], a GOP of 8+3+3+3
packets and 25 slots.  Higher thresholds keep the window small for longer,
trading average quality for the worst receiver's base layers.  Pass a run
count as the first argument (default 200; the acceptance suite uses 1000).
"""

import sys
from dataclasses import replace

from idnc_video import SimConfig, monte_carlo

runs = int(sys.argv[1]) if len(sys.argv) > 1 else 200
base = SimConfig(runs=runs, seed=7)

print(f"{'scheduler':<12}{'lambda':>7}{'min %':>14}{'mean %':>14}   decoded-layer histogram (%)")
rows = [("ew-idnc", lam) for lam in (0.2, 0.35, 0.5, 0.65, 0.8, 0.95)]
rows += [("now-idnc", None), ("max-clique", None), ("ew-rlnc", 0.65), ("ew-rlnc", 0.95)]
for name, lam in rows:
    cfg = replace(base, scheduler=name, lam=lam if lam is not None else base.lam)
    r = monte_carlo(cfg)
    hist = " ".join(f"{h:5.1f}" for h in r.histogram_pct)
    lam_s = "" if lam is None else f"{lam:.2f}"
    print(
        f"{name:<12}{lam_s:>7}{r.min_pct_mean:>8.1f} ±{r.min_pct_se:4.1f}"
        f"{r.mean_pct_mean:>8.1f} ±{r.mean_pct_se:4.1f}   {hist}"
    )
