"""
Reciprocity weighting
=====================

``lam`` mixes the memory of past loans from j to i with loans from i to j.
At ``lam=1`` only the forward flow counts; lowering it makes a bank more
likely to lend to banks that lent to it, which shows up as bidirectional
links.
"""

import numpy as np

from interbank_memory import BA, LA, ModelParams, SyntheticSpec, build_network, gen_synthetic_profiles, run_simulation
from interbank_memory.netstats import bidirectional_stats
from interbank_memory.svn import validate_window

profiles = gen_synthetic_profiles(SyntheticSpec(n_banks=60, n_windows=8, total_la=1200, total_ba=500, seed=1))

print(f"{'':12s}{'original':>22s}{'Bonferroni':>22s}")
print(f"{'':12s}{'mean':>8s}{'perc':>14s}{'mean':>8s}{'perc':>14s}")
for lam in (1.0, 0.5):
    res = run_simulation(profiles, ModelParams(w=1.0, lam=lam, seed=2))
    for side in (LA, BA):
        orig, bonf = [], []
        for p in profiles:
            net = build_network(res.records, p.window, side)
            orig.append(bidirectional_stats(net))
            bonf.append(bidirectional_stats(validate_window(net, 0.01).bonferroni_network()))
        row = f"lam={lam:g} {side.short}"
        row += f"{np.mean([s.count for s in orig]):8.1f}{100 * np.mean([s.fraction for s in orig]):13.1f}%"
        row += f"{np.mean([s.count for s in bonf]):8.2f}{100 * np.mean([s.fraction for s in bonf]):13.1f}%"
        print(row)
