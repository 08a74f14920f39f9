"""
Memory horizon and persistence
==============================

With unbounded memory the preferred partners of one window carry over to
the next, so validated networks of different windows overlap more than
when memory only reaches back one window.
"""

import numpy as np

from interbank_memory import LA, ModelParams, SyntheticSpec, build_network, gen_synthetic_profiles, run_simulation
from interbank_memory.netstats import jaccard_matrix
from interbank_memory.svn import validate_window

profiles = gen_synthetic_profiles(SyntheticSpec(n_banks=60, n_windows=8, total_la=1200, total_ba=500, seed=1))


def bonferroni_networks(records):
    return [validate_window(build_network(records, p.window, LA), 0.01).bonferroni_network() for p in profiles]


# %%
for Q in (None, 4, 1):
    vals = []
    for seed in range(3):
        res = run_simulation(profiles, ModelParams(w=1.0, Q=Q, seed=seed))
        vals.append(jaccard_matrix(bonferroni_networks(res.records)).mean_off_diagonal())
    print(f"Q={'full' if Q is None else Q:>4}: mean off-diagonal Jaccard {np.mean(vals):.3f}")

# %%
# The full matrix for one run at stronger memory; row and column are windows.
res = run_simulation(profiles, ModelParams(w=0.1, seed=0))
mat = jaccard_matrix(bonferroni_networks(res.records))
np.set_printoptions(precision=2, suppress=True)
print(mat.values)
