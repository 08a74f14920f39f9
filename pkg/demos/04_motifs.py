"""
Three-node motifs
=================

Count the 13 connected three-node patterns and compare their frequencies
with networks rewired at fixed in- and out-degrees.
"""

import numpy as np

from interbank_memory import DirectedWeightedNetwork
from interbank_memory.motifs import MOTIF_CLASSES, census, classify_expression, motif_significance, window_threshold

# %%
# The 13 classes, labelled as in FANMOD.
for c in MOTIF_CLASSES:
    print(f"{c.label:4d}  {c.name}")

# %%
# Plant ten reciprocal triangles in sparse one-way noise.
rng = np.random.default_rng(0)
edges = set()
for t in range(10):
    a, b, c = 3 * t, 3 * t + 1, 3 * t + 2
    edges |= {(a, b), (b, a), (b, c), (c, b), (a, c), (c, a)}
while len(edges) < 60 + 50:
    a, b = (int(x) for x in rng.choice(30, 2, replace=False))
    if (b, a) not in edges:
        edges.add((a, b))
net = DirectedWeightedNetwork.from_edges(sorted(edges))
print(census(net).as_dict())

# %%
thr = window_threshold(44)
sig = motif_significance(net, samples=300, rng=1, alpha=thr)
for lab, tag, p_over in zip((c.label for c in MOTIF_CLASSES), sig.tags, sig.p_over):
    print(f"{lab:4d} {tag:7s} p_over={p_over:.3f}")

# %%
# Tallies over windows re-tag each window at 0.01 / (13 * n_windows).
print(classify_expression([sig, sig], n_windows=2)[238])
