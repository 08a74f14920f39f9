"""
From a transaction log to a calibrated model
============================================

Read a log, validate it, calibrate the model on its realised quotas, and
compare validated-link counts between data and model.
"""

import io

import numpy as np

from interbank_memory import LA, ModelParams, build_network, extract_profiles, parse_transactions, run_simulation
from interbank_memory.netstats import bootstrap_mean_test
from interbank_memory.svn import validate_window

# A stand-in log: two banks with a standing relationship plus random traffic.
rng = np.random.default_rng(4)
lines = ["window,lender,borrower,side,volume"]
for win in range(6):
    for _ in range(40):
        lines.append(f"{win},B01,B02,S,{rng.uniform(1, 50):.1f}")
    for _ in range(400):
        a, b = rng.choice(30, 2, replace=False)
        lines.append(f"{win},B{a + 3:02d},B{b + 3:02d},{'S' if rng.random() < 0.7 else 'B'},")
records, dictionary = parse_transactions(io.StringIO("\n".join(lines) + "\n"))
print(len(records), "records,", len(dictionary), "banks")


def validated_counts(recs):
    return [validate_window(build_network(recs, w, LA), 0.01).n_validated for w in range(6)]


data = validated_counts(records)
print("data  validated links per window:", data)

# %%
# The model reuses each bank's realised quotas per window.
profiles = extract_profiles(records)
model = validated_counts(run_simulation(profiles, ModelParams(w=1.0, seed=0)).records)
print("model validated links per window:", model)
print("bootstrap p-value for equal means:", bootstrap_mean_test(data, model, replicas=5000, rng=0))

# %%
lender, borrower = dictionary.id("B01"), dictionary.id("B02")
val = validate_window(build_network(records, 0, LA), 0.01)
print("B01 -> B02 validated in window 0:", (lender, borrower) in val.over_links)
