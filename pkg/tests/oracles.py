"""Independent reference computations used by the test-suite."""

from __future__ import annotations

import itertools
from fractions import Fraction
from math import comb

import numpy as np
from scipy import stats

from interbank_memory.core import DirectedWeightedNetwork


def exact_pmf(x: int, N: int, nl: int, nb: int) -> Fraction:
    if x < max(0, nl + nb - N) or x > min(nl, nb):
        return Fraction(0)
    return Fraction(comb(nl, x) * comb(N - nl, nb - x), comb(N, nb))


def exact_right(n: int, N: int, nl: int, nb: int) -> Fraction:
    return sum((exact_pmf(x, N, nl, nb) for x in range(max(n, 0), min(nl, nb) + 1)), Fraction(0))


def exact_left(n: int, N: int, nl: int, nb: int) -> Fraction:
    return sum((exact_pmf(x, N, nl, nb) for x in range(0, min(n, nl, nb) + 1)), Fraction(0))


def urn_draws(N: int, nl: int, nb: int, draws: int, rng: np.random.Generator) -> np.ndarray:
    """Count of i's loans among j's n_b partners when n_b loans are drawn from an urn.

    The urn holds N balls, n_l of them marked as lent by i; each draw uses an
    explicit shuffled urn rather than a hypergeometric sampler.
    """
    urn = np.zeros(N, dtype=bool)
    urn[:nl] = True
    keys = rng.random((draws, N))
    chosen = np.argsort(keys, axis=1)[:, :nb]
    return urn[chosen].sum(axis=1)


def brute_census(network: DirectedWeightedNetwork) -> dict[int, int]:
    """Induced 3-node subgraph classes over all node triples, by canonical min code."""
    nodes = sorted(network.nodes)
    edges = network.edge_set
    perms = list(itertools.permutations(range(3)))
    out: dict[int, int] = {}
    for tri in itertools.combinations(nodes, 3):
        present = [(a, b) for a in range(3) for b in range(3) if a != b and (tri[a], tri[b]) in edges]
        und = {frozenset(e) for e in present}
        if len(und) < 2:
            continue
        code = min(sum(1 << (8 - 3 * p[a] - p[b]) for a, b in present) for p in perms)
        out[code] = out.get(code, 0) + 1
    return out


def quasi_independence_chisquare(table: np.ndarray, iters: int = 500):
    """Pearson test of quasi-independence with a structurally zero diagonal.

    Rows are lenders and columns borrowers over the same bank universe;
    expected counts come from iterative proportional fitting to the margins.
    Returns (statistic, dof, p-value).
    """
    table = np.asarray(table, dtype=np.float64)
    rows = table.sum(axis=1)
    cols = table.sum(axis=0)
    active_r = rows > 0
    active_c = cols > 0
    t = table[np.ix_(active_r, active_c)]
    rows, cols = rows[active_r], cols[active_c]
    ids_r = np.flatnonzero(active_r)
    ids_c = np.flatnonzero(active_c)
    mask = ids_r[:, None] != ids_c[None, :]
    exp = mask.astype(np.float64)
    for _ in range(iters):
        exp *= (rows / exp.sum(axis=1))[:, None]
        exp *= (cols / exp.sum(axis=0))[None, :]
    stat = float((((t - exp) ** 2)[mask] / exp[mask]).sum())
    zeros = int((~mask).sum())
    dof = (len(rows) - 1) * (len(cols) - 1) - zeros
    return stat, dof, float(stats.chi2.sf(stat, dof))


def pair_table(network: DirectedWeightedNetwork, banks) -> np.ndarray:
    idx = {b: k for k, b in enumerate(banks)}
    out = np.zeros((len(banks), len(banks)))
    for (a, b), wgt in network.edges.items():
        out[idx[a], idx[b]] = wgt
    return out
