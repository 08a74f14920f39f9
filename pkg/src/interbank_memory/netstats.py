"""Similarity, reciprocity and resampling statistics for loan networks."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import DirectedWeightedNetwork, TransactionRecord


def jaccard(g1: DirectedWeightedNetwork, g2: DirectedWeightedNetwork) -> float:
    e1, e2 = g1.edge_set, g2.edge_set
    union = e1 | e2
    if not union:
        return 1.0
    return len(e1 & e2) / len(union)


def weighted_jaccard(g1: DirectedWeightedNetwork, g2: DirectedWeightedNetwork) -> float:
    """Sum of per-link minimum weights over sum of per-link maximum weights."""
    union = g1.edge_set | g2.edge_set
    if not union:
        return 1.0
    lo = hi = 0
    for e in union:
        a, b = g1.edges.get(e, 0), g2.edges.get(e, 0)
        lo += min(a, b)
        hi += max(a, b)
    return lo / hi if hi else 1.0


@dataclass(frozen=True, eq=False)
class JaccardMatrix:
    values: np.ndarray
    mode: str

    def mean_off_diagonal(self) -> float:
        n = len(self.values)
        if n < 2:
            return float("nan")
        mask = ~np.eye(n, dtype=bool)
        return float(self.values[mask].mean())


def jaccard_matrix(networks: Sequence[DirectedWeightedNetwork], mode: str = "binary") -> JaccardMatrix:
    if mode not in ("binary", "weighted"):
        raise ValueError(f"mode must be 'binary' or 'weighted', got {mode!r}")
    fn = jaccard if mode == "binary" else weighted_jaccard
    n = len(networks)
    out = np.ones((n, n))
    for a in range(n):
        for b in range(a + 1, n):
            out[a, b] = out[b, a] = fn(networks[a], networks[b])
    return JaccardMatrix(out, mode)


@dataclass(frozen=True)
class BidirectionalStats:
    count: int
    fraction: float


def bidirectional_stats(network: DirectedWeightedNetwork) -> BidirectionalStats:
    """Reciprocated pairs, and the share of directed links that have a partner."""
    edges = network.edge_set
    count = sum(1 for a, b in edges if a < b and (b, a) in edges)
    return BidirectionalStats(count, 2 * count / len(edges) if edges else 0.0)


class ShuffleError(RuntimeError):
    pass


def strength_preserving_shuffle(
    records: Sequence[TransactionRecord],
    rng: np.random.Generator,
    max_retries: int = 100,
) -> list[TransactionRecord]:
    """Permute borrowers across a window's records, keeping lenders in place.

    Every bank keeps its number of loans granted and taken. Positions that
    end up as self-loans are repaired by swapping borrowers with another
    position for which both resulting loans are admissible.
    """
    records = list(records)
    m = len(records)
    if m < 2:
        raise ShuffleError("need at least two records to shuffle")
    lenders = np.array([r.lender for r in records])
    borrowers = np.array([r.borrower for r in records])[rng.permutation(m)]
    for k in np.flatnonzero(lenders == borrowers):
        if lenders[k] != borrowers[k]:
            continue  # fixed by an earlier swap
        for _ in range(max_retries):
            j = int(rng.integers(m))
            if lenders[k] != borrowers[j] and lenders[j] != borrowers[k]:
                break
        else:
            ok = np.flatnonzero((lenders[k] != borrowers) & (lenders != borrowers[k]))
            if len(ok) == 0:
                raise ShuffleError(f"cannot remove self-loan of bank {lenders[k]} at position {k}")
            j = int(ok[rng.integers(len(ok))])
        borrowers[k], borrowers[j] = borrowers[j], borrowers[k]
    return [replace(r, borrower=int(b)) for r, b in zip(records, borrowers)]


def _welch(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Welch statistic along the last axis; 0/0 is 0 and c/0 is +-inf."""
    nx, ny = x.shape[-1], y.shape[-1]
    num = x.mean(axis=-1) - y.mean(axis=-1)
    vx = x.var(axis=-1, ddof=1) if nx > 1 else np.zeros_like(num)
    vy = y.var(axis=-1, ddof=1) if ny > 1 else np.zeros_like(num)
    den = np.sqrt(vx / nx + vy / ny)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = num / den
        return np.where(den > 0, t, np.where(num == 0, 0.0, np.copysign(np.inf, num)))


def bootstrap_mean_test(
    sample1,
    sample2,
    replicas: int = 10_000,
    rng: np.random.Generator | int | None = None,
    chunk: int = 10_000,
) -> float:
    """Two-tailed bootstrap p-value for equal means (unequal variances).

    The null distribution of the Welch statistic comes from resampling each
    sample after shifting it to zero mean. Returns ``(1 + k) / (replicas + 1)``
    where k counts replicas at least as extreme as the observed statistic.
    """
    x = np.asarray(sample1, dtype=np.float64)
    y = np.asarray(sample2, dtype=np.float64)
    if x.size == 0 or y.size == 0:
        raise ValueError("both samples must be non-empty")
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    if x.std() == 0 and y.std() == 0:
        return 1.0 if x.mean() == y.mean() else 1.0 / (replicas + 1)
    # canonical order so that swapping the samples consumes randomness identically
    if (y.size, tuple(np.sort(y))) < (x.size, tuple(np.sort(x))):
        x, y = y, x
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    # one stream per sample, so the chunk size does not change the result
    gx, gy = (np.random.default_rng(s) for s in rng.integers(0, 2**63, size=2))
    t_obs = abs(float(_welch(x, y)))
    xc, yc = x - x.mean(), y - y.mean()
    hits = 0
    done = 0
    while done < replicas:
        b = min(chunk, replicas - done)
        xs = xc[gx.integers(0, x.size, size=(b, x.size))]
        ys = yc[gy.integers(0, y.size, size=(b, y.size))]
        # tolerance keeps exact ties (e.g. t_obs = 0) counted despite rounding
        hits += int((np.abs(_welch(xs, ys)) >= t_obs * (1 - 1e-12)).sum())
        done += b
    return (1 + hits) / (replicas + 1)
