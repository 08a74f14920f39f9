"""Directed 3-node motif census and significance against rewired networks."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DirectedWeightedNetwork

N_CLASSES = 13
WINDOWS_DEFAULT = 44
DEFAULT_ALPHA = 0.01 / (N_CLASSES * WINDOWS_DEFAULT)

# bit weight of adjacency entry (r, c), row-major with (0, 0) as the most significant bit
_BIT = {(r, c): 1 << (8 - 3 * r - c) for r in range(3) for c in range(3)}
_OFF_DIAG = [(r, c) for r in range(3) for c in range(3) if r != c]
_PERMS = list(itertools.permutations(range(3)))


def encode(adj) -> int:
    """9-bit row-major code of a 3x3 adjacency matrix."""
    return sum(_BIT[r, c] for r in range(3) for c in range(3) if adj[r][c])


def _edges_of(code: int) -> list[tuple[int, int]]:
    return [rc for rc in _OFF_DIAG if code & _BIT[rc]]


def _is_weakly_connected(edges) -> bool:
    und = {frozenset(e) for e in edges}
    # three nodes are connected iff at least two of the three node pairs are linked
    return len(und) >= 2


def _min_code(edges) -> int:
    return min(sum(_BIT[p[a], p[b]] for a, b in edges) for p in _PERMS)


# Display labels in the numbering used by the FANMOD tool. Two labels are
# anchored by name: 238 is the fully reciprocal triangle, 174 the triangle of
# two reciprocal links closed by a one-way link. The others are the minimal
# row-major code of their class.
_LABEL_OVERRIDES = {110: 174}
_ANCHORED = {238, 174}

_NAMES = {
    6: "out-star (a<-b->c)",
    12: "chain (a->b->c)",
    14: "out-star with one reciprocal arm",
    36: "in-star (a->b<-c)",
    38: "feed-forward loop",
    46: "reciprocal pair both pointing to the third node",
    74: "in-star with one reciprocal arm",
    78: "two reciprocal links (open)",
    98: "3-cycle",
    102: "3-cycle with one reciprocal link",
    108: "third node pointing to both ends of a reciprocal pair",
    110: "two reciprocal links closed by a one-way link",
    238: "fully reciprocal triangle",
}


@dataclass(frozen=True)
class MotifClass:
    internal_id: int
    label: int
    name: str
    anchored: bool

    @property
    def edges(self) -> list[tuple[int, int]]:
        return _edges_of(self.internal_id)


def _build_tables():
    classes = {}
    lookup = np.full(512, -1, dtype=np.int64)
    for mask in range(64):
        edges = [_OFF_DIAG[k] for k in range(6) if mask >> k & 1]
        if not _is_weakly_connected(edges):
            continue
        classes.setdefault(_min_code(edges), None)
    ordered = sorted(classes)
    index = {cid: k for k, cid in enumerate(ordered)}
    for mask in range(64):
        edges = [_OFF_DIAG[k] for k in range(6) if mask >> k & 1]
        if _is_weakly_connected(edges):
            lookup[sum(_BIT[e] for e in edges)] = index[_min_code(edges)]
    table = tuple(
        MotifClass(
            cid,
            _LABEL_OVERRIDES.get(cid, cid),
            _NAMES[cid],
            _LABEL_OVERRIDES.get(cid, cid) in _ANCHORED,
        )
        for cid in ordered
    )
    return table, lookup


MOTIF_CLASSES, _CLASS_INDEX = _build_tables()
LABELS = tuple(c.label for c in MOTIF_CLASSES)
_BY_LABEL = {c.label: k for k, c in enumerate(MOTIF_CLASSES)}


def class_by_label(label: int) -> MotifClass:
    return MOTIF_CLASSES[_BY_LABEL[label]]


def label_index(label: int) -> int:
    return _BY_LABEL[label]


def canonical_class(adjacency) -> MotifClass | None:
    """Isomorphism class of a 3-node digraph, or None when disconnected."""
    adj = np.asarray(adjacency, dtype=bool)
    if adj.shape != (3, 3):
        raise ValueError("adjacency must be 3x3")
    if adj.diagonal().any():
        raise ValueError("self-loops are not allowed in a 3-node motif")
    k = _CLASS_INDEX[encode(adj)]
    return None if k < 0 else MOTIF_CLASSES[k]


@dataclass(frozen=True, eq=False)
class MotifCensus:
    """Counts of connected induced 3-node subgraphs, ordered like ``MOTIF_CLASSES``."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        t = self.total
        return self.counts / t if t else np.zeros(N_CLASSES)

    def count(self, label: int) -> int:
        return int(self.counts[_BY_LABEL[label]])

    def as_dict(self) -> dict[int, int]:
        return {lab: int(c) for lab, c in zip(LABELS, self.counts)}


def _adjacency(network: DirectedWeightedNetwork):
    nodes = sorted(network.nodes)
    idx = {b: k for k, b in enumerate(nodes)}
    adj = np.zeros((len(nodes), len(nodes)), dtype=bool)
    for a, b in network.edges:
        adj[idx[a], idx[b]] = True
    return nodes, idx, adj


def census_adjacency(adj: np.ndarray) -> np.ndarray:
    """Class counts for a boolean adjacency matrix."""
    adj = np.asarray(adj, dtype=bool)
    und = adj | adj.T
    codes = []
    for v in range(len(adj)):
        nb = np.flatnonzero(und[v])
        if len(nb) < 2:
            continue
        iu, ju = np.triu_indices(len(nb), 1)
        u, w = nb[iu], nb[ju]
        # an open path has a unique centre; a triangle is kept at its smallest node
        keep = ~und[u, w] | (v < np.minimum(u, w))
        u, w = u[keep], w[keep]
        code = (
            (adj[v, u].astype(np.int64) << 7)
            | (adj[v, w].astype(np.int64) << 6)
            | (adj[u, v].astype(np.int64) << 5)
            | (adj[u, w].astype(np.int64) << 3)
            | (adj[w, v].astype(np.int64) << 2)
            | (adj[w, u].astype(np.int64) << 1)
        )
        codes.append(code)
    if not codes:
        return np.zeros(N_CLASSES, dtype=np.int64)
    cls = _CLASS_INDEX[np.concatenate(codes)]
    return np.bincount(cls, minlength=N_CLASSES).astype(np.int64)


def census(network: DirectedWeightedNetwork) -> MotifCensus:
    _, _, adj = _adjacency(network)
    return MotifCensus(census_adjacency(adj))


def _rewire_edges(src: list[int], dst: list[int], n: int, rng: np.random.Generator, swap_factor: int) -> None:
    """In-place double-edge swaps on parallel edge lists."""
    m = len(src)
    if m < 2:
        return
    present = {s * n + d for s, d in zip(src, dst)}
    picks = rng.integers(0, m, size=(swap_factor * m, 2)).tolist()
    for a, b in picks:
        if a == b:
            continue
        s1, d1, s2, d2 = src[a], dst[a], src[b], dst[b]
        if s1 == d2 or s2 == d1:
            continue
        k1, k2 = s1 * n + d2, s2 * n + d1
        if k1 in present or k2 in present:
            continue
        present.discard(s1 * n + d1)
        present.discard(s2 * n + d2)
        present.add(k1)
        present.add(k2)
        dst[a], dst[b] = d2, d1


def _as_rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def degree_preserving_rewire(
    network: DirectedWeightedNetwork,
    rng: np.random.Generator | int | None = None,
    swap_factor: int = 10,
) -> DirectedWeightedNetwork:
    """Binary copy of ``network`` after ``swap_factor * |E|`` attempted swaps.

    A swap replaces (a->b, c->d) by (a->d, c->b) and is skipped when it would
    create a self-loop or a duplicate edge, so every node keeps its in- and
    out-degree.
    """
    rng = _as_rng(rng)
    nodes, idx, _ = _adjacency(network)
    src = [idx[a] for a, _ in network.edges]
    dst = [idx[b] for _, b in network.edges]
    _rewire_edges(src, dst, len(nodes), rng, swap_factor)
    return DirectedWeightedNetwork(frozenset(nodes), {(nodes[s], nodes[d]): 1 for s, d in zip(src, dst)})


def rewired_ensemble(
    network: DirectedWeightedNetwork,
    samples: int,
    swap_factor: int = 10,
    rng: np.random.Generator | int | None = None,
):
    """Yield ``samples`` rewired adjacency matrices (nodes in sorted order).

    Members draw from generators spawned off one seed sequence, so each
    member depends only on the seed and its index.
    """
    rng = _as_rng(rng)
    base = np.random.SeedSequence(int(rng.integers(0, 2**63)))
    nodes, idx, _ = _adjacency(network)
    n = len(nodes)
    src0 = [idx[a] for a, _ in network.edges]
    dst0 = [idx[b] for _, b in network.edges]
    for child in base.spawn(samples):
        src, dst = list(src0), list(dst0)
        _rewire_edges(src, dst, n, np.random.default_rng(child), swap_factor)
        a = np.zeros((n, n), dtype=bool)
        if src:
            a[src, dst] = True
        yield a


@dataclass(frozen=True, eq=False)
class MotifSignificance:
    observed: MotifCensus
    ensemble_counts: np.ndarray  # (samples, 13)
    ensemble_mean: np.ndarray
    ensemble_std: np.ndarray
    p_over: np.ndarray
    p_under: np.ndarray
    tags: tuple[str, ...]
    alpha: float
    estimator: str

    @property
    def samples(self) -> int:
        return len(self.ensemble_counts)

    @property
    def absent(self) -> np.ndarray:
        return (self.observed.counts == 0) & (self.ensemble_counts.sum(axis=0) == 0)

    def tag(self, label: int) -> str:
        return self.tags[_BY_LABEL[label]]

    def retag(self, alpha: float) -> tuple[str, ...]:
        return _tags(self.p_over, self.p_under, self.absent, alpha)


def _tags(p_over, p_under, absent, alpha) -> tuple[str, ...]:
    out = []
    for po, pu, ab in zip(p_over, p_under, absent):
        if ab:
            out.append("absent")
        elif po < alpha:
            out.append("over")
        elif pu < alpha:
            out.append("under")
        else:
            out.append("normal")
    return tuple(out)


def _frequencies(counts: np.ndarray) -> np.ndarray:
    tot = counts.sum(axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, counts / np.where(tot > 0, tot, 1), 0.0)


def motif_significance(
    network: DirectedWeightedNetwork,
    samples: int = 1000,
    swap_factor: int = 10,
    rng: np.random.Generator | int | None = None,
    alpha: float = DEFAULT_ALPHA,
    estimator: str = "empirical",
) -> MotifSignificance:
    """Compare motif frequencies with a degree-preserving rewired ensemble.

    ``estimator="empirical"`` reports the plain fraction of ensemble members
    at least (at most) as extreme as the observation, as FANMOD does;
    ``"add_one"`` uses ``(1 + k) / (samples + 1)``, which is never zero.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if estimator not in ("empirical", "add_one"):
        raise ValueError(f"unknown estimator {estimator!r}")
    _, _, adj = _adjacency(network)
    observed = census_adjacency(adj)
    ens = np.empty((samples, N_CLASSES), dtype=np.int64)
    for k, member in enumerate(rewired_ensemble(network, samples, swap_factor, rng)):
        ens[k] = census_adjacency(member)
    f_obs = _frequencies(observed)
    f_ens = _frequencies(ens)
    ge = (f_ens >= f_obs).sum(axis=0)
    le = (f_ens <= f_obs).sum(axis=0)
    if estimator == "add_one":
        p_over, p_under = (1 + ge) / (samples + 1), (1 + le) / (samples + 1)
    else:
        p_over, p_under = ge / samples, le / samples
    absent = (observed == 0) & (ens.sum(axis=0) == 0)
    return MotifSignificance(
        MotifCensus(observed),
        ens,
        f_ens.mean(axis=0),
        f_ens.std(axis=0),
        p_over,
        p_under,
        _tags(p_over, p_under, absent, alpha),
        alpha,
        estimator,
    )


def window_threshold(n_windows: int, alpha: float = 0.01) -> float:
    return alpha / (N_CLASSES * n_windows)


def classify_expression(
    results: Sequence[MotifSignificance],
    n_windows: int | None = None,
    alpha: float = 0.01,
) -> dict[int, dict[str, int]]:
    """Per motif label, how many windows it is over/under/normal/absent in.

    Windows are re-tagged at ``alpha / (13 * n_windows)``.
    """
    n_windows = len(results) if n_windows is None else n_windows
    thr = window_threshold(n_windows, alpha)
    tallies = {lab: {"over": 0, "under": 0, "normal": 0, "absent": 0} for lab in LABELS}
    for res in results:
        for lab, tag in zip(LABELS, res.retag(thr)):
            tallies[lab][tag] += 1
    return tallies
