import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from interbank_memory.core import DirectedWeightedNetwork
from interbank_memory.motifs import (
    LABELS,
    MOTIF_CLASSES,
    N_CLASSES,
    canonical_class,
    census,
    class_by_label,
    classify_expression,
    degree_preserving_rewire,
    encode,
    motif_significance,
    window_threshold,
)

from oracles import brute_census


def adj(edges):
    a = np.zeros((3, 3), dtype=bool)
    for r, c in edges:
        a[r, c] = True
    return a


def random_network(n, p, rng):
    edges = [(a, b) for a in range(n) for b in range(n) if a != b and rng.random() < p]
    return DirectedWeightedNetwork.from_edges(edges, nodes=range(n))


def test_exhaustive_enumeration_has_13_classes():
    off = [(r, c) for r in range(3) for c in range(3) if r != c]
    seen = {}
    for mask in range(64):
        edges = [off[k] for k in range(6) if mask >> k & 1]
        cls = canonical_class(adj(edges))
        # an independent connectivity check: at least two of the three node pairs linked
        connected = len({frozenset(e) for e in edges}) >= 2
        assert (cls is not None) == connected
        if cls is not None:
            seen.setdefault(cls.internal_id, set()).add(mask)
    assert len(seen) == 13 == N_CLASSES == len(MOTIF_CLASSES)
    # classes are closed under relabelling: every permutation of a member maps to the same class
    for members in seen.values():
        for mask in members:
            edges = [off[k] for k in range(6) if mask >> k & 1]
            for p in itertools.permutations(range(3)):
                assert canonical_class(adj([(p[a], p[b]) for a, b in edges])).internal_id == canonical_class(adj(edges)).internal_id


def test_internal_id_is_minimal_code():
    for cls in MOTIF_CLASSES:
        codes = [encode(adj([(p[a], p[b]) for a, b in cls.edges])) for p in itertools.permutations(range(3))]
        assert cls.internal_id == min(codes)


def test_anchored_labels():
    full = adj([(a, b) for a in range(3) for b in range(3) if a != b])
    assert canonical_class(full).label == 238
    two_recip_plus_one = adj([(0, 1), (1, 0), (1, 2), (2, 1), (0, 2)])
    assert canonical_class(two_recip_plus_one).label == 174
    assert class_by_label(174).anchored and class_by_label(238).anchored
    assert len(set(LABELS)) == 13


def test_disconnected_and_bad_input():
    assert canonical_class(adj([(0, 1)])) is None
    assert canonical_class(adj([])) is None
    bad = adj([(0, 1)])
    bad[2, 2] = True
    with pytest.raises(ValueError):
        canonical_class(bad)


def test_census_examples():
    cyc = census(DirectedWeightedNetwork.from_edges([(0, 1), (1, 2), (2, 0)]))
    assert cyc.total == 1 and cyc.count(98) == 1
    empty = census(DirectedWeightedNetwork())
    assert empty.total == 0 and (empty.counts == 0).all()
    assert np.isclose(cyc.frequencies.sum(), 1.0)


def test_census_ignores_weights():
    a = DirectedWeightedNetwork.from_edges({(0, 1): 5, (1, 2): 1, (2, 3): 9})
    assert (census(a).counts == census(a.binary()).counts).all()


@pytest.mark.parametrize("seed", range(8))
def test_census_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    net = random_network(30, rng.uniform(0.02, 0.3), rng)
    got = census(net)
    ref = brute_census(net)
    assert got.as_dict() == {c.label: ref.get(c.internal_id, 0) for c in MOTIF_CLASSES}
    assert got.total == sum(ref.values())


def test_rewire_preserves_degrees():
    rng = np.random.default_rng(0)
    net = random_network(40, 0.1, rng)
    out = degree_preserving_rewire(net, rng, swap_factor=10)
    assert out.out_degree() == net.out_degree()
    assert out.in_degree() == net.in_degree()
    assert all(a != b for a, b in out.edges)
    assert set(out.edges.values()) == {1}
    overlap = len(out.edge_set & net.edge_set) / len(net.edge_set)
    assert overlap < 1


def test_rewire_fixed_point():
    # the only swap (0->1, 1->0) -> (0->0, 1->1) would create self-loops
    net = DirectedWeightedNetwork.from_edges([(0, 1), (1, 0)])
    out = degree_preserving_rewire(net, 1, swap_factor=50)
    assert out.edge_set == net.edge_set
    sig = motif_significance(net, samples=20, rng=1)
    assert (sig.absent).all()
    assert set(sig.tags) == {"absent"}


def test_significance_on_fixed_point_network():
    # a 3-cycle plus its reverse cannot be rewired (every swap creates a loop or duplicate)
    net = DirectedWeightedNetwork.from_edges([(a, b) for a in range(3) for b in range(3) if a != b])
    sig = motif_significance(net, samples=30, rng=2)
    k = LABELS.index(238)
    assert sig.p_over[k] == 1.0 and sig.p_under[k] == 1.0
    sig1 = motif_significance(net, samples=30, rng=2, estimator="add_one")
    assert sig1.p_over[k] == 1.0
    assert (sig1.p_over >= 1 / 31).all()


def test_significance_deterministic_per_seed():
    rng = np.random.default_rng(5)
    net = random_network(25, 0.12, rng)
    a = motif_significance(net, samples=40, rng=9)
    b = motif_significance(net, samples=40, rng=9)
    assert np.array_equal(a.ensemble_counts, b.ensemble_counts)
    assert a.tags == b.tags


def test_tags_exclusive_and_absent_rule():
    rng = np.random.default_rng(6)
    net = random_network(20, 0.1, rng)
    sig = motif_significance(net, samples=50, rng=3, alpha=0.05)
    for k, tag in enumerate(sig.tags):
        assert tag in ("over", "under", "normal", "absent")
        assert (tag == "absent") == (sig.observed.counts[k] == 0 and sig.ensemble_counts[:, k].sum() == 0)


def test_threshold_and_tallies():
    assert window_threshold(44) == pytest.approx(0.01 / 572)
    assert window_threshold(44) == pytest.approx(1.748e-5, rel=1e-3)
    rng = np.random.default_rng(7)
    results = [motif_significance(random_network(15, 0.15, rng), samples=20, rng=k) for k in range(4)]
    tallies = classify_expression(results)
    assert set(tallies) == set(LABELS)
    assert all(sum(t.values()) == 4 for t in tallies.values())
    empty = [motif_significance(DirectedWeightedNetwork(), samples=5, rng=0)] * 44
    tallies = classify_expression(empty, 44)
    assert all(t == {"over": 0, "under": 0, "normal": 0, "absent": 44} for t in tallies.values())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(4, 12), st.floats(0.1, 0.6))
def test_rewire_degree_property(seed, n, p):
    rng = np.random.default_rng(seed)
    net = random_network(n, p, rng)
    out = degree_preserving_rewire(net, rng, swap_factor=5)
    assert out.out_degree() == net.out_degree() and out.in_degree() == net.in_degree()
    assert len(out.edges) == len(net.edges)
