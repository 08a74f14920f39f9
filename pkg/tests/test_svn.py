import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from interbank_memory.core import LA, DirectedWeightedNetwork
from interbank_memory.svn import (
    count_tests,
    hypergeom_pmf,
    left_tail,
    left_tail_pvalue,
    link_tests,
    right_tail,
    right_tail_pvalue,
    validate_window,
)

from oracles import exact_left, exact_pmf, exact_right, urn_draws


def test_pmf_worked_example():
    # C(4,4) C(6,1) / C(10,5) = 6/252
    assert exact_pmf(4, 10, 4, 5) == pytest.approx(6 / 252)
    assert hypergeom_pmf(4, 10, 4, 5) == pytest.approx(6 / 252, rel=1e-12)


def test_pmf_outside_support_is_zero():
    assert hypergeom_pmf(5, 10, 4, 5) == 0.0
    assert hypergeom_pmf(0, 10, 8, 5) == 0.0  # support starts at 3


@pytest.mark.parametrize("N,nl,nb", [(10, 4, 5), (20, 7, 13), (60, 31, 29), (5, 0, 3)])
def test_pmf_normalised(N, nl, nb):
    total = sum(hypergeom_pmf(x, N, nl, nb) for x in range(0, min(nl, nb) + 1))
    assert abs(total - 1.0) < 1e-12


def test_pmf_domain_errors():
    with pytest.raises(ValueError):
        hypergeom_pmf(1, 10, 11, 3)
    with pytest.raises(ValueError):
        hypergeom_pmf(1, 10, 3, -1)


def test_right_tail_examples():
    assert right_tail_pvalue(0, 10, 4, 5) == 1.0
    assert right_tail_pvalue(4, 10, 4, 5) == pytest.approx(6 / 252, rel=1e-12)
    assert right_tail_pvalue(2, 10, 4, 5) == pytest.approx(186 / 252, rel=1e-12)


def test_left_tail_examples():
    assert left_tail_pvalue(4, 10, 4, 5) == 1.0
    assert left_tail_pvalue(0, 10, 4, 5) == pytest.approx(6 / 252, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 60).flatmap(lambda N: st.tuples(st.just(N), st.integers(0, N), st.integers(0, N), st.integers(0, N))))
def test_tails_match_exact_rationals(args):
    N, nl, nb, n = args
    n = min(n, min(nl, nb))
    for got, exact in ((right_tail_pvalue(n, N, nl, nb), exact_right(n, N, nl, nb)),
                       (left_tail_pvalue(n, N, nl, nb), exact_left(n, N, nl, nb))):
        if exact == 0:
            assert got == 0
        else:
            assert abs(got - float(exact)) / float(exact) < 1e-10


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 200).flatmap(lambda N: st.tuples(st.just(N), st.integers(0, N), st.integers(0, N))))
def test_complementarity_and_monotonicity(args):
    N, nl, nb = args
    xs = np.arange(0, min(nl, nb) + 1)
    r = right_tail(xs, N, nl, nb)
    l = left_tail(xs, N, nl, nb)
    pm = np.array([hypergeom_pmf(int(x), N, nl, nb) for x in xs])
    assert np.allclose(r + l - pm, 1.0, atol=1e-12)
    assert (np.diff(r) <= 1e-15).all()


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 300).flatmap(lambda N: st.tuples(st.just(N), st.integers(0, N), st.integers(0, N))))
def test_symmetric_in_margins(args):
    N, nl, nb = args
    xs = np.arange(0, min(nl, nb) + 1)
    assert np.allclose(right_tail(xs, N, nl, nb), right_tail(xs, N, nb, nl), rtol=1e-11, atol=0)


def test_large_margins_against_scipy():
    rng = np.random.default_rng(0)
    N = 5000
    nl = rng.integers(1, 2000, 200)
    nb = rng.integers(1, 2000, 200)
    n = np.minimum(rng.integers(0, 800, 200), np.minimum(nl, nb))
    ref = stats.hypergeom.sf(n - 1, N, nl, nb)
    got = right_tail(n, np.full(200, N), nl, nb)
    ok = ref > 1e-290
    assert np.allclose(got[ok], ref[ok], rtol=1e-8, atol=0)


@pytest.mark.parametrize("N,nl,nb,n", [(10, 4, 5, 3), (30, 12, 9, 6), (40, 5, 30, 5)])
def test_right_tail_matches_urn(N, nl, nb, n):
    rng = np.random.default_rng(N * 1000 + n)
    draws = urn_draws(N, nl, nb, 100_000, rng)
    freq = (draws >= n).mean()
    p = right_tail_pvalue(n, N, nl, nb)
    sigma = np.sqrt(p * (1 - p) / 100_000)
    assert abs(freq - p) <= 3 * sigma + 1e-12


def test_count_tests_examples():
    # E=5, L=3, B=4, N_BL=2 -> 15
    net = DirectedWeightedNetwork.from_edges([(1, 2), (1, 3), (2, 4), (5, 1), (5, 2)])
    lenders, borrowers = {1, 2, 5}, {2, 3, 4, 1}
    assert (len(net.edges), len(lenders), len(borrowers), len(lenders & borrowers)) == (5, 3, 4, 2)
    assert count_tests(net) == 15
    assert count_tests(DirectedWeightedNetwork()) == 0
    star = DirectedWeightedNetwork.from_edges([(0, 1), (0, 2), (0, 3), (0, 4)])
    assert count_tests(star) == 8
    assert count_tests(star, conservative=True) == 8


def test_validate_single_link_never_validated():
    net = DirectedWeightedNetwork.from_edges({(1, 2): 17})
    val = validate_window(net, 0.01)
    res = link_tests(net)
    assert len(res) == 1 and res[0].p_over == 1.0
    assert val.over_links == {}
    assert val.t_a == 1 + 1


def test_validate_empty_window():
    val = validate_window(DirectedWeightedNetwork(), 0.01, window=3, side=LA)
    assert val.t_a == 0 and val.over_links == {} and val.window == 3


def test_validate_detects_concentrated_link():
    # 4 lenders x 4 borrowers at uniform background, one pair strongly over-used
    edges = {(a, b): 2 for a in range(4) for b in range(4, 8)}
    edges[(0, 4)] = 60
    net = DirectedWeightedNetwork.from_edges(edges)
    val = validate_window(net, 0.01)
    assert (0, 4) in val.over_links
    assert all(p < val.threshold for p in val.over_links.values())
    assert all(p < val.threshold for p in val.under_links.values())
    assert val.bonferroni_network().edges == {(0, 4): 60}


def test_under_tests_cover_absent_pairs():
    net = DirectedWeightedNetwork.from_edges({(0, 1): 3, (1, 2): 1, (2, 0): 1})
    tested = {(r.lender, r.borrower) for r in link_tests(net)}
    # every active lender x active borrower except the diagonal
    assert tested == {(a, b) for a in (0, 1, 2) for b in (0, 1, 2) if a != b}


def test_p_value_bounds():
    rng = np.random.default_rng(3)
    edges = {}
    for _ in range(300):
        a, b = rng.choice(12, 2, replace=False)
        edges[(int(a), int(b))] = edges.get((int(a), int(b)), 0) + 1
    for r in link_tests(DirectedWeightedNetwork.from_edges(edges)):
        assert 0 <= r.p_over <= 1 and 0 <= r.p_under <= 1
        assert r.p_over + r.p_under >= 1 - 1e-12  # both tails contain the observed point
