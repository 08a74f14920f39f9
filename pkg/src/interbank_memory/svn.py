"""Hypergeometric link validation with Bonferroni control.

For a directed pair (i, j) in a window with ``N_T`` loans in total, where
i lent ``n_l`` times and j borrowed ``n_b`` times, the number of loans from
i to j under random pairing is hypergeometric. Over-expressed links are
validated on the right tail, under-expressed pairs on the left tail.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .core import BankId, DirectedWeightedNetwork, Side, TransactionRecord, build_network, windows_of


def _log_binom(n, k):
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def _log_pmf(x, N, nl, nb):
    x, N, nl, nb = (np.asarray(a, dtype=np.float64) for a in (x, N, nl, nb))
    lo = np.maximum(0.0, nl + nb - N)
    hi = np.minimum(nl, nb)
    inside = (x >= lo) & (x <= hi)
    xs = np.where(inside, x, lo)
    out = _log_binom(nl, xs) + _log_binom(N - nl, nb - xs) - _log_binom(N, nb)
    return np.where(inside, out, -np.inf)


def _segment_sums(a, b, N, nl, nb) -> np.ndarray:
    """Sum of pmf(X) over X in [a_k, b_k] for each test k (empty range -> 0)."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    lengths = np.maximum(b - a + 1, 0)
    m = len(a)
    out = np.zeros(m)
    nz = np.flatnonzero(lengths)
    if len(nz) == 0:
        return out
    lens = lengths[nz]
    seg = np.repeat(nz, lens)
    starts = np.concatenate(([0], np.cumsum(lens)[:-1]))
    x = a[seg] + (np.arange(lens.sum()) - np.repeat(starts, lens))
    lp = _log_pmf(x, N[seg], nl[seg], nb[seg])
    peak = np.maximum.reduceat(lp, starts)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    terms = np.exp(lp - np.repeat(peak, lens))
    out[nz] = np.add.reduceat(terms, starts) * np.exp(peak)
    return out


def _check_margins(N, nl, nb):
    if (N < 0).any() or (nl < 0).any() or (nb < 0).any() or (nl > N).any() or (nb > N).any():
        raise ValueError("hypergeometric margins must satisfy 0 <= n_l, n_b <= N_T")


def _prepare(n, N, nl, nb):
    n, N, nl, nb = np.broadcast_arrays(*(np.atleast_1d(np.asarray(v, dtype=np.int64)) for v in (n, N, nl, nb)))
    _check_margins(N, nl, nb)
    if (n < 0).any():
        raise ValueError("observed count must be non-negative")
    lo = np.maximum(0, nl + nb - N)
    hi = np.minimum(nl, nb)
    mode = ((nl + 1) * (nb + 1)) // (N + 2)
    return n, N, nl, nb, lo, hi, mode


def right_tail(n, N, nl, nb) -> np.ndarray:
    """Vectorised P(X >= n); sums whichever side of the mode is shorter."""
    n, N, nl, nb, lo, hi, mode = _prepare(n, N, nl, nb)
    direct = n > mode
    a = np.where(direct, np.maximum(n, lo), lo)
    b = np.where(direct, hi, np.minimum(n - 1, hi))
    s = _segment_sums(a, b, N, nl, nb)
    return np.clip(np.where(direct, s, 1.0 - s), 0.0, 1.0)


def left_tail(n, N, nl, nb) -> np.ndarray:
    """Vectorised P(X <= n)."""
    n, N, nl, nb, lo, hi, mode = _prepare(n, N, nl, nb)
    direct = n < mode
    a = np.where(direct, lo, np.maximum(n + 1, lo))
    b = np.where(direct, np.minimum(n, hi), hi)
    s = _segment_sums(a, b, N, nl, nb)
    return np.clip(np.where(direct, s, 1.0 - s), 0.0, 1.0)


def hypergeom_pmf(X: int, N_T: int, n_l: int, n_b: int) -> float:
    """Probability that ``X`` of the ``n_b`` loans taken by j come from i."""
    _check_margins(np.array([N_T]), np.array([n_l]), np.array([n_b]))
    return float(np.exp(_log_pmf(X, N_T, n_l, n_b)))


def right_tail_pvalue(n_lb: int, N_T: int, n_l: int, n_b: int) -> float:
    return float(right_tail(n_lb, N_T, n_l, n_b)[0])


def left_tail_pvalue(n_lb: int, N_T: int, n_l: int, n_b: int) -> float:
    return float(left_tail(n_lb, N_T, n_l, n_b)[0])


@dataclass(frozen=True)
class LinkTestResult:
    lender: BankId
    borrower: BankId
    n_lb: int
    p_over: float
    p_under: float


def _margins(network: DirectedWeightedNetwork):
    out_s = network.out_strength()
    in_s = network.in_strength()
    return sorted(out_s), sorted(in_s), out_s, in_s


def count_tests(network: DirectedWeightedNetwork, conservative: bool = False) -> int:
    """Number of tests run in a window: existing links plus all admissible pairs.

    ``conservative=True`` gives the alternative count that also tests every
    absent pair for over-expression.
    """
    lenders, borrowers, _, _ = _margins(network)
    both = len(set(lenders) & set(borrowers))
    pairs = len(lenders) * len(borrowers) - both
    if conservative:
        return 2 * pairs
    return len(network.edges) + pairs


def link_tests(network: DirectedWeightedNetwork) -> list[LinkTestResult]:
    """Both p-values for every (active lender, active borrower) pair, i != j."""
    lenders, borrowers, out_s, in_s = _margins(network)
    if not lenders:
        return []
    N_T = network.total_weight
    li = np.repeat(lenders, len(borrowers))
    bj = np.tile(borrowers, len(lenders))
    keep = li != bj
    li, bj = li[keep], bj[keep]
    n = np.array([network.edges.get((int(a), int(b)), 0) for a, b in zip(li, bj)], dtype=np.int64)
    nl = np.array([out_s[int(a)] for a in li], dtype=np.int64)
    nb = np.array([in_s[int(b)] for b in bj], dtype=np.int64)
    N = np.full(len(n), N_T, dtype=np.int64)
    p_over = right_tail(n, N, nl, nb)
    p_under = left_tail(n, N, nl, nb)
    return [
        LinkTestResult(int(a), int(b), int(k), float(po), float(pu))
        for a, b, k, po, pu in zip(li, bj, n, p_over, p_under)
    ]


@dataclass(frozen=True)
class ValidatedNetwork:
    """Links of one window and side that survive the Bonferroni threshold."""

    window: int
    side: Side
    threshold: float
    t_a: int
    p_u: float
    network: DirectedWeightedNetwork
    over_links: dict[tuple[BankId, BankId], float] = field(default_factory=dict)
    under_links: dict[tuple[BankId, BankId], float] = field(default_factory=dict)

    def bonferroni_network(self) -> DirectedWeightedNetwork:
        return self.network.subnetwork(self.over_links)

    @property
    def n_links(self) -> int:
        return len(self.network.edges)

    @property
    def n_validated(self) -> int:
        return len(self.over_links)


def validate_window(
    network: DirectedWeightedNetwork,
    p_u: float = 0.01,
    *,
    window: int = 0,
    side: Side = Side.LENDER_AGGRESSOR,
    conservative: bool = False,
) -> ValidatedNetwork:
    if not 0.0 < p_u < 1.0:
        raise ValueError(f"p_u must lie in (0, 1), got {p_u}")
    if network.total_weight == 0:
        return ValidatedNetwork(window, side, 0.0, 0, p_u, network)
    t_a = count_tests(network, conservative)
    threshold = p_u / t_a
    over: dict[tuple[BankId, BankId], float] = {}
    under: dict[tuple[BankId, BankId], float] = {}
    for res in link_tests(network):
        if res.n_lb > 0 and res.p_over < threshold:
            over[(res.lender, res.borrower)] = res.p_over
        if res.p_under < threshold:
            under[(res.lender, res.borrower)] = res.p_under
    return ValidatedNetwork(window, side, threshold, t_a, p_u, network, over, under)


def validate_records(
    records: Sequence[TransactionRecord],
    p_u: float = 0.01,
    sides: Iterable[Side] = (Side.LENDER_AGGRESSOR, Side.BORROWER_AGGRESSOR),
    windows: Iterable[int] | None = None,
    conservative: bool = False,
) -> list[ValidatedNetwork]:
    """Validate every (window, side) of a record set independently."""
    out = []
    wins = windows_of(records) if windows is None else sorted(windows)
    for side in sides:
        for win in wins:
            net = build_network(records, win, side)
            out.append(validate_window(net, p_u, window=win, side=side, conservative=conservative))
    return out
