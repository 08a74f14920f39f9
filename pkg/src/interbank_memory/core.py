"""Domain types shared by the simulator and the analysis modules."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

BankId = int


class Side(enum.Enum):
    """Which party aggressed (accepted the posted quote)."""

    LENDER_AGGRESSOR = "S"
    BORROWER_AGGRESSOR = "B"

    @property
    def short(self) -> str:
        return "la" if self is Side.LENDER_AGGRESSOR else "ba"


LA = Side.LENDER_AGGRESSOR
BA = Side.BORROWER_AGGRESSOR


@dataclass(frozen=True)
class TransactionRecord:
    """One overnight loan: ``lender`` lent to ``borrower`` in ``window``."""

    window: int
    lender: BankId
    borrower: BankId
    side: Side
    seq: int = 0
    volume: float | None = None

    def __post_init__(self):
        if self.lender == self.borrower:
            raise ValueError(f"self-loan by bank {self.lender} in window {self.window}")
        if self.window < 0:
            raise ValueError(f"negative window index {self.window}")
        if self.volume is not None and self.volume < 0:
            raise ValueError(f"negative volume {self.volume}")


def _frozen_int_array(values, n: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64).reshape(-1)
    if arr.shape != (n,):
        raise ValueError(f"{name} has {arr.size} entries, expected {n}")
    if (arr < 0).any():
        raise ValueError(f"{name} contains negative quotas")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QuotaProfile:
    """Per-bank transaction quotas for one window.

    ``b_la[k]`` is the number of lender-aggressor loans bank ``banks[k]``
    takes as borrower, ``l_la[k]`` the number it grants as lender, and
    likewise for the borrower-aggressor side.
    """

    window: int
    banks: tuple[BankId, ...]
    b_la: np.ndarray
    l_la: np.ndarray
    b_ba: np.ndarray
    l_ba: np.ndarray

    def __post_init__(self):
        banks = tuple(int(b) for b in self.banks)
        if len(set(banks)) != len(banks):
            raise ValueError("duplicate bank ids in profile")
        object.__setattr__(self, "banks", banks)
        n = len(banks)
        for name in ("b_la", "l_la", "b_ba", "l_ba"):
            object.__setattr__(self, name, _frozen_int_array(getattr(self, name), n, name))
        if self.b_la.sum() != self.l_la.sum():
            raise ValueError(
                f"window {self.window}: lender-aggressor quotas unbalanced "
                f"({self.b_la.sum()} borrower vs {self.l_la.sum()} lender units)"
            )
        if self.b_ba.sum() != self.l_ba.sum():
            raise ValueError(
                f"window {self.window}: borrower-aggressor quotas unbalanced "
                f"({self.b_ba.sum()} borrower vs {self.l_ba.sum()} lender units)"
            )

    @property
    def total_la(self) -> int:
        return int(self.b_la.sum())

    @property
    def total_ba(self) -> int:
        return int(self.b_ba.sum())

    def quotas(self, bank: BankId) -> dict[str, int]:
        k = self.banks.index(bank)
        return {
            "b_la": int(self.b_la[k]),
            "l_la": int(self.l_la[k]),
            "b_ba": int(self.b_ba[k]),
            "l_ba": int(self.l_ba[k]),
        }

    def is_feasible(self) -> bool:
        """True if both sides can be paired without any self-loan.

        A pairing exists iff no bank holds more than the side total once its
        borrower and lender units are added together.
        """
        t_la, t_ba = self.total_la, self.total_ba
        return bool(
            (self.b_la + self.l_la <= t_la).all() and (self.b_ba + self.l_ba <= t_ba).all()
        )

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "banks": list(self.banks),
            "b_la": self.b_la.tolist(),
            "l_la": self.l_la.tolist(),
            "b_ba": self.b_ba.tolist(),
            "l_ba": self.l_ba.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "QuotaProfile":
        return cls(int(d["window"]), tuple(d["banks"]), d["b_la"], d["l_la"], d["b_ba"], d["l_ba"])


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the trading model.

    ``Q=None`` means unbounded memory. ``lam`` weights forward memory against
    the reverse flow; ``lam=1`` is the base model.
    """

    w: float = 1.0
    Q: int | None = None
    lam: float = 1.0
    memory_mode: str = "count"
    seed: int = 0

    def __post_init__(self):
        if not self.w >= 0:
            raise ValueError(f"w must be non-negative, got {self.w}")
        if self.Q is not None and (int(self.Q) != self.Q or self.Q < 1):
            raise ValueError(f"Q must be a positive integer or None, got {self.Q}")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam must lie in [0, 1], got {self.lam}")
        if self.memory_mode not in ("count", "volume"):
            raise ValueError(f"memory_mode must be 'count' or 'volume', got {self.memory_mode!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


class MemoryLedger:
    """Loan counts (and volumes) per ordered bank pair, per window.

    Completed windows are kept separately from the window currently being
    simulated so that finite-horizon readouts can be assembled cheaply.
    """

    def __init__(self, banks: Iterable[BankId]):
        self.banks: tuple[BankId, ...] = tuple(sorted({int(b) for b in banks}))
        self.index: dict[BankId, int] = {b: k for k, b in enumerate(self.banks)}
        n = len(self.banks)
        self._counts: dict[int, np.ndarray] = {}
        self._volumes: dict[int, np.ndarray] = {}
        self.current_window: int | None = None
        self.current_counts = np.zeros((n, n), dtype=np.int64)
        self.current_volumes = np.zeros((n, n), dtype=np.float64)

    @property
    def n_banks(self) -> int:
        return len(self.banks)

    @property
    def completed_windows(self) -> list[int]:
        return sorted(self._counts)

    def begin_window(self, window: int) -> None:
        if self.current_window is not None:
            raise RuntimeError(f"window {self.current_window} is still open")
        if window in self._counts or (self._counts and window < max(self._counts)):
            raise ValueError(f"window {window} is not after the completed windows")
        self.current_window = window
        self.current_counts[:] = 0
        self.current_volumes[:] = 0.0

    def record_index(self, lender: int, borrower: int, volume: float = 1.0) -> None:
        """Add one loan between ledger positions (not bank ids)."""
        self.current_counts[lender, borrower] += 1
        self.current_volumes[lender, borrower] += volume

    def record(self, lender: BankId, borrower: BankId, volume: float = 1.0) -> None:
        if self.current_window is None:
            raise RuntimeError("no open window")
        self.record_index(self.index[lender], self.index[borrower], volume)

    def close_window(self) -> None:
        if self.current_window is None:
            raise RuntimeError("no open window")
        self._counts[self.current_window] = self.current_counts.copy()
        self._volumes[self.current_window] = self.current_volumes.copy()
        self.current_window = None
        self.current_counts[:] = 0
        self.current_volumes[:] = 0.0

    def count(self, lender: BankId, borrower: BankId, window: int) -> int:
        i, j = self.index[lender], self.index[borrower]
        if window == self.current_window:
            return int(self.current_counts[i, j])
        if window in self._counts:
            return int(self._counts[window][i, j])
        return 0

    def window_total(self, window: int) -> int:
        if window == self.current_window:
            return int(self.current_counts.sum())
        return int(self._counts[window].sum()) if window in self._counts else 0

    def past_flow(self, now: int, Q: int | None, mode: str = "count") -> np.ndarray:
        """Sum over completed windows inside the memory horizon of ``now``.

        With ``Q=None`` every completed window before ``now`` counts;
        otherwise only windows ``now-Q .. now-1``.
        """
        store = self._counts if mode == "count" else self._volumes
        out = np.zeros((self.n_banks, self.n_banks), dtype=np.float64)
        for win, mat in store.items():
            if win < now and (Q is None or win >= now - Q):
                out += mat
        return out

    def current_flow(self, now: int, mode: str = "count") -> np.ndarray:
        if self.current_window != now:
            return np.zeros((self.n_banks, self.n_banks), dtype=np.float64)
        src = self.current_counts if mode == "count" else self.current_volumes
        return src.astype(np.float64)

    def flow(self, now: int, Q: int | None, mode: str = "count") -> np.ndarray:
        """Matrix ``M[j, i]`` of loans from j to i visible to memory at ``now``."""
        return self.past_flow(now, Q, mode) + self.current_flow(now, mode)

    @classmethod
    def from_records(cls, records: Iterable["TransactionRecord"], banks: Iterable[BankId] = ()) -> "MemoryLedger":
        """Build a ledger of completed windows from historical records."""
        records = list(records)
        ids = set(banks) | {r.lender for r in records} | {r.borrower for r in records}
        ledger = cls(ids)
        by_window: dict[int, list[TransactionRecord]] = {}
        for r in records:
            by_window.setdefault(r.window, []).append(r)
        for win in sorted(by_window):
            ledger.begin_window(win)
            for r in by_window[win]:
                ledger.record(r.lender, r.borrower, 1.0 if r.volume is None else r.volume)
            ledger.close_window()
        return ledger


@dataclass(frozen=True)
class DirectedWeightedNetwork:
    """Directed loan network; edge weights count loans from lender to borrower."""

    nodes: frozenset = field(default_factory=frozenset)
    edges: Mapping[tuple[BankId, BankId], int] = field(default_factory=dict)

    def __post_init__(self):
        edges = {}
        for (a, b), wgt in self.edges.items():
            if a == b:
                raise ValueError(f"self-edge on bank {a}")
            if wgt < 1:
                raise ValueError(f"edge {a}->{b} has weight {wgt} < 1")
            edges[(int(a), int(b))] = int(wgt)
        nodes = frozenset(int(n) for n in self.nodes)
        for a, b in edges:
            if a not in nodes or b not in nodes:
                nodes = nodes | {a, b}
        object.__setattr__(self, "edges", dict(sorted(edges.items())))
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def from_edges(cls, edges: Iterable[tuple[BankId, BankId]] | Mapping, nodes: Iterable[BankId] = ()):
        if isinstance(edges, Mapping):
            return cls(frozenset(nodes), dict(edges))
        return cls(frozenset(nodes), {e: 1 for e in edges})

    def __len__(self) -> int:
        return len(self.edges)

    @property
    def edge_set(self) -> frozenset[tuple[BankId, BankId]]:
        return frozenset(self.edges)

    @property
    def total_weight(self) -> int:
        return sum(self.edges.values())

    def out_strength(self) -> dict[BankId, int]:
        s: dict[BankId, int] = {}
        for (a, _), wgt in self.edges.items():
            s[a] = s.get(a, 0) + wgt
        return s

    def in_strength(self) -> dict[BankId, int]:
        s: dict[BankId, int] = {}
        for (_, b), wgt in self.edges.items():
            s[b] = s.get(b, 0) + wgt
        return s

    def out_degree(self) -> dict[BankId, int]:
        d = {n: 0 for n in self.nodes}
        for a, _ in self.edges:
            d[a] += 1
        return d

    def in_degree(self) -> dict[BankId, int]:
        d = {n: 0 for n in self.nodes}
        for _, b in self.edges:
            d[b] += 1
        return d

    def binary(self) -> "DirectedWeightedNetwork":
        return DirectedWeightedNetwork(self.nodes, {e: 1 for e in self.edges})

    def subnetwork(self, edges: Iterable[tuple[BankId, BankId]]) -> "DirectedWeightedNetwork":
        """Network restricted to ``edges`` (kept weights; nodes of kept edges only)."""
        keep = {e: self.edges[e] for e in edges}
        return DirectedWeightedNetwork(frozenset(), keep)


def build_network(records: Sequence[TransactionRecord], window: int, side: Side) -> DirectedWeightedNetwork:
    edges: dict[tuple[BankId, BankId], int] = {}
    for r in records:
        if r.window == window and r.side is side:
            key = (r.lender, r.borrower)
            edges[key] = edges.get(key, 0) + 1
    return DirectedWeightedNetwork(frozenset(), edges)


def windows_of(records: Iterable[TransactionRecord]) -> list[int]:
    return sorted({r.window for r in records})
