"""Sequential pairing of lenders and borrowers driven by quotas and memory.

At every event step the aggressor side is drawn from the remaining
transaction counts, the aggressing party is drawn proportionally to its
residual quota, and its counterpart proportionally to residual quota times
``w + N``, where ``N`` is the memory of past loans between the two banks.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    BA,
    LA,
    BankId,
    MemoryLedger,
    ModelParams,
    QuotaProfile,
    Side,
    TransactionRecord,
)

log = logging.getLogger(__name__)

#: Re-draws of the aggressing bank before falling back to the joint draw.
MAX_REDRAWS = 100


class SimulationError(RuntimeError):
    pass


class WindowExhausted(SimulationError):
    """No transactions of the requested kind remain in the window."""


class NoCounterpart(SimulationError):
    """The counterpart distribution has zero mass."""


@dataclass(frozen=True)
class Cancellation:
    window: int
    side: Side
    lender: BankId
    borrower: BankId
    reason: str


@dataclass
class WindowDiagnostics:
    window: int
    n_records: int = 0
    redraws: int = 0
    joint_draws: int = 0
    cancellations: list[Cancellation] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "window": self.window,
            "n_records": self.n_records,
            "redraws": self.redraws,
            "joint_draws": self.joint_draws,
            "cancellations": [
                {"side": c.side.value, "lender": c.lender, "borrower": c.borrower, "reason": c.reason}
                for c in self.cancellations
            ],
        }


def window_rng(seed: int, window: int) -> np.random.Generator:
    """Independent generator for one window of a run seeded with ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(window)])))


class SimState:
    """Mutable state of one window being simulated.

    Residual quotas are indexed by ledger position. The memory matrix
    ``mem[j, i]`` (and its transpose) holds loans from j to i inside the
    memory horizon, including those already executed in this window.
    """

    def __init__(self, profile: QuotaProfile, ledger: MemoryLedger, params: ModelParams):
        missing = [b for b in profile.banks if b not in ledger.index]
        if missing:
            raise ValueError(f"banks {missing[:5]} are not in the ledger universe")
        n = ledger.n_banks
        pos = np.array([ledger.index[b] for b in profile.banks], dtype=np.int64)
        self.window = profile.window
        self.banks = ledger.banks
        self.ledger = ledger
        self.params = params
        self.b_la = np.zeros(n, dtype=np.int64)
        self.l_la = np.zeros(n, dtype=np.int64)
        self.b_ba = np.zeros(n, dtype=np.int64)
        self.l_ba = np.zeros(n, dtype=np.int64)
        if len(pos):
            self.b_la[pos] = profile.b_la
            self.l_la[pos] = profile.l_la
            self.b_ba[pos] = profile.b_ba
            self.l_ba[pos] = profile.l_ba
        self.remaining_la = int(self.b_la.sum())
        self.remaining_ba = int(self.b_ba.sum())
        if ledger.current_window is None:
            ledger.begin_window(self.window)
        elif ledger.current_window != self.window:
            raise ValueError(f"ledger has window {ledger.current_window} open, not {self.window}")
        self.mem = ledger.flow(self.window, params.Q, params.memory_mode)
        self.mem_t = np.ascontiguousarray(self.mem.T)
        self.seq = 0
        self.diagnostics = WindowDiagnostics(self.window)

    @classmethod
    def from_profile(cls, profile: QuotaProfile, params: ModelParams, ledger: MemoryLedger | None = None):
        if ledger is None:
            ledger = MemoryLedger(profile.banks)
        return cls(profile, ledger, params)

    def position(self, bank: BankId) -> int:
        return self.ledger.index[bank]

    def residuals(self, side: Side) -> tuple[np.ndarray, np.ndarray]:
        """(borrower residuals, lender residuals) for ``side``."""
        return (self.b_la, self.l_la) if side is LA else (self.b_ba, self.l_ba)

    def remaining(self, side: Side) -> int:
        return self.remaining_la if side is LA else self.remaining_ba

    def memory_into(self, borrower: int) -> np.ndarray:
        """Reciprocity-weighted memory N(j -> borrower) for every j."""
        lam = self.params.lam
        if lam == 1.0:
            return self.mem_t[borrower]
        return lam * self.mem_t[borrower] + (1.0 - lam) * self.mem[borrower]

    def memory_from(self, lender: int) -> np.ndarray:
        """Reciprocity-weighted memory N(lender -> i) for every i."""
        lam = self.params.lam
        if lam == 1.0:
            return self.mem[lender]
        return lam * self.mem[lender] + (1.0 - lam) * self.mem_t[lender]

    def commit(self, lender: int, borrower: int, side: Side) -> TransactionRecord:
        b_res, l_res = self.residuals(side)
        b_res[borrower] -= 1
        l_res[lender] -= 1
        if side is LA:
            self.remaining_la -= 1
        else:
            self.remaining_ba -= 1
        volume = 1.0
        self.ledger.record_index(lender, borrower, volume)
        self.mem[lender, borrower] += volume
        self.mem_t[borrower, lender] += volume
        rec = TransactionRecord(
            self.window,
            self.banks[lender],
            self.banks[borrower],
            side,
            self.seq,
            volume if self.params.memory_mode == "volume" else None,
        )
        self.seq += 1
        self.diagnostics.n_records += 1
        return rec

    def cancel(self, lender: int, borrower: int, side: Side, reason: str) -> None:
        b_res, l_res = self.residuals(side)
        b_res[borrower] -= 1
        l_res[lender] -= 1
        if side is LA:
            self.remaining_la -= 1
        else:
            self.remaining_ba -= 1
        c = Cancellation(self.window, side, self.banks[lender], self.banks[borrower], reason)
        self.diagnostics.cancellations.append(c)
        log.warning("window %d: cancelled %s unit %s->%s (%s)", c.window, side.name, c.lender, c.borrower, reason)


def _pick(weights: np.ndarray, rng: np.random.Generator) -> int:
    cum = np.cumsum(weights)
    total = cum[-1] if len(cum) else 0.0
    if not total > 0:
        raise NoCounterpart("selection weights have zero total mass")
    k = int(np.searchsorted(cum, rng.random() * total, side="right"))
    # guard against landing on a zero-weight slot through rounding
    while k >= len(weights) or weights[k] <= 0:
        k -= 1
    return k


def memory_weight(
    ledger: MemoryLedger,
    lender: BankId,
    borrower: BankId,
    params: ModelParams,
    now: int,
) -> float:
    """Memory term between ``lender`` and ``borrower`` as seen at window ``now``.

    Sums the current window and the ``Q`` most recent completed windows (all
    of them when ``Q`` is None), then mixes forward and reverse flows with the
    reciprocity weight ``lam``.
    """
    i, j = ledger.index[lender], ledger.index[borrower]
    store = ledger._counts if params.memory_mode == "count" else ledger._volumes
    fwd = rev = 0.0
    for win, mat in store.items():
        if win < now and (params.Q is None or win >= now - params.Q):
            fwd += mat[i, j]
            rev += mat[j, i]
    if ledger.current_window == now:
        cur = ledger.current_counts if params.memory_mode == "count" else ledger.current_volumes
        fwd += cur[i, j]
        rev += cur[j, i]
    return float(params.lam * fwd + (1.0 - params.lam) * rev)


def initiator_distribution(state: SimState, side: Side) -> np.ndarray:
    """Probabilities of the aggressing party (borrower for LA, lender for BA)."""
    b_res, l_res = state.residuals(side)
    res = b_res if side is LA else l_res
    total = res.sum()
    if total == 0:
        raise WindowExhausted(f"no {side.name} transactions left in window {state.window}")
    return res / total


def counterpart_weights(state: SimState, side: Side, initiator: int) -> np.ndarray:
    w = state.params.w
    if side is LA:
        wts = state.l_la * (w + state.memory_into(initiator))
    else:
        wts = state.b_ba * (w + state.memory_from(initiator))
    wts[initiator] = 0.0
    return wts


def counterpart_distribution(state: SimState, side: Side, initiator: int) -> np.ndarray:
    """Probabilities of the counterpart given the aggressing party's position."""
    wts = counterpart_weights(state, side, initiator)
    total = wts.sum()
    if not total > 0:
        raise NoCounterpart(f"no admissible counterpart for bank {state.banks[initiator]}")
    return wts / total


def draw_aggressor_type(state: SimState, rng: np.random.Generator) -> Side:
    la, ba = state.remaining_la, state.remaining_ba
    if la + ba == 0:
        raise WindowExhausted(f"window {state.window} has no transactions left")
    return LA if rng.random() * (la + ba) < la else BA


def select_la_borrower(state: SimState, rng: np.random.Generator) -> BankId:
    if state.remaining_la == 0:
        raise WindowExhausted("no lender-aggressor transactions left")
    return state.banks[_pick(state.b_la, rng)]


def select_la_lender(state: SimState, borrower: BankId, rng: np.random.Generator) -> BankId:
    return state.banks[_pick(counterpart_weights(state, LA, state.position(borrower)), rng)]


def select_ba_lender(state: SimState, rng: np.random.Generator) -> BankId:
    if state.remaining_ba == 0:
        raise WindowExhausted("no borrower-aggressor transactions left")
    return state.banks[_pick(state.l_ba, rng)]


def select_ba_borrower(state: SimState, lender: BankId, rng: np.random.Generator) -> BankId:
    return state.banks[_pick(counterpart_weights(state, BA, state.position(lender)), rng)]


def _tight_banks(b_res: np.ndarray, l_res: np.ndarray, total: int) -> np.ndarray:
    """Banks that must take part in the next pairing for the window to stay completable."""
    load = b_res + l_res
    if load.max(initial=0) < total:
        return np.empty(0, dtype=np.int64)
    return np.flatnonzero(load >= total)


def _joint_weights(state: SimState, side: Side, tight: np.ndarray) -> np.ndarray:
    """Joint pair probabilities ``P[initiator, counterpart]`` restricted to feasible pairs."""
    b_res, l_res = state.residuals(side)
    w, lam = state.params.w, state.params.lam
    mix = lam * state.mem + (1.0 - lam) * state.mem_t  # mix[j, i]: memory of lender j towards i
    if side is LA:
        init_res = b_res
        cp = l_res[None, :] * (w + mix.T)  # rows: borrower i, cols: lender j
    else:
        init_res = l_res
        cp = b_res[None, :] * (w + mix)  # rows: lender j, cols: borrower i
    np.fill_diagonal(cp, 0.0)
    rows = cp.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        joint = np.where(rows > 0, cp / rows, 0.0) * (init_res / init_res.sum())[:, None]
    for k in tight:
        keep = np.zeros_like(joint, dtype=bool)
        keep[k, :] = True
        keep[:, k] = True
        joint = np.where(keep, joint, 0.0)
    return joint


def _cancel(state: SimState, side: Side, rng: np.random.Generator, reason: str) -> None:
    b_res, l_res = state.residuals(side)
    total = state.remaining(side)
    load = b_res + l_res
    k = int(np.argmax(load))
    if load[k] > total and b_res[k] > 0 and l_res[k] > 0:
        state.cancel(k, k, side, reason + "; overloaded bank")
        return
    init_res, cp_res = (b_res, l_res) if side is LA else (l_res, b_res)
    i = _pick(init_res, rng)
    others = cp_res.astype(np.float64)
    others[i] = 0.0
    c = _pick(others, rng) if others.sum() > 0 else i
    lender, borrower = (c, i) if side is LA else (i, c)
    state.cancel(lender, borrower, side, reason)


def step(state: SimState, rng: np.random.Generator) -> TransactionRecord | None:
    """Execute one transaction; return None if the unit had to be cancelled."""
    side = draw_aggressor_type(state, rng)
    b_res, l_res = state.residuals(side)
    total = state.remaining(side)
    tight = _tight_banks(b_res, l_res, total)
    init_res = b_res if side is LA else l_res
    diag = state.diagnostics

    for _ in range(MAX_REDRAWS):
        init = _pick(init_res, rng)
        wts = counterpart_weights(state, side, init)
        if not wts.sum() > 0:
            diag.redraws += 1
            continue
        cp = _pick(wts, rng)
        if len(tight) and not all(k in (init, cp) for k in tight):
            diag.redraws += 1
            continue
        lender, borrower = (cp, init) if side is LA else (init, cp)
        return state.commit(lender, borrower, side)

    joint = _joint_weights(state, side, tight)
    if joint.sum() > 0:
        diag.joint_draws += 1
        flat = _pick(joint.ravel(), rng)
        init, cp = divmod(flat, joint.shape[1])
        lender, borrower = (cp, init) if side is LA else (init, cp)
        return state.commit(lender, borrower, side)

    _cancel(state, side, rng, "no feasible counterpart")
    return None


def run_window(
    profile: QuotaProfile,
    ledger: MemoryLedger,
    params: ModelParams,
    rng: np.random.Generator,
) -> tuple[list[TransactionRecord], WindowDiagnostics]:
    """Simulate every transaction of one window and close it in the ledger."""
    state = SimState(profile, ledger, params)
    records = []
    while state.remaining_la + state.remaining_ba > 0:
        rec = step(state, rng)
        if rec is not None:
            records.append(rec)
    ledger.close_window()
    return records, state.diagnostics


@dataclass
class SimulationResult:
    records: list[TransactionRecord]
    diagnostics: list[WindowDiagnostics]
    ledger: MemoryLedger

    @property
    def n_cancellations(self) -> int:
        return sum(len(d.cancellations) for d in self.diagnostics)


def run_simulation(
    profiles: Sequence[QuotaProfile],
    params: ModelParams,
    ledger: MemoryLedger | None = None,
) -> SimulationResult:
    """Run consecutive windows with memory carried across them.

    Each window draws from its own generator derived from ``params.seed`` and
    the window index. A pre-filled ``ledger`` (e.g. built from a historical
    log) seeds the memory.
    """
    profiles = sorted(profiles, key=lambda p: p.window)
    banks = {b for p in profiles for b in p.banks}
    if ledger is None:
        ledger = MemoryLedger(banks)
    elif not banks <= set(ledger.banks):
        raise ValueError("ledger does not cover every bank in the profiles")
    records: list[TransactionRecord] = []
    diagnostics = []
    for prof in profiles:
        recs, diag = run_window(prof, ledger, params, window_rng(params.seed, prof.window))
        records.extend(recs)
        diagnostics.append(diag)
    return SimulationResult(records, diagnostics, ledger)
