"""Transaction logs, quota profiles and synthetic heterogeneous profiles.

Log format: UTF-8 CSV with header ``window,lender,borrower,side,volume``.
``side`` is ``S`` when the lender aggressed (sold funds) and ``B`` when the
borrower aggressed; ``volume`` may be empty. Lines starting with ``#`` are
comments.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Collection, Iterable, Mapping, Sequence, TextIO

import numpy as np

from .core import LA, BankId, QuotaProfile, Side, TransactionRecord

HEADER = ("window", "lender", "borrower", "side", "volume")


class IngestError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class BankDictionary:
    """Two-way map between bank codes in a file and dataset-scoped ids."""

    def __init__(self, codes: Mapping[str, BankId] | None = None):
        self._ids: dict[str, BankId] = dict(codes or {})
        self._codes: dict[BankId, str] = {v: k for k, v in self._ids.items()}

    def __len__(self) -> int:
        return len(self._ids)

    def __contains__(self, code: str) -> bool:
        return code in self._ids

    def id(self, code: str) -> BankId:
        if code not in self._ids:
            new = len(self._ids)
            while new in self._codes:
                new += 1
            self._ids[code] = new
            self._codes[new] = code
        return self._ids[code]

    def code(self, bank: BankId) -> str:
        return self._codes.get(bank, str(bank))

    def to_dict(self) -> dict[str, BankId]:
        return dict(sorted(self._ids.items(), key=lambda kv: kv[1]))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "BankDictionary":
        return cls({k: int(v) for k, v in json.loads(Path(path).read_text(encoding="utf-8")).items()})


def _data_lines(stream: TextIO):
    for lineno, line in enumerate(stream, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, line


def parse_transactions(
    stream: TextIO | str,
    dictionary: BankDictionary | None = None,
    universe: Collection[str] | None = None,
    delimiter: str = ",",
) -> tuple[list[TransactionRecord], BankDictionary]:
    """Read a transaction log into records sorted by (window, seq).

    ``seq`` is the order of appearance within each window. When ``universe``
    is given, records involving any bank outside it are dropped before ids
    are assigned (e.g. to keep domestic banks only).
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    dictionary = dictionary if dictionary is not None else BankDictionary()
    lines = _data_lines(stream)
    try:
        lineno, first = next(lines)
    except StopIteration:
        return [], dictionary
    header = next(csv.reader([first], delimiter=delimiter))
    if tuple(h.strip().lower() for h in header) not in (HEADER, HEADER[:4]):
        raise IngestError(f"expected header {','.join(HEADER)}, got {first.strip()!r}", lineno)
    rows = []
    for lineno, line in lines:
        fields = next(csv.reader([line], delimiter=delimiter))
        if len(fields) not in (4, 5):
            raise IngestError(f"expected 4 or 5 fields, got {len(fields)}", lineno)
        win_s, lender_s, borrower_s, side_s = (f.strip() for f in fields[:4])
        vol_s = fields[4].strip() if len(fields) == 5 else ""
        try:
            window = int(win_s)
        except ValueError:
            raise IngestError(f"window {win_s!r} is not an integer", lineno) from None
        if window < 0:
            raise IngestError(f"negative window {window}", lineno)
        try:
            side = Side(side_s.upper())
        except ValueError:
            raise IngestError(f"unknown side code {side_s!r} (expected S or B)", lineno) from None
        if not lender_s or not borrower_s:
            raise IngestError("empty bank code", lineno)
        if lender_s == borrower_s:
            raise IngestError(f"self-loan by bank {lender_s!r}: {line.strip()}", lineno)
        volume = None
        if vol_s:
            try:
                volume = float(vol_s)
            except ValueError:
                raise IngestError(f"volume {vol_s!r} is not a number", lineno) from None
            if volume < 0:
                raise IngestError(f"negative volume {volume}", lineno)
        if universe is not None and (lender_s not in universe or borrower_s not in universe):
            continue
        rows.append((window, lender_s, borrower_s, side, volume))
    rows.sort(key=lambda r: r[0])  # stable: keeps file order within a window
    records = []
    seq: dict[int, int] = {}
    for window, lender_s, borrower_s, side, volume in rows:
        k = seq.get(window, 0)
        seq[window] = k + 1
        records.append(
            TransactionRecord(window, dictionary.id(lender_s), dictionary.id(borrower_s), side, k, volume)
        )
    return records, dictionary


def _fmt_volume(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def serialize_transactions(
    records: Iterable[TransactionRecord],
    stream: TextIO,
    dictionary: BankDictionary | None = None,
    comments: Sequence[str] = (),
) -> None:
    """Write records in log format; the inverse of :func:`parse_transactions`."""
    code = dictionary.code if dictionary is not None else str
    for c in comments:
        stream.write(f"# {c}\n")
    stream.write(",".join(HEADER) + "\n")
    for r in sorted(records, key=lambda r: (r.window, r.seq)):
        stream.write(f"{r.window},{code(r.lender)},{code(r.borrower)},{r.side.value},{_fmt_volume(r.volume)}\n")


def read_log(path: str | Path, universe: Collection[str] | None = None):
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_transactions(fh, universe=universe)


def write_log(path: str | Path, records, dictionary=None, comments=()) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        serialize_transactions(records, fh, dictionary, comments)


def extract_profiles(
    records: Iterable[TransactionRecord],
    windows: Iterable[int] | None = None,
) -> list[QuotaProfile]:
    """Per-window quotas realised by a record set.

    Each profile lists the banks active in that window; windows requested
    via ``windows`` but without records get an empty profile.
    """
    tallies: dict[int, dict[BankId, list[int]]] = {}
    for r in records:
        banks = tallies.setdefault(r.window, {})
        lq = banks.setdefault(r.lender, [0, 0, 0, 0])
        bq = banks.setdefault(r.borrower, [0, 0, 0, 0])
        if r.side is LA:
            bq[0] += 1
            lq[1] += 1
        else:
            bq[2] += 1
            lq[3] += 1
    wins = sorted(tallies) if windows is None else sorted(set(windows))
    out = []
    for win in wins:
        banks = tallies.get(win, {})
        ids = sorted(banks)
        q = np.array([banks[b] for b in ids], dtype=np.int64).reshape(len(ids), 4)
        out.append(QuotaProfile(win, tuple(ids), q[:, 0], q[:, 1], q[:, 2], q[:, 3]))
    return out


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for heterogeneous quota profiles.

    Each bank gets persistent lending and borrowing propensities drawn from a
    Pareto law with tail index ``exponent`` (``P(A > a) = a**-exponent`` for
    ``a >= 1``); each window allocates ``total_la`` and ``total_ba`` units
    multinomially according to those propensities.
    """

    n_banks: int = 100
    n_windows: int = 10
    total_la: int = 5000
    total_ba: int = 2000
    exponent: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.n_banks < 2:
            raise ValueError("need at least two banks")
        if self.n_windows < 1 or self.total_la < 0 or self.total_ba < 0:
            raise ValueError("n_windows must be positive and totals non-negative")
        if not self.exponent > 0:
            raise ValueError("exponent must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "SyntheticSpec":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def _propensities(n: int, exponent: float, rng: np.random.Generator) -> np.ndarray:
    if np.isinf(exponent):
        return np.ones(n)
    return rng.pareto(exponent, size=n) + 1.0


def _repair_overload(b: np.ndarray, l: np.ndarray, total: int, rng: np.random.Generator) -> None:
    """Move units off banks whose borrower+lender load exceeds the side total.

    Such a bank could only complete its quotas by trading with itself.
    """
    while True:
        load = b + l
        k = int(np.argmax(load))
        excess = int(load[k] - total)
        if excess <= 0:
            return
        for arr in (b, l) if b[k] >= l[k] else (l, b):
            move = min(excess, int(arr[k]))
            if move == 0:
                continue
            arr[k] -= move
            excess -= move
            weights = np.ones(len(arr))
            weights[k] = 0.0
            arr += rng.multinomial(move, weights / weights.sum())
            if excess == 0:
                break


def gen_synthetic_profiles(spec: SyntheticSpec, rng: np.random.Generator | None = None) -> list[QuotaProfile]:
    """Deterministic (per ``spec.seed`` or ``rng``) synthetic quota profiles.

    Both sides allocate the same total, so balance holds by construction;
    loads that would force self-loans are spread over the other banks.
    """
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    n = spec.n_banks
    props = {key: _propensities(n, spec.exponent, rng) for key in ("b_la", "l_la", "b_ba", "l_ba")}
    out = []
    for win in range(spec.n_windows):
        q = {}
        for key, total in (("b_la", spec.total_la), ("l_la", spec.total_la), ("b_ba", spec.total_ba), ("l_ba", spec.total_ba)):
            p = props[key] / props[key].sum()
            q[key] = rng.multinomial(total, p).astype(np.int64)
        _repair_overload(q["b_la"], q["l_la"], spec.total_la, rng)
        _repair_overload(q["b_ba"], q["l_ba"], spec.total_ba, rng)
        out.append(QuotaProfile(win, tuple(range(n)), q["b_la"], q["l_la"], q["b_ba"], q["l_ba"]))
    return out


def save_profiles(profiles: Sequence[QuotaProfile], path: str | Path, meta: Mapping | None = None) -> None:
    doc = {"meta": dict(meta or {}), "profiles": [p.to_dict() for p in profiles]}
    Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n", encoding="utf-8")


def load_profiles(path: str | Path) -> list[QuotaProfile]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [QuotaProfile.from_dict(p) for p in doc["profiles"]]
