"""Command line batch runner.

Every subcommand reads an optional JSON config file (``--config``); flags
given on the command line override its values. Output files carry a comment
header with the package version, the config hash and the master seed, and
contain nothing time-dependent, so reruns are byte-identical.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .core import BA, LA, ModelParams, Side, build_network, windows_of
from .ingest import (
    SyntheticSpec,
    extract_profiles,
    gen_synthetic_profiles,
    load_profiles,
    read_log,
    save_profiles,
    write_log,
)
from .motifs import LABELS, classify_expression, motif_significance, window_threshold
from .netstats import bidirectional_stats, bootstrap_mean_test, jaccard_matrix, strength_preserving_shuffle
from .simulate import run_simulation
from .svn import validate_window

SIDES = {"la": LA, "ba": BA}


@dataclass
class ExperimentConfig:
    input: list[str] = field(default_factory=list)
    profiles: str | None = None
    synthetic: dict = field(default_factory=dict)
    w: list[float] = field(default_factory=lambda: [1.0])
    Q: list[int | None] = field(default_factory=lambda: [None])
    lam: list[float] = field(default_factory=lambda: [1.0])
    memory_mode: str = "count"
    p_u: float = 0.01
    conservative_tests: bool = False
    which: str = "bonferroni"
    mode: str = "binary"
    sides: list[str] = field(default_factory=lambda: ["la", "ba"])
    motif_samples: int = 1000
    swap_factor: int = 10
    n_windows: int | None = None
    replicas: int = 10_000
    out_dir: str = "out"
    seed: int = 0

    def validate(self) -> None:
        if not (self.w and self.Q and self.lam):
            raise ValueError("parameter grids must be non-empty")
        if not 0.0 < self.p_u < 1.0:
            raise ValueError(f"p_u must lie in (0, 1), got {self.p_u}")
        if self.which not in ("original", "bonferroni"):
            raise ValueError(f"which must be 'original' or 'bonferroni', got {self.which!r}")
        bad = [s for s in self.sides if s not in SIDES]
        if bad:
            raise ValueError(f"unknown sides {bad}; use la and/or ba")

    def digest(self) -> str:
        d = asdict(self)
        d.pop("out_dir")
        # inputs enter by name and content, so a rerun elsewhere hashes the same
        d["input"] = [[Path(p).name, _file_sha(p)] for p in self.input]
        if self.profiles:
            d["profiles"] = [Path(self.profiles).name, _file_sha(self.profiles)]
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _file_sha(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _q_value(v) -> int | None:
    if v is None or str(v).lower() in ("full", "none", "inf"):
        return None
    return int(v)


def _q_name(q: int | None) -> str:
    return "full" if q is None else str(q)


def _num(x: float) -> str:
    return f"{x:.10g}"


def derive_seed(master: int, *coords: int) -> int:
    """64-bit seed for a grid cell / window, stable in the master seed and coordinates."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(int(c) for c in coords))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _provenance(cfg: ExperimentConfig, command: str) -> list[str]:
    return [
        f"interbank-memory {__version__} numpy {np.__version__}",
        f"command={command} config_hash={cfg.digest()} seed={cfg.seed}",
    ]


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]], prov: list[str]) -> None:
    buf = io.StringIO()
    for line in prov:
        buf.write(f"# {line}\n")
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _write_json(path: Path, payload: dict, prov: list[str]) -> None:
    doc = {"provenance": prov, **payload}
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _out(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_input(path: str):
    records, dictionary = read_log(path)
    return records, dictionary


def _window_range(records, cfg: ExperimentConfig) -> list[int]:
    if cfg.n_windows is not None:
        return list(range(cfg.n_windows))
    wins = windows_of(records)
    return list(range(max(wins) + 1)) if wins else []


def _networks(records, cfg: ExperimentConfig, side: Side, windows: list[int]):
    """Original or Bonferroni network per window, plus the validation results."""
    out = []
    for win in windows:
        net = build_network(records, win, side)
        val = validate_window(net, cfg.p_u, window=win, side=side, conservative=cfg.conservative_tests)
        out.append((net if cfg.which == "original" else val.bonferroni_network(), val))
    return out


# -- subcommands -----------------------------------------------------------


def cmd_gen_synthetic(cfg: ExperimentConfig) -> list[Path]:
    spec = SyntheticSpec.from_dict({**cfg.synthetic, "seed": cfg.synthetic.get("seed", cfg.seed)})
    prov = _provenance(cfg, "gen-synthetic")
    path = _out(cfg) / "profiles.json"
    save_profiles(gen_synthetic_profiles(spec), path, {"provenance": prov, "synthetic": spec.to_dict()})
    return [path]


def _profiles_for(cfg: ExperimentConfig):
    if cfg.profiles:
        return load_profiles(cfg.profiles), None
    if cfg.input:
        records, dictionary = _load_input(cfg.input[0])
        return extract_profiles(records, windows=_window_range(records, cfg)), dictionary
    spec = SyntheticSpec.from_dict({**cfg.synthetic, "seed": cfg.synthetic.get("seed", cfg.seed)})
    return gen_synthetic_profiles(spec), None


def cmd_simulate(cfg: ExperimentConfig) -> list[Path]:
    profiles, dictionary = _profiles_for(cfg)
    out = _out(cfg)
    prov = _provenance(cfg, "simulate")
    written = []
    cells = []
    for iw, w in enumerate(cfg.w):
        for iq, q in enumerate(cfg.Q):
            for il, lam in enumerate(cfg.lam):
                seed = derive_seed(cfg.seed, iw, iq, il)
                params = ModelParams(w=float(w), Q=q, lam=float(lam), memory_mode=cfg.memory_mode, seed=seed)
                res = run_simulation(profiles, params)
                stem = f"sim_w{_num(float(w))}_Q{_q_name(q)}_lam{_num(float(lam))}"
                cell_prov = prov + [f"w={_num(float(w))} Q={_q_name(q)} lam={_num(float(lam))} cell_seed={seed}"]
                log_path = out / f"{stem}.csv"
                write_log(log_path, res.records, dictionary, cell_prov)
                diag_path = out / f"{stem}_diagnostics.json"
                _write_json(
                    diag_path,
                    {
                        "params": asdict(params),
                        "n_records": len(res.records),
                        "n_cancellations": res.n_cancellations,
                        "windows": [d.to_dict() for d in res.diagnostics],
                    },
                    cell_prov,
                )
                written += [log_path, diag_path]
                cells.append({"log": log_path.name, "seed": seed, "w": w, "Q": q, "lam": lam})
    manifest = out / "simulate_manifest.json"
    _write_json(manifest, {"cells": cells}, prov)
    return written + [manifest]


def validation_rows(records, cfg: ExperimentConfig):
    """Per window and side: link and transaction counts in original and Bonferroni networks."""
    rows, links = [], []
    windows = _window_range(records, cfg)
    for s in cfg.sides:
        side = SIDES[s]
        for win in windows:
            net = build_network(records, win, side)
            val = validate_window(net, cfg.p_u, window=win, side=side, conservative=cfg.conservative_tests)
            bonf = val.bonferroni_network()
            n_e, n_eb = len(net), len(bonf)
            n_t, n_tb = net.total_weight, bonf.total_weight
            rows.append(
                [win, s, n_e, n_eb, n_t, n_tb, _num(n_eb / n_e if n_e else 0.0), _num(n_tb / n_t if n_t else 0.0),
                 val.t_a, _num(val.threshold), len(val.under_links)]
            )
            for (a, b), p in sorted(val.over_links.items()):
                links.append([win, s, a, b, net.edges[(a, b)], _num(p)])
    return rows, links


VALIDATION_HEADER = ["window", "side", "n_links", "n_links_bonf", "n_tx", "n_tx_bonf", "link_ratio", "tx_ratio",
                     "t_a", "threshold", "n_under"]


def cmd_validate(cfg: ExperimentConfig) -> list[Path]:
    out = _out(cfg)
    prov = _provenance(cfg, "validate")
    written = []
    for path in cfg.input:
        records, dictionary = _load_input(path)
        rows, links = validation_rows(records, cfg)
        links = [[w, s, dictionary.code(a), dictionary.code(b), k, p] for w, s, a, b, k, p in links]
        stem = Path(path).stem
        p1, p2 = out / f"{stem}_validation.csv", out / f"{stem}_links.csv"
        _write_csv(p1, VALIDATION_HEADER, rows, prov + [f"input={Path(path).name}"])
        _write_csv(p2, ["window", "side", "lender", "borrower", "weight", "p_over"], links, prov + [f"input={Path(path).name}"])
        written += [p1, p2]
    return written


def cmd_jaccard(cfg: ExperimentConfig) -> list[Path]:
    out = _out(cfg)
    prov = _provenance(cfg, "jaccard")
    written = []
    for path in cfg.input:
        records, _ = _load_input(path)
        windows = _window_range(records, cfg)
        for s in cfg.sides:
            nets = [n for n, _ in _networks(records, cfg, SIDES[s], windows)]
            mat = jaccard_matrix(nets, cfg.mode)
            rows = [[win] + [_num(v) for v in row] for win, row in zip(windows, mat.values)]
            p = out / f"{Path(path).stem}_jaccard_{cfg.which}_{cfg.mode}_{s}.csv"
            _write_csv(p, ["window"] + [str(w) for w in windows], rows,
                       prov + [f"input={Path(path).name} mean_off_diagonal={_num(mat.mean_off_diagonal())}"])
            written.append(p)
    return written


def cmd_motifs(cfg: ExperimentConfig) -> list[Path]:
    out = _out(cfg)
    prov = _provenance(cfg, "motifs")
    written = []
    for path in cfg.input:
        records, _ = _load_input(path)
        windows = _window_range(records, cfg)
        thr = window_threshold(len(windows)) if windows else float("nan")
        for si, s in enumerate(cfg.sides):
            rows, results = [], []
            for net, val in _networks(records, cfg, SIDES[s], windows):
                sig = motif_significance(
                    net, cfg.motif_samples, cfg.swap_factor, rng=derive_seed(cfg.seed, si, val.window), alpha=thr
                )
                results.append(sig)
                freq = sig.observed.frequencies
                for k, lab in enumerate(LABELS):
                    rows.append([val.window, lab, int(sig.observed.counts[k]), _num(freq[k]), _num(sig.ensemble_mean[k]),
                                 _num(sig.ensemble_std[k]), _num(sig.p_over[k]), _num(sig.p_under[k]), sig.tags[k]])
            stem = f"{Path(path).stem}_motifs_{cfg.which}_{s}"
            extra = [f"input={Path(path).name} threshold={_num(thr)}"]
            p1 = out / f"{stem}.csv"
            _write_csv(p1, ["window", "motif", "count", "frequency", "ensemble_mean", "ensemble_std", "p_over",
                            "p_under", "tag"], rows, prov + extra)
            tallies = classify_expression(results, len(windows))
            p2 = out / f"{stem}_tallies.csv"
            _write_csv(p2, ["motif", "over", "under", "normal", "absent"],
                       [[lab, t["over"], t["under"], t["normal"], t["absent"]] for lab, t in tallies.items()],
                       prov + extra)
            written += [p1, p2]
    return written


def cmd_shuffle(cfg: ExperimentConfig) -> list[Path]:
    out = _out(cfg)
    prov = _provenance(cfg, "shuffle")
    written = []
    for path in cfg.input:
        records, dictionary = _load_input(path)
        groups: dict[tuple[int, int], list] = {}
        for r in records:
            groups.setdefault((r.window, 0 if r.side is LA else 1), []).append(r)
        shuffled = []
        for (win, si), recs in sorted(groups.items()):
            if len(recs) < 2:
                shuffled.extend(recs)
                continue
            rng = np.random.default_rng(derive_seed(cfg.seed, win, si))
            shuffled.extend(strength_preserving_shuffle(recs, rng))
        p = out / f"{Path(path).stem}_shuffled.csv"
        write_log(p, shuffled, dictionary, prov + [f"input={Path(path).name}"])
        written.append(p)
    return written


def _table1_row(nets) -> dict:
    counts = np.array([bidirectional_stats(n).count for n in nets], dtype=float)
    fracs = np.array([bidirectional_stats(n).fraction for n in nets], dtype=float)
    return {
        "mean": float(counts.mean()) if len(counts) else 0.0,
        "std": float(counts.std(ddof=1)) if len(counts) > 1 else 0.0,
        "perc": 100.0 * float(fracs.mean()) if len(fracs) else 0.0,
    }


def report_payload(cfg: ExperimentConfig) -> dict:
    series: dict[str, dict[str, list[int]]] = {}
    table = []
    summary = []
    for path in cfg.input:
        records, _ = _load_input(path)
        windows = _window_range(records, cfg)
        name = Path(path).stem
        series[name] = {}
        for s in cfg.sides:
            side = SIDES[s]
            vals = [validate_window(build_network(records, w, side), cfg.p_u, window=w, side=side,
                                    conservative=cfg.conservative_tests) for w in windows]
            orig = [v.network for v in vals]
            bonf = [v.bonferroni_network() for v in vals]
            n_links = np.array([len(n) for n in orig], dtype=float)
            n_bonf = np.array([len(n) for n in bonf], dtype=float)
            series[name][s] = [int(x) for x in n_bonf]
            summary.append({
                "input": name, "side": s, "windows": len(windows),
                "links_mean": float(n_links.mean()) if len(n_links) else 0.0,
                "links_std": float(n_links.std(ddof=1)) if len(n_links) > 1 else 0.0,
                "bonf_links_mean": float(n_bonf.mean()) if len(n_bonf) else 0.0,
                "bonf_links_std": float(n_bonf.std(ddof=1)) if len(n_bonf) > 1 else 0.0,
            })
            table.append({"input": name, "side": s, "original": _table1_row(orig), "bonferroni": _table1_row(bonf)})
    comparisons = []
    names = list(series)
    if len(names) >= 2:
        a, b = names[0], names[1]
        for si, s in enumerate(cfg.sides):
            if series[a][s] and series[b][s]:
                p = bootstrap_mean_test(series[a][s], series[b][s], cfg.replicas, rng=derive_seed(cfg.seed, 99, si))
                comparisons.append({"a": a, "b": b, "side": s, "quantity": "bonferroni_links", "p_value": p})
    return {"summary": summary, "bidirectional": table, "bootstrap": comparisons, "replicas": cfg.replicas}


def _report_markdown(payload: dict, prov: list[str]) -> str:
    lines = [f"<!-- {p} -->" for p in prov]
    lines += ["# Summary", "", "| input | side | windows | links mean | links std | Bonferroni mean | Bonferroni std |",
              "|---|---|---|---|---|---|---|"]
    for r in payload["summary"]:
        lines.append(f"| {r['input']} | {r['side']} | {r['windows']} | {r['links_mean']:.2f} | {r['links_std']:.2f} | "
                     f"{r['bonf_links_mean']:.2f} | {r['bonf_links_std']:.2f} |")
    lines += ["", "# Bidirectional links", "",
              "| Data type | Mean | Std. | Perc. | Mean | Std. | Perc. |",
              "|---|---|---|---|---|---|---|",
              "|  | Original network | | | Bonferroni network | | |"]
    for r in payload["bidirectional"]:
        o, b = r["original"], r["bonferroni"]
        label = f"{'Lender' if r['side'] == 'la' else 'Borrower'} aggr. ({r['input']})"
        lines.append(f"| {label} | {o['mean']:.2f} | {o['std']:.2f} | {o['perc']:.1f}% | "
                     f"{b['mean']:.2f} | {b['std']:.2f} | {b['perc']:.2f}% |")
    if payload["bootstrap"]:
        lines += ["", f"# Bootstrap mean comparison ({payload['replicas']} replicas)", "",
                  "| a | b | side | quantity | p-value |", "|---|---|---|---|---|"]
        for c in payload["bootstrap"]:
            lines.append(f"| {c['a']} | {c['b']} | {c['side']} | {c['quantity']} | {c['p_value']:.6g} |")
    return "\n".join(lines) + "\n"


def cmd_report(cfg: ExperimentConfig) -> list[Path]:
    out = _out(cfg)
    prov = _provenance(cfg, "report")
    payload = report_payload(cfg)
    p1, p2 = out / "report.json", out / "report.md"
    _write_json(p1, payload, prov)
    p2.write_text(_report_markdown(payload, prov), encoding="utf-8")
    return [p1, p2]


COMMANDS = {
    "gen-synthetic": cmd_gen_synthetic,
    "simulate": cmd_simulate,
    "validate": cmd_validate,
    "jaccard": cmd_jaccard,
    "motifs": cmd_motifs,
    "shuffle": cmd_shuffle,
    "report": cmd_report,
}


# -- argument handling -----------------------------------------------------


class _JsonErrorParser(argparse.ArgumentParser):
    def error(self, message):
        sys.stderr.write(json.dumps({"error": "usage", "message": message}) + "\n")
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON file with ExperimentConfig fields")
    common.add_argument("--input", nargs="+", help="transaction log(s)")
    common.add_argument("--profiles", help="quota profiles JSON")
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--seed", type=int)
    common.add_argument("--w", nargs="+", type=float)
    common.add_argument("--Q", nargs="+", type=str, help="memory horizons; 'full' for unbounded")
    common.add_argument("--lam", nargs="+", type=float)
    common.add_argument("--memory-mode", dest="memory_mode", choices=["count", "volume"])
    common.add_argument("--p-u", dest="p_u", type=float)
    common.add_argument("--conservative-tests", dest="conservative_tests", action="store_true")
    common.add_argument("--which", choices=["original", "bonferroni"])
    common.add_argument("--mode", choices=["binary", "weighted"])
    common.add_argument("--sides", nargs="+", choices=list(SIDES))
    common.add_argument("--samples", dest="motif_samples", type=int)
    common.add_argument("--swap-factor", dest="swap_factor", type=int)
    common.add_argument("--n-windows", dest="n_windows", type=int)
    common.add_argument("--replicas", type=int)
    common.add_argument("--n-banks", dest="syn_n_banks", type=int)
    common.add_argument("--total-la", dest="syn_total_la", type=int)
    common.add_argument("--total-ba", dest="syn_total_ba", type=int)
    common.add_argument("--exponent", dest="syn_exponent", type=float)
    parser = _JsonErrorParser(prog="interbank-memory", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_JsonErrorParser)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    values: dict[str, Any] = {}
    if getattr(ns, "config", None):
        values.update(json.loads(Path(ns.config).read_text(encoding="utf-8")))
    given = {k: v for k, v in vars(ns).items() if k not in ("config", "command")}
    synthetic = dict(values.get("synthetic", {}))
    n_win = given.get("n_windows", values.get("n_windows"))
    synthetic.setdefault("n_windows", n_win if n_win is not None else 10)
    if "n_windows" in given:
        synthetic["n_windows"] = given["n_windows"]
    for k in list(given):
        if k.startswith("syn_"):
            synthetic[k[4:]] = given.pop(k)
    values.update(given)
    values["synthetic"] = synthetic
    if isinstance(values.get("input"), str):
        values["input"] = [values["input"]]
    if "Q" in values:
        values["Q"] = [_q_value(q) for q in values["Q"]]
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = config_from_args(ns)
        if ns.command not in ("simulate", "gen-synthetic") and not cfg.input:
            raise ValueError(f"{ns.command} needs --input")
        for path in COMMANDS[ns.command](cfg):
            print(path)
    except Exception as exc:  # reported as JSON for callers
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
