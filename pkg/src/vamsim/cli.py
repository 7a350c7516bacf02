"""Command-line front end.

    vamsim run CONFIG [--scheme S] [--seed N] [--out DIR] [--workers K]
    vamsim compare CONFIG --schemes a,b,c [--seed N] [--out DIR]
    vamsim pdr-table [--separations 4,2] [--cluster-sizes 12,20] [--rate 10]

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
from pathlib import Path

import numpy as np

from .channel import airtime, analytical_pdr, clustered_senders
from .config import SCHEMES, ConfigError, ScenarioConfig, load_config
from .engine import accounting_scenario, generations_per_station, run_repetition, run_scenario
from .metrics import (
    DISTANCE_BIN,
    account_messages,
    compute_awareness,
    evaluation_times,
    ipg_igg_by_bin,
    mean_igg,
    metric_rows,
    summarize,
    write_rows,
)
from .mobility import pedestrian_count

OUTPUTS = ("generations.csv", "ipg.csv", "igg.csv", "awareness.csv")
EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _bin_label(b: int) -> str:
    return f"{int(b * DISTANCE_BIN)}-{int((b + 1) * DISTANCE_BIN)} m"


def scheme_metrics(results: list) -> dict:
    """Per-repetition metric values for one scheme, keyed by row label."""
    values: dict = {}

    def add(key, v):
        values.setdefault(key, []).append(v)

    for r in results:
        log = r.log
        add("generations/station", generations_per_station(r))
        n = len(log.vrus)
        add("zero-generation stations", sum(1 for s in log.vrus if log.generation_count(s) == 0) / n)
        add("mean IGG [s]", mean_igg(log))
        add("awareness", float(np.mean(compute_awareness(log, evaluation_times(log, r.config.awareness_step)))))
        for b, (_, ipg, _) in ipg_igg_by_bin(log).items():
            add(f"IPG {_bin_label(b)} [s]", ipg)
    return values


def _order(keys) -> list:
    head = ["generations/station", "zero-generation stations", "mean IGG [s]", "awareness"]
    ipg = sorted((k for k in keys if k.startswith("IPG")), key=lambda k: int(k.split()[1].split("-")[0]))
    return [k for k in head if k in keys] + ipg


def summary_text(cfg: ScenarioConfig, results: list) -> str:
    vals = scheme_metrics(results)
    lines = [f"scheme {cfg.scheme}, seed {cfg.seed}, {len(results)} repetition(s), 95% confidence"]
    width = max(len(k) for k in vals)
    for k in _order(vals):
        lines.append(f"  {k:<{width}}  {summarize(vals[k])}")
    lines.append("  mobility traces: " + " ".join(r.mobility_digest for r in results))
    return "\n".join(lines) + "\n"


def write_outputs(out: Path, cfg: ScenarioConfig, results: list):
    out.mkdir(parents=True, exist_ok=True)
    rows = {name: [] for name in OUTPUTS}
    for r in results:
        for name, part in metric_rows(cfg.scheme, r.repetition, r.log, cfg.awareness_step).items():
            rows[name].extend(part)
    for name in OUTPUTS:
        write_rows(out / name, rows[name])
    (out / "summary.txt").write_text(summary_text(cfg, results))


def accounting_table() -> str:
    lines = ["message accounting, 6 VRUs walking together for 30 s, lossless", f"  {'scheme':<16}{'simulated':>10}  expected"]
    for scheme in SCHEMES:
        r = run_repetition(accounting_scenario(scheme))
        total = sum(r.log.generation_count(s) for s in r.log.vrus)
        if scheme == "etsiCluster":
            lo, hi = account_messages(scheme, confirm_batches=1), account_messages(scheme, confirm_batches=5)
            expected = f"{lo}-{hi}"
        else:
            expected = str(account_messages(scheme))
        lines.append(f"  {scheme:<16}{total:>10}  {expected}")
    return "\n".join(lines) + "\n"


def compare_text(base: ScenarioConfig, schemes: list, workers: int = 1, out=None) -> str:
    columns = {}
    digests = {}
    for scheme in schemes:
        cfg = dataclasses.replace(base, scheme=scheme)
        results = run_scenario(cfg, workers)
        if out is not None:
            write_outputs(Path(out) / scheme, cfg, results)
        columns[scheme] = {k: summarize(v).mean for k, v in scheme_metrics(results).items()}
        digests[scheme] = ",".join(r.mobility_digest for r in results)
    keys = _order({k for c in columns.values() for k in c})
    width = max(len(k) for k in keys + ["trace hash"])
    colw = max(16, *(len(s) + 2 for s in schemes))
    lines = [f"{'':<{width}}" + "".join(f"{s:>{colw}}" for s in schemes)]
    for k in keys:
        cells = [columns[s].get(k, math.nan) for s in schemes]
        lines.append(f"{k:<{width}}" + "".join(f"{c:>{colw}.4f}" for c in cells))
    short = [digests[s][: colw - 2] for s in schemes]
    lines.append(f"{'trace hash':<{width}}" + "".join(f"{h:>{colw}}" for h in short))
    if len(set(digests.values())) != 1:
        lines.append("warning: mobility traces differ between schemes")
    if "standalone" in columns:
        ref = columns["standalone"]["generations/station"]
        for s in schemes:
            if s != "standalone" and ref > 0:
                lines.append(f"generations {s}/standalone: {columns[s]['generations/station'] / ref:.3f}")
    return "\n".join(lines) + "\n\n" + accounting_table()


def pdr_rows(separations, cluster_sizes, rate_hz: float = 10.0, segment_length: float = 50.0) -> dict:
    """scheme -> PDR per separation, for a fully connected segment."""
    if len(cluster_sizes) == 1:
        cluster_sizes = list(cluster_sizes) * len(separations)
    if len(cluster_sizes) != len(separations):
        raise ValueError("give one cluster size, or one per separation")
    base, cluster = ScenarioConfig().base_vam_bytes, ScenarioConfig().cluster_vam_bytes
    rows = {"standalone": [], "etsiCluster": [], "implicitCluster": []}
    for sep, size in zip(separations, cluster_sizes):
        n = pedestrian_count(segment_length, separation=sep)
        heads = clustered_senders(n, size)
        rows["standalone"].append(analytical_pdr(n, rate_hz, airtime(base)))
        rows["etsiCluster"].append(analytical_pdr(heads, rate_hz, airtime(cluster)))
        rows["implicitCluster"].append(analytical_pdr(heads, rate_hz, airtime(base)))
    return rows


def pdr_text(separations, cluster_sizes, rate_hz: float = 10.0) -> str:
    rows = pdr_rows(separations, cluster_sizes, rate_hz)
    sizes = list(cluster_sizes) * (len(separations) if len(cluster_sizes) == 1 else 1)
    head = [f"d={s:g} m ({pedestrian_count(50.0, separation=s)} VRUs, k={k})" for s, k in zip(separations, sizes)]
    colw = max(len(h) for h in head) + 2
    lines = [f"{'PDR %':<16}" + "".join(f"{h:>{colw}}" for h in head)]
    for scheme, vals in rows.items():
        lines.append(f"{scheme:<16}" + "".join(f"{100 * v:>{colw}.2f}" for v in vals))
    return "\n".join(lines) + "\n"


def _floats(text: str) -> list:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("values must be positive")
    return vals


def _ints(text: str) -> list:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError("cluster sizes must be integers")
    return [int(v) for v in vals]


def _schemes(text: str) -> list:
    names = [s.strip() for s in text.split(",") if s.strip()]
    bad = [s for s in names if s not in SCHEMES]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown scheme(s) {', '.join(bad)}; choose from {', '.join(SCHEMES)}")
    if len(names) < 2:
        raise argparse.ArgumentTypeError("compare needs at least two schemes")
    return names


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vamsim", description="VAM clustering simulator")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scheme and write CSV metrics")
    run.add_argument("config", type=Path)
    run.add_argument("--scheme", choices=SCHEMES)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", type=Path, default=Path("out"))
    run.add_argument("--workers", type=int, default=1)

    cmp_ = sub.add_parser("compare", help="run several schemes on the same mobility")
    cmp_.add_argument("config", type=Path)
    cmp_.add_argument("--schemes", type=_schemes, default=list(SCHEMES))
    cmp_.add_argument("--seed", type=int)
    cmp_.add_argument("--out", type=Path, help="also write per-scheme CSVs here")
    cmp_.add_argument("--workers", type=int, default=1)

    pdr = sub.add_parser("pdr-table", help="analytical PDR per scheme and separation")
    pdr.add_argument("--separations", type=_floats, default=[4.0, 2.0])
    pdr.add_argument("--cluster-sizes", type=_ints, default=[12, 20])
    pdr.add_argument("--rate", type=float, default=10.0)
    return p


def _load(args) -> ScenarioConfig:
    if not args.config.is_file():
        raise ConfigError(str(args.config), "config file not found")
    cfg = load_config(args.config)
    updates = {}
    if getattr(args, "scheme", None):
        updates["scheme"] = args.scheme
    if args.seed is not None:
        updates["seed"] = args.seed
    return dataclasses.replace(cfg, **updates) if updates else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "pdr-table":
            if len(args.cluster_sizes) not in (1, len(args.separations)):
                raise ConfigError("cluster-sizes", "give one size, or one per separation")
            sys.stdout.write(pdr_text(args.separations, args.cluster_sizes, args.rate))
            return EXIT_OK
        cfg = _load(args)
        if args.command == "run":
            results = run_scenario(cfg, args.workers)
            write_outputs(args.out, cfg, results)
            sys.stdout.write(summary_text(cfg, results))
        else:
            sys.stdout.write(compare_text(cfg, args.schemes, args.workers, args.out))
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, RuntimeError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
