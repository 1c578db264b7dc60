"""``hcmvne`` command line: generate, embed, simulate, report.

Exit codes: 0 success, 1 embedding or simulation failure, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from hcmvne.config import ALGORITHM_NAMES, ConfigError, RunConfig, load_config
from hcmvne.embedding import ALGORITHMS
from hcmvne.model import EmbedParams, NetworkError, cost, revenue, validate_embedding
from hcmvne.simulation import (
    read_report_csv,
    run_simulation,
    write_report_csv,
    write_request_log,
)
from hcmvne.workload import (
    BriteFormatError,
    ManifestError,
    _atomic_write,
    generate_substrate,
    generate_workload,
    read_brite,
    read_manifest,
    write_brite,
    write_workload,
)

logger = logging.getLogger("hcmvne")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _backtrack_arg(text: str):
    text = text.strip()
    if text in ("inf", "none"):
        return "inf"
    if text.endswith("n"):
        try:
            int(text[:-1] or "1")
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad backtrack formula {text!r}") from None
        return text
    try:
        return int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, 'kn' or 'inf', got {text!r}") from None


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    overrides = {
        "seed": args.seed,
        "max_hops": args.max_hops,
        "horizon": getattr(args, "horizon", None),
        "out": args.out,
        "repetitions": getattr(args, "repetitions", None),
    }
    if getattr(args, "algorithm", None):
        overrides["algorithms"] = tuple(args.algorithm)
    try:
        cfg = cfg.with_overrides(**overrides)
        if args.max_backtrack is not None:
            cfg = replace(cfg, max_backtrack=None if args.max_backtrack == "inf" else args.max_backtrack)
        return cfg
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _seed_dir(cfg: RunConfig, seed: int) -> Path:
    return Path(cfg.out) / f"seed_{seed}"


def _generate_into(cfg: RunConfig, seed: int):
    """Generate and write one seeded instance; returns (substrate, workload)."""
    out = _seed_dir(cfg, seed)
    out.mkdir(parents=True, exist_ok=True)
    sn = generate_substrate(cfg.substrate_params(), cfg.substrate_cpu,
                            (cfg.substrate_bw_min, cfg.substrate_bw_max), seed)
    workload = generate_workload(cfg.workload_params(seed))
    write_brite(sn, out / "substrate.brite")
    write_workload(workload, out / "workload")
    return sn, workload


def _write_lock(cfg: RunConfig) -> None:
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    _atomic_write(Path(cfg.out) / "config.lock", cfg.dumps())


def _seeds(cfg: RunConfig) -> list[int]:
    return [cfg.seed + i for i in range(cfg.repetitions)]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = _resolve_config(args)
    _write_lock(cfg)
    for seed in _seeds(cfg):
        sn, workload = _generate_into(cfg, seed)
        print(f"seed {seed}: substrate {len(sn.nodes)} nodes / {len(sn.links)} links, "
              f"{len(workload)} requests -> {_seed_dir(cfg, seed)}")
    return EXIT_OK


def _mapping_json(vn, outcome, algorithm: str) -> dict:
    doc = {
        "algorithm": algorithm,
        "success": outcome.success,
        "reason": outcome.reason,
        "backtracks": outcome.backtrack_count,
    }
    if outcome.success:
        m = outcome.mapping
        doc["node_map"] = {str(v): s for v, s in sorted(m.node_map.items())}
        doc["link_map"] = {str(l): list(p) for l, p in sorted(m.link_map.items())}
        doc["revenue"] = str(revenue(vn))
        doc["cost"] = str(cost(vn, m))
    if outcome.coarsened is not None:
        doc["blocks"] = [sorted(outcome.coarsened.members[c]) for c in outcome.coarsened.ids()]
    return doc


def cmd_embed(args) -> int:
    try:
        sn = read_brite(args.substrate, kind="substrate")
        vn = read_brite(args.vn, kind="virtual")
    except OSError as exc:
        raise UsageError(f"cannot read {exc.filename}: {exc.strerror}") from None
    algorithm = "no-coarsen" if args.no_coarsen else (args.algorithm[0] if args.algorithm else "hcm")
    max_backtrack = "3n" if args.max_backtrack is None else (None if args.max_backtrack == "inf" else args.max_backtrack)
    p = EmbedParams(max_hops=2 if args.max_hops is None else args.max_hops, max_backtrack=max_backtrack)
    outcome = ALGORITHMS[algorithm](vn, sn, p)
    doc = _mapping_json(vn, outcome, algorithm)
    if outcome.success:
        problems = validate_embedding(sn, vn, outcome.mapping, p)
        if problems:  # would be a bug in the embedder
            raise AssertionError("; ".join(problems))
        print(f"{algorithm}: embedded {len(vn.nodes)} virtual nodes "
              f"({len(set(outcome.mapping.node_map.values()))} substrate hosts), "
              f"{outcome.backtrack_count} backtracks")
        for v, s in sorted(outcome.mapping.node_map.items()):
            print(f"  node {v} -> {s}")
        for lid, path in sorted(outcome.mapping.link_map.items()):
            l = vn.links[lid]
            route = " ".join(str(x) for x in path) if path else "(same host)"
            print(f"  link {lid} ({l.u}-{l.v}, bw {l.bw}) -> {route}")
        print(f"  revenue {doc['revenue']} cost {doc['cost']}")
    else:
        print(f"{algorithm}: embedding failed: {outcome.reason} "
              f"after {outcome.backtrack_count} backtracks", file=sys.stderr)
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK if outcome.success else EXIT_FAIL


def _simulate_seed(cfg: RunConfig, seed: int) -> list[tuple[str, Path]]:
    _generate_into(cfg, seed)
    out = _seed_dir(cfg, seed)
    # replay from the written files so results always match the artifacts on disk
    sn = read_brite(out / "substrate.brite", kind="substrate")
    workload = read_manifest(out / "workload" / "manifest.csv")
    written = []
    for name in cfg.algorithms:
        report = run_simulation(sn.copy(), workload, name, cfg.embed_params(), cfg.horizon, cfg.sample_interval)
        path = out / f"{name}.csv"
        write_report_csv(report, path)
        write_request_log(report, out / f"{name}_requests.csv")
        written.append((name, path))
    return written


def cmd_simulate(args) -> int:
    cfg = _resolve_config(args)
    _write_lock(cfg)
    seeds = _seeds(cfg)
    if args.jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_simulate_seed, [cfg] * len(seeds), seeds))
    else:
        results = [_simulate_seed(cfg, s) for s in seeds]
    paths = [path for written in results for _, path in written]
    for p in paths:
        print(p)
    print()
    _summarize(paths, Path(cfg.out), plots=not args.no_plots)
    return EXIT_OK


def _label(path: Path) -> str:
    return path.stem


def _mean_series(runs: list[list[dict]]) -> list[dict]:
    length = min(len(r) for r in runs)
    out = []
    for i in range(length):
        row = {"time": runs[0][i]["time"]}
        for key in runs[0][i]:
            if key != "time":
                row[key] = sum(r[i][key] for r in runs) / len(runs)
        out.append(row)
    return out


def _summarize(paths: Sequence[Path], out_dir: Path, plots: bool = True) -> None:
    groups: dict[str, list[list[dict]]] = defaultdict(list)
    for path in paths:
        try:
            groups[_label(Path(path))].append(read_report_csv(path))
        except (ValueError, KeyError) as exc:
            raise UsageError(str(exc)) from None
    rank = {name: i for i, name in enumerate(ALGORITHM_NAMES)}
    labels = sorted(groups, key=lambda n: (rank.get(n, len(rank)), n))
    series = {label: _mean_series(groups[label]) for label in labels}
    print(f"{'algorithm':<12} {'runs':>4} {'time':>7} {'acceptance':>10} {'avg_revenue':>12} {'rc_ratio':>9}")
    for label in labels:
        end = series[label][-1]
        print(f"{label:<12} {len(groups[label]):>4} {end['time']:>7} {end['acceptance_ratio']:>10.4f} "
              f"{end['avg_revenue']:>12.2f} {end['rc_ratio']:>9.4f}")
    if plots:
        from hcmvne.plots import plot_series

        for path in plot_series(series, out_dir):
            print(f"wrote {path}")


def cmd_report(args) -> int:
    paths = [Path(p) for p in args.csv]
    for p in paths:
        if not p.is_file():
            raise UsageError(f"no such report file: {p}")
    out_dir = Path(args.out) if args.out else paths[0].parent
    _summarize(paths, out_dir, plots=not args.no_plots)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file (key = value)")
    common.add_argument("--seed", type=int, help="first seed (overrides config)")
    common.add_argument("--max-hops", type=int, dest="max_hops")
    common.add_argument("--max-backtrack", type=_backtrack_arg, dest="max_backtrack",
                        help="integer, 'kn' for k times the node count, or 'inf'")
    common.add_argument("--out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hcmvne", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write substrate, VN files and manifest")
    g.add_argument("--repetitions", type=int, help="number of consecutive seeds")
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("embed", parents=[common], help="embed one VN file onto one substrate file")
    e.add_argument("substrate")
    e.add_argument("vn")
    e.add_argument("--algorithm", choices=ALGORITHM_NAMES, action="append")
    e.add_argument("--no-coarsen", action="store_true", help="same as --algorithm no-coarsen")
    e.set_defaults(func=cmd_embed)

    s = sub.add_parser("simulate", parents=[common], help="replay workloads and write metric CSVs")
    s.add_argument("--algorithm", choices=ALGORITHM_NAMES, action="append",
                   help="repeatable; default is every algorithm in the config")
    s.add_argument("--horizon", type=int)
    s.add_argument("--repetitions", type=int, help="number of consecutive seeds")
    s.add_argument("--jobs", type=int, default=1, help="parallel seeded repetitions")
    s.add_argument("--no-plots", action="store_true")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="endpoint table and figures from report CSVs")
    r.add_argument("csv", nargs="+")
    r.add_argument("--out", help="figure directory (default: next to the first CSV)")
    r.add_argument("--no-plots", action="store_true")
    r.add_argument("-v", "--verbose", action="store_true")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, BriteFormatError, ManifestError, NetworkError) as exc:
        print(f"hcmvne {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"hcmvne {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
