"""Command-line entry point: ``gesf {train,eval,sweep,checks,convert-linqs,synthetic}``.

Exit codes: 0 success, 1 a library error or failed check, 2 bad arguments
or a missing input file.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import checks as checks_mod
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import GesfError
from .graph import MODES, Graph, load_graph, make_split
from .model import TrainConfig, build_basis, evaluate, train
from .report import format_table, rows_from_metrics, write_reports
from .synthetic import hub_graph, two_community


class UsageFailure(Exception):
    """Bad invocation detected after argument parsing (exit 2)."""


def _graph_args(p):
    p.add_argument("--edges", required=True, help="edge list, two integer ids per line")
    p.add_argument("--labels", required=True, help="'node label' pairs; repeat a node for multilabel")
    p.add_argument("--types", help="'node type' pairs; omit for a homogeneous graph")
    p.add_argument("--mode", choices=MODES, default=None)
    p.add_argument("--dataset", help="name used in reports (default: edge file stem)")


def _train_args(p):
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--rank", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--cache", help="directory for cached spectral bases")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gesf", description="Set-function graph embeddings.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one model and write a checkpoint and metrics")
    _graph_args(p)
    _train_args(p)
    p.add_argument("--frac", type=float, default=0.5, help="fraction of labeled nodes used for training")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    _graph_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--frac", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="directory for metrics.json and metrics.csv")

    p = sub.add_parser("sweep", help="train and evaluate a fractions x seeds grid")
    _graph_args(p)
    _train_args(p)
    p.add_argument("--frac", type=float, nargs="+", default=[0.5])
    p.add_argument("--seed", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--out", required=True)

    p = sub.add_parser("checks", help="run a numerical property battery")
    p.add_argument("--suite", choices=[*checks_mod.SUITES, "all"], default="all")
    p.add_argument("--out", help="write checks.json into this directory")

    p = sub.add_parser("convert-linqs", help="turn .content/.cites files into integer edge and label files")
    p.add_argument("--content", required=True)
    p.add_argument("--cites", required=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("synthetic", help="write a seeded synthetic graph as edge/type/label files")
    p.add_argument("--kind", choices=("hub", "two-community"), default="hub")
    p.add_argument("--mode", choices=MODES, default="multiclass")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    return parser


def _load(args) -> Graph:
    return load_graph(args.edges, args.labels, args.types, mode=args.mode or "multiclass")


def _config(args, mode) -> TrainConfig:
    d = {}
    if args.config:
        if not Path(args.config).is_file():
            raise FileNotFoundError(f"no such file: {args.config}")
        d = json.loads(Path(args.config).read_text())
    for key in ("rank", "epochs"):
        if getattr(args, key) is not None:
            d[key] = getattr(args, key)
    if mode is not None:
        d["mode"] = mode
    return TrainConfig.from_dict(d)


def _dataset(args) -> str:
    return args.dataset or Path(args.edges).stem


def _run_cell(g, cfg, frac, seed, cache):
    split = make_split(g, frac, seed)
    cfg = TrainConfig.from_dict({**cfg.to_dict(), "seed": seed})
    basis = build_basis(g, cfg, cache)
    m, history = train(g, split, cfg, basis=basis)
    return m, basis, cfg, evaluate(m, g, split)


def cmd_train(args) -> int:
    cfg = _config(args, args.mode)
    g = load_graph(args.edges, args.labels, args.types, mode=cfg.mode)
    m, basis, cfg, metrics = _run_cell(g, cfg, args.frac, args.seed, args.cache)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "model.ckpt", m, basis.a_hash, cfg)
    write_reports(out, rows_from_metrics(_dataset(args), args.frac, args.seed, metrics))
    for name, value in sorted(metrics.items()):
        print(f"{name} {value:.4f}")
    return 0


def cmd_eval(args) -> int:
    if not Path(args.checkpoint).is_file():
        raise FileNotFoundError(f"no such file: {args.checkpoint}")
    m, _, cfg = load_checkpoint(args.checkpoint)
    mode = args.mode or m.mode
    g = load_graph(args.edges, args.labels, args.types, mode=mode)
    if not np.array_equal(m.node_type, g.node_type):
        raise UsageFailure("checkpoint node types do not match the graph")
    metrics = evaluate(m, g, make_split(g, args.frac, args.seed), mode)
    if args.out:
        write_reports(args.out, rows_from_metrics(_dataset(args), args.frac, args.seed, metrics))
    for name, value in sorted(metrics.items()):
        print(f"{name} {value:.4f}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args, args.mode)
    g = load_graph(args.edges, args.labels, args.types, mode=cfg.mode)
    name = _dataset(args)
    for frac in args.frac:
        if not 0.0 < frac < 1.0:
            raise UsageFailure(f"fraction {frac} outside (0, 1)")
    rows, failures = [], []
    for frac in args.frac:
        for seed in args.seed:
            try:
                _, _, _, metrics = _run_cell(g, cfg, frac, seed, args.cache)
            except GesfError as exc:
                failures.append({"dataset": name, "fraction": float(frac), "seed": int(seed),
                                 "error": f"{type(exc).__name__}: {exc}"})
                print(f"cell frac={frac} seed={seed} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
                continue
            rows += rows_from_metrics(name, frac, seed, metrics)
    jpath, _ = write_reports(args.out, rows, failures)
    doc = json.loads(jpath.read_text())
    if doc["aggregates"]:
        print(format_table(doc["aggregates"]))
    return 1 if failures else 0


def cmd_checks(args) -> int:
    results = checks_mod.run_suite(args.suite)
    for r in results:
        print(r.line())
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        doc = {"suite": args.suite,
               "checks": [{"name": r.name, "max_deviation": r.deviation,
                           "tolerance": r.tolerance, "passed": r.passed} for r in results]}
        (out / "checks.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0 if all(r.passed for r in results) else 1


def convert_linqs(content_path, cites_path, out_dir) -> tuple[Path, Path, Path]:
    """Map document ids and class names to integers; citations to unknown documents are dropped.

    Writes ``edges.txt``, ``labels.txt`` and ``ids.tsv`` (original id, index, class name).
    """
    for p in (content_path, cites_path):
        if not Path(p).is_file():
            raise FileNotFoundError(f"no such file: {p}")
    ids, classes = [], []
    with open(content_path) as fh:
        for line in fh:
            parts = line.split()
            if parts:
                ids.append(parts[0])
                classes.append(parts[-1])
    index = {pid: i for i, pid in enumerate(ids)}
    class_index = {c: i for i, c in enumerate(sorted(set(classes)))}
    edges = []
    with open(cites_path) as fh:
        for line in fh:
            parts = line.split()
            if len(parts) == 2 and parts[0] in index and parts[1] in index:
                edges.append((index[parts[0]], index[parts[1]]))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    e, l, m = out / "edges.txt", out / "labels.txt", out / "ids.tsv"
    e.write_text("".join(f"{a} {b}\n" for a, b in edges))
    l.write_text("".join(f"{i} {class_index[c]}\n" for i, c in enumerate(classes)))
    m.write_text("".join(f"{pid}\t{i}\t{c}\n" for i, (pid, c) in enumerate(zip(ids, classes))))
    return e, l, m


def write_graph_files(g: Graph, out_dir) -> tuple[Path, Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    e, t, l = out / "edges.txt", out / "types.txt", out / "labels.txt"
    e.write_text("".join(f"{a} {b}\n" for a, b in g.edges.tolist()))
    t.write_text("".join(f"{v} {k}\n" for v, k in enumerate(g.node_type.tolist())))
    if g.mode == "multiclass":
        l.write_text("".join(f"{v} {y}\n" for v, y in g.labels.items()))
    else:
        l.write_text("".join(f"{v} {y}\n" for v, ys in g.labels.items() for y in sorted(ys)))
    return e, t, l


def cmd_convert(args) -> int:
    for p in convert_linqs(args.content, args.cites, args.out):
        print(p)
    return 0


def cmd_synthetic(args) -> int:
    if args.kind == "hub":
        g = hub_graph(seed=args.seed, mode=args.mode)
    else:
        g = two_community(seed=args.seed)
    for p in write_graph_files(g, args.out):
        print(p)
    return 0


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
    "checks": cmd_checks,
    "convert-linqs": cmd_convert,
    "synthetic": cmd_synthetic,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (FileNotFoundError, UsageFailure) as exc:
        print(f"gesf: {exc}", file=sys.stderr)
        return 2
    except (GesfError, ValueError) as exc:
        print(f"gesf: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
