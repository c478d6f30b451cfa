"""Metric rows, aggregates and their JSON/CSV renderings.

Both writers are deterministic: identical rows give byte-identical files.
Floats are written with ``repr`` so the CSV and JSON carry the same values.
"""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass
from pathlib import Path

CSV_HEADER = ("dataset", "fraction", "seed", "metric", "value")


@dataclass(frozen=True)
class MetricRow:
    dataset: str
    fraction: float
    seed: int
    metric: str
    value: float


def rows_from_metrics(dataset: str, fraction: float, seed: int, metrics: dict) -> list[MetricRow]:
    return [MetricRow(dataset, float(fraction), int(seed), name, float(metrics[name]))
            for name in sorted(metrics)]


def _sort_key(r: MetricRow):
    return (r.dataset, r.fraction, r.metric, r.seed)


def aggregate(rows) -> list[dict]:
    """Mean and sample standard deviation per (dataset, fraction, metric); std is 0 for one row."""
    groups = defaultdict(list)
    for r in sorted(rows, key=_sort_key):
        groups[(r.dataset, r.fraction, r.metric)].append(r.value)
    out = []
    for (dataset, fraction, metric), vals in sorted(groups.items()):
        n = len(vals)
        mean = math.fsum(vals) / n
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (n - 1)) if n > 1 else 0.0
        out.append({"dataset": dataset, "fraction": fraction, "metric": metric,
                    "n": n, "mean": mean, "std": std})
    return out


def metrics_document(rows, failures=()) -> dict:
    rows = sorted(rows, key=_sort_key)
    return {
        "rows": [asdict(r) for r in rows],
        "aggregates": aggregate(rows),
        "failures": sorted((dict(f) for f in failures),
                           key=lambda f: (f["dataset"], f["fraction"], f["seed"])),
    }


def render_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def render_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in sorted(rows, key=_sort_key):
        w.writerow([r.dataset, repr(r.fraction), r.seed, r.metric, repr(r.value)])
    return buf.getvalue()


def read_csv(path) -> list[MetricRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected CSV header {reader.fieldnames}")
        return [MetricRow(r["dataset"], float(r["fraction"]), int(r["seed"]), r["metric"],
                          float(r["value"])) for r in reader]


def write_reports(out_dir, rows, failures=()) -> tuple[Path, Path]:
    """Write ``metrics.json`` and ``metrics.csv`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    jpath, cpath = out / "metrics.json", out / "metrics.csv"
    jpath.write_text(render_json(metrics_document(rows, failures)))
    cpath.write_text(render_csv(rows))
    return jpath, cpath


def format_table(aggregates) -> str:
    """One line per aggregate, in percent as ``mean +- std``."""
    lines = []
    for a in aggregates:
        lines.append(f"{a['dataset']:<12} {a['fraction']:>5.0%}  {a['metric']:<9} "
                     f"{100 * a['mean']:6.2f} +- {100 * a['std']:5.2f}  (n={a['n']})")
    return "\n".join(lines)
