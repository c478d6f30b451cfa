import json
import math
import statistics

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gesf.report import (MetricRow, aggregate, metrics_document, read_csv, render_csv, render_json,
                         rows_from_metrics, write_reports)


def rows_strategy():
    row = st.builds(MetricRow, st.sampled_from(["a", "b"]), st.sampled_from([0.1, 0.5]),
                    st.integers(0, 5), st.sampled_from(["accuracy", "micro_f1"]),
                    st.floats(0, 1, allow_nan=False))
    return st.lists(row, max_size=30, unique_by=lambda r: (r.dataset, r.fraction, r.seed, r.metric))


def test_grid_shape_and_sample_std():
    rows = [MetricRow("email", 0.5, s, "accuracy", v) for s, v in enumerate([0.7, 0.8, 0.75])]
    (agg,) = aggregate(rows)
    assert agg["n"] == 3
    assert agg["mean"] == pytest.approx(0.75, abs=1e-12)
    assert agg["std"] == pytest.approx(statistics.stdev([0.7, 0.8, 0.75]), abs=1e-12)


def test_single_seed_std_is_zero():
    (agg,) = aggregate([MetricRow("x", 0.5, 0, "accuracy", 0.4)])
    assert agg["std"] == 0.0 and not math.isnan(agg["std"])


@settings(max_examples=50, deadline=None)
@given(rows_strategy())
def test_aggregates_recomputable(rows):
    for agg in aggregate(rows):
        vals = [r.value for r in rows if (r.dataset, r.fraction, r.metric) ==
                (agg["dataset"], agg["fraction"], agg["metric"])]
        assert agg["n"] == len(vals)
        assert abs(agg["mean"] - sum(vals) / len(vals)) <= 1e-12


@settings(max_examples=50, deadline=None)
@given(rows_strategy())
def test_json_and_csv_agree(rows):
    doc = json.loads(render_json(metrics_document(rows)))
    import csv
    import io
    csv_rows = list(csv.DictReader(io.StringIO(render_csv(rows))))
    assert len(csv_rows) == len(doc["rows"])
    for c, j in zip(csv_rows, doc["rows"]):
        assert c["dataset"] == j["dataset"] and int(c["seed"]) == j["seed"]
        assert abs(float(c["value"]) - j["value"]) <= 1e-12


def test_render_is_order_independent():
    rows = rows_from_metrics("d", 0.5, 1, {"b": 0.2, "a": 0.1}) + rows_from_metrics("d", 0.5, 0, {"a": 0.3})
    assert render_json(metrics_document(rows)) == render_json(metrics_document(rows[::-1]))
    assert render_csv(rows) == render_csv(rows[::-1])


def test_write_and_read(tmp_path):
    rows = rows_from_metrics("d", 0.3, 2, {"accuracy": 0.1 + 0.2})
    jpath, cpath = write_reports(tmp_path, rows, [{"dataset": "d", "fraction": 0.3, "seed": 3, "error": "E: x"}])
    assert cpath.read_text().splitlines()[0] == "dataset,fraction,seed,metric,value"
    assert read_csv(cpath) == rows
    doc = json.loads(jpath.read_text())
    assert doc["failures"][0]["seed"] == 3
    assert set(doc) == {"rows", "aggregates", "failures"}
