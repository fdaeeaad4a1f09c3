import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpsent.cluster import ClusterConfig, train_distributed
from dpsent.errors import ContractError, ReportError
from dpsent.model import Hyperparams, ModelParams
from dpsent.phases import TransferPhase, TransferRecord
from dpsent.report import (
    REFERENCE_RESULTS,
    Comparison,
    RunReport,
    bandwidth_table,
    canonical_json,
    compare,
    fingerprint,
    params_digest,
    read_report,
    render_bandwidth,
    render_comparison,
    write_report,
)
from dpsent.synthetic import separable_clusters

GOLDEN = Path(__file__).parent / "golden"


def reference_pair():
    s = REFERENCE_RESULTS["single"]
    d = REFERENCE_RESULTS["distributed"]
    return (
        RunReport.from_values("single", s["processing_seconds"], s["accuracy"]),
        RunReport.from_values("distributed", d["processing_seconds"], d["accuracy"], d["workers"]),
    )


def test_compare_published_values():
    comp = compare(*reference_pair())
    t, a = comp.row("processing_time"), comp.row("accuracy")
    assert t.improvement_pct == pytest.approx((179 - 46) / 179 * 100, rel=1e-15)
    assert round(t.improvement_pct, 1) == 74.3
    assert round(a.improvement_pct, 2) == 3.40
    assert a.absolute_delta == pytest.approx(2.9, abs=1e-12)
    # the stated figures are these values rounded up
    assert abs(t.improvement_pct - REFERENCE_RESULTS["stated_improvement_pct"]["processing_time"]) < 1.0
    assert abs(a.improvement_pct - REFERENCE_RESULTS["stated_improvement_pct"]["accuracy"]) < 0.15


def test_compare_identical_is_zero():
    s, _ = reference_pair()
    comp = compare(s, s)
    assert all(r.improvement_pct == 0.0 for r in comp.rows)
    assert {r.name for r in comp.rows} == {"processing_time", "accuracy"}


def test_compare_missing_field_named():
    s, d = reference_pair()
    d.processing_seconds = None
    with pytest.raises(ReportError, match="processing_seconds"):
        compare(s, d)
    s.metrics = None
    with pytest.raises(ReportError, match="metrics"):
        compare(s, reference_pair()[1])


def test_comparison_table_golden():
    assert render_comparison(compare(*reference_pair())) == (GOLDEN / "comparison_table.txt").read_text()


def test_bandwidth_one_transfer():
    rows = bandwidth_table([TransferRecord(TransferPhase.DATA_DISTRIBUTION, "m", "w0", 1_250_000_000, 1.0)])
    assert len(rows) == 1
    assert rows[0].avg_gbps == pytest.approx(10.0) and rows[0].peak_gbps == pytest.approx(10.0)


def test_bandwidth_order_omission_and_zero_duration():
    recs = [
        TransferRecord(TransferPhase.RESULT_COLLECTION, "w0", "m", 32, 1e-6),
        TransferRecord(TransferPhase.DATA_DISTRIBUTION, "m", "w0", 1000, 0.0),
        TransferRecord(TransferPhase.DATA_DISTRIBUTION, "m", "w1", 1000, 1e-6),
    ]
    rows = bandwidth_table(recs)
    assert [r.phase for r in rows] == ["DataDistribution", "ResultCollection"]
    assert rows[0].bytes == 2000
    assert rows[0].peak_gbps == pytest.approx(8.0)
    assert rows[0].avg_gbps == pytest.approx(16.0)


def test_bandwidth_empty_rejected():
    with pytest.raises(ContractError):
        bandwidth_table([])


def test_bandwidth_ordering_on_a_run():
    _, _, rep = train_distributed(separable_clusters(800, 16, seed=0), Hyperparams(epochs=1),
                                  ClusterConfig(worker_count=4))
    rows = {r.phase: r for r in bandwidth_table(rep.transfers)}
    assert list(rows) == ["DataDistribution", "ModelSynchronization", "ResultCollection"]
    assert rows["DataDistribution"].avg_gbps >= rows["ModelSynchronization"].avg_gbps
    assert rows["ModelSynchronization"].avg_gbps >= rows["ResultCollection"].avg_gbps
    text = render_bandwidth(list(rows.values()))
    assert text.splitlines()[0].split() == ["Phase", "Avg.", "BW", "Peak", "BW"]


def test_canonical_json_format():
    text = canonical_json({"b": 1.0, "a": [0.1, 2, None, True], "c": {"z": 1e-20, "y": "s"}})
    assert text.endswith("\n")
    assert text == (
        '{\n  "a": [\n    0.10000000000000001,\n    2,\n    null,\n    true\n  ],\n'
        '  "b": 1.0,\n  "c": {\n    "y": "s",\n    "z": 9.9999999999999995e-21\n  }\n}\n'
    )


def test_canonical_json_rejects_nan():
    with pytest.raises(ReportError):
        canonical_json({"x": float("nan")})


@settings(max_examples=100)
@given(st.recursive(
    st.none() | st.booleans() | st.integers(-10**12, 10**12) | st.floats(allow_nan=False, allow_infinity=False)
    | st.text(max_size=8),
    lambda inner: st.lists(inner, max_size=4) | st.dictionaries(st.text(max_size=6), inner, max_size=4),
    max_leaves=12,
))
def test_canonical_json_round_trips(value):
    text = canonical_json(value)
    assert json.loads(text) == value
    assert canonical_json(json.loads(text)) == text


def test_run_report_round_trip(tmp_path):
    params, metrics, rep = train_distributed(separable_clusters(500, 8, seed=1), Hyperparams(epochs=1),
                                             ClusterConfig(worker_count=2))
    report = RunReport.from_run("distributed", params, metrics, rep, "abc", include_measured=True)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    write_report(report, p1)
    back = read_report(p1)
    assert back == report
    write_report(back, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_comparison_round_trip(tmp_path):
    comp = compare(*reference_pair())
    write_report(comp, tmp_path / "c.json")
    back = read_report(tmp_path / "c.json")
    assert isinstance(back, Comparison) and back == comp
    write_report(comp, tmp_path / "d.json")
    assert (tmp_path / "c.json").read_bytes() == (tmp_path / "d.json").read_bytes()


def test_fingerprint_and_digest_deterministic():
    cfg = {"seed": 1, "lr": 0.01, "nested": {"b": 2, "a": 1}}
    assert fingerprint(cfg) == fingerprint(dict(reversed(list(cfg.items()))))
    assert fingerprint(cfg) != fingerprint({**cfg, "seed": 2})
    p = ModelParams(np.array([1.0, -2.0]), 0.5)
    assert params_digest(p) == params_digest(ModelParams(np.array([1.0, -2.0]), 0.5))
    assert len(params_digest(p)) == 64
