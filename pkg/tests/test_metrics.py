from __future__ import annotations

import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from opera.metrics import Delivery, nearest_rank, report_metrics, tax_from_histogram
from opera.workload import FlowRecord


def test_nearest_rank():
    v = list(range(1, 101))
    assert nearest_rank(v, 50) == 50
    assert nearest_rank(v, 99) == 99
    assert nearest_rank(v, 100) == 100
    assert nearest_rank([3.0], 1) == 3.0
    assert math.isnan(nearest_rank([], 50))


@given(st.dictionaries(st.integers(1, 8), st.integers(0, 10**9), min_size=1))
def test_tax_identity(hist):
    total = sum(hist.values())
    want = sum((h - 1) * b for h, b in hist.items()) / total if total else 0.0
    assert tax_from_histogram(hist) == pytest.approx(want, rel=1e-12)


def test_synthetic_tax():
    # 96 % direct bytes, 4 % at a mean of 3.1 hops (10 % at 4 hops, 90 % at 3)
    hist = {1: 96_000_000, 3: 3_600_000, 4: 400_000}
    assert tax_from_histogram(hist) == pytest.approx(0.04 * 2.1)


def _flows():
    return [
        FlowRecord(0, 0, 5, 3000, 0.0, "low_latency"),
        FlowRecord(1, 1, 2, 1500, 1e-3, "bulk"),
        FlowRecord(2, 0, 9, 1500, 0.0, "low_latency"),
    ]


def test_report_basics():
    dels = [
        Delivery(0, 1e-4, 1500, 1),
        Delivery(0, 2e-4, 1500, 3),
        Delivery(1, 1.5e-3, 1500, 0),
    ]
    rep = report_metrics(_flows(), dels, bin_width=1e-3)
    fct = {f.id: f.fct for f in rep.flows}
    assert fct[0] == pytest.approx(2e-4)
    assert fct[1] == pytest.approx(0.5e-3)
    assert fct[2] is None
    assert rep.hop_histogram == {1: 1500, 3: 1500}
    assert rep.rack_local_bytes == 1500
    assert rep.tax == pytest.approx(1.0)
    assert rep.extra_link_bytes == 3000
    assert rep.throughput == [(0.0, 24000.0), (1e-3, 12000.0)]
    assert rep.aggregate_throughput() == pytest.approx(36000 / 2e-3)
    assert rep.flows[0].hops_mean == pytest.approx(2.0)


def test_report_serializes_nan_free():
    rep = report_metrics(_flows(), [])
    data = json.loads(rep.to_json())
    assert data["completed"] == 0
    assert data["fct_p50_s"] is None
    assert rep.aggregate_throughput() == 0.0
    assert rep.flows_csv().count("\n") == 4


def test_explicit_completion_wins():
    rep = report_metrics(_flows()[:1], [Delivery(0, 1e-4, 3000, 1)], completion={0: 5e-4})
    assert rep.flows[0].fct == pytest.approx(5e-4)


def test_size_buckets():
    flows = [FlowRecord(i, 0, 1, s, 0.0, "bulk") for i, s in enumerate([100, 50_000, 2_000_000])]
    dels = [Delivery(f.id, 1e-3 * (f.id + 1), f.size, 1) for f in flows]
    rep = report_metrics(flows, dels)
    assert set(rep.fct_percentiles) == {"[0,10000)", "[10000,100000)", "[1000000,15000000)"}
