from __future__ import annotations

import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from opera.errors import InvalidParameterError, ValidationError
from opera.workload import (
    FlowRecord,
    SizeDistribution,
    WorkloadSpec,
    builtin_cdf,
    gen_pattern,
    gen_poisson,
    gen_shuffle,
    load_cdf,
    offered_load,
    trace_from_csv,
    trace_to_csv,
)


def _ks(samples, dist):
    """Sup distance between the empirical and reference CDFs at each sampled value.

    Both sides are right-continuous, so the atom at the smallest size matches.
    """
    s = np.sort(samples)
    vals = np.unique(s)
    emp = np.searchsorted(s, vals, side="right") / len(s)
    return float(np.abs(emp - dist.cdf(vals)).max())


@pytest.mark.parametrize("name", ["websearch", "datamining", "hadoop"])
def test_builtin_cdf_sampling_fits(name):
    d = builtin_cdf(name)
    x = d.sample(np.random.default_rng(0), 20_000)
    assert x.min() >= d.min_size and x.max() <= d.max_size
    assert _ks(x, d) < 0.02


def test_websearch_mean_close():
    d = builtin_cdf("websearch")
    x = d.sample(np.random.default_rng(1), 200_000)
    assert x.mean() == pytest.approx(d.mean(), rel=0.03)


def test_unknown_builtin():
    with pytest.raises(InvalidParameterError):
        builtin_cdf("nope")


@pytest.mark.parametrize(
    "pts",
    [
        [(10, 0.5), (5, 1.0)],
        [(10, 0.5), (20, 0.4), (30, 1.0)],
        [(10, 0.5), (20, 0.9)],
        [(0, 0.1), (20, 1.0)],
    ],
)
def test_cdf_validation(pts):
    with pytest.raises(ValidationError):
        SizeDistribution(tuple(pts))


def test_load_cdf_text():
    d = load_cdf(io.StringIO("size_bytes,cdf\n100,0.5\n1000,1.0\n"))
    assert d.quantile(0.5) == pytest.approx(100)
    assert d.quantile(0.75) == pytest.approx(np.sqrt(100 * 1000))


@given(u=st.floats(0, 1))
def test_quantile_cdf_inverse(u):
    d = builtin_cdf("datamining")
    x = float(d.quantile(u))
    assert d.min_size <= x <= d.max_size
    if u > d.points[0][1]:
        assert float(d.cdf(x)) == pytest.approx(u, abs=1e-9)


def test_poisson_load_and_pairs():
    spec = WorkloadSpec(load=0.3, seed=4, duration=0.05)
    d = builtin_cdf("websearch")
    flows = gen_poisson(spec, d, 64)
    assert all(f.src != f.dst for f in flows)
    assert all(0 <= f.arrival < 0.05 for f in flows)
    assert offered_load(flows, 64, 10e9, 0.05) == pytest.approx(0.3, rel=0.1)
    gaps = np.diff([f.arrival for f in flows])
    assert (gaps >= 0).all()
    # exponential gaps: coefficient of variation near one
    assert gaps.std() / gaps.mean() == pytest.approx(1.0, abs=0.1)


def test_poisson_num_flows_and_tags():
    spec = WorkloadSpec(load=0.1, num_flows=500, seed=0, bulk_threshold=1_000_000)
    flows = gen_poisson(spec, builtin_cdf("datamining"), 16)
    assert len(flows) == 500
    for f in flows:
        assert f.tag == ("bulk" if f.size >= 1_000_000 else "low_latency")


def test_poisson_seeded():
    spec = WorkloadSpec(load=0.1, num_flows=50, seed=9)
    d = builtin_cdf("hadoop")
    assert gen_poisson(spec, d, 8) == gen_poisson(spec, d, 8)


def test_shuffle():
    flows = gen_shuffle(1000, 6)
    assert len(flows) == 30
    assert len({(f.src, f.dst) for f in flows}) == 30
    assert all(f.tag == "bulk" and f.arrival == 0 for f in flows)
    staggered = gen_shuffle(1000, 6, stagger=1e-3, seed=1)
    assert max(f.arrival for f in staggered) < 1e-3


def test_permutation_pattern():
    flows = gen_pattern("permutation", 1.0, 32, 8, seed=2)
    assert sorted(f.src for f in flows) == list(range(32))
    assert sorted(f.dst for f in flows) == list(range(32))
    assert all(f.src // 4 != f.dst // 4 for f in flows)


def test_hotrack_and_skew():
    hot = gen_pattern("hotrack", 1.0, 32, 8, seed=0)
    assert len(hot) == 16
    assert len({f.src // 4 for f in hot}) == 1
    skew = gen_pattern("skew", 1.0, 32, 8, seed=0, skew=0.25)
    assert len({f.src // 4 for f in skew}) == 2


def test_uniform_poisson_rate():
    flows = gen_pattern("uniform", 0.5, 16, 4, seed=0, flow_size=10_000, duration=0.02, tag="low_latency")
    assert offered_load(flows, 16, 10e9, 0.02) == pytest.approx(0.5, rel=0.1)
    assert all(f.tag == "low_latency" for f in flows)


def test_pattern_errors():
    with pytest.raises(InvalidParameterError):
        gen_pattern("ring", 0.5, 16, 4)
    with pytest.raises(InvalidParameterError):
        gen_pattern("uniform", 0.0, 16, 4)
    with pytest.raises(InvalidParameterError):
        gen_pattern("uniform", 0.5, 15, 4)


def test_trace_roundtrip():
    flows = [FlowRecord(0, 1, 2, 300, 0.125, "bulk"), FlowRecord(1, 2, 1, 7, 1e-7, "low_latency")]
    assert trace_from_csv(trace_to_csv(flows)) == flows
    with pytest.raises(ValidationError):
        trace_from_csv("id,src\n1,2\n")


def test_low_load_long_trace():
    spec = WorkloadSpec(load=0.01, duration=2.0, seed=5)
    flows = gen_poisson(spec, builtin_cdf("websearch"), 648)
    assert len(flows) > 10_000
    assert offered_load(flows, 648, 10e9, 2.0) == pytest.approx(0.01, rel=0.05)


def test_websearch_is_all_low_latency():
    spec = WorkloadSpec(load=0.25, num_flows=2000, seed=0)
    flows = gen_poisson(spec, builtin_cdf("websearch"), 64)
    assert {f.tag for f in flows} == {"low_latency"}


def test_two_hosts():
    flows = gen_poisson(WorkloadSpec(load=0.1, num_flows=20, seed=0), builtin_cdf("hadoop"), 2)
    assert {(f.src, f.dst) for f in flows} <= {(0, 1), (1, 0)}
    assert len(gen_shuffle(100, 2)) == 2
