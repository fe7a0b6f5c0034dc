from __future__ import annotations

import random
from collections import Counter

import networkx as nx
import pytest
from scipy.stats import chisquare

from opera.analysis import ruleset_size
from opera.errors import InvalidParameterError, NoCandidateError
from opera.routing import (
    BULK,
    LOW_LATENCY,
    build_all_tables,
    classify,
    tables_from_adjacency,
    tables_to_csv,
    vlb_intermediate,
    walk_low_latency,
)


def _ring(n):
    return [((i - 1) % n, 0) for i in range(n)], [((i + 1) % n, 1) for i in range(n)]


def test_ring_distances():
    left, right = _ring(8)
    nbrs = [tuple(sorted((left[i], right[i]))) for i in range(8)]
    tabs = tables_from_adjacency(nbrs)
    assert max(tabs[0].distance.values()) == 4
    total = sum(sum(t.distance.values()) for t in tabs)
    assert total / (8 * 7) == pytest.approx(16 / 7)
    # the antipode is reachable both ways round
    assert len(tabs[0].low_latency[4]) == 2


def test_tables_match_networkx(k12):
    _, s = k12
    sl = s.slice(17)
    g = nx.Graph()
    g.add_edges_from((a, b) for a, b, _ in sl.union_edges)
    dist = dict(nx.all_pairs_shortest_path_length(g))
    tabs = build_all_tables(sl)
    for src in (0, 31, 107):
        for dst, d in tabs[src].distance.items():
            assert d == dist[src][dst]
            for peer, _ in tabs[src].low_latency[dst]:
                assert dist[peer][dst] == d - 1


def test_walk_reaches_destination(k12):
    _, s = k12
    tabs = build_all_tables(s.slice(5))
    for dst in range(1, 108, 13):
        path = walk_low_latency(tabs, 0, dst)
        assert path[-1] == dst
        assert len(path) - 1 == tabs[0].distance[dst]


def test_ruleset_count_from_tables(k12):
    """Low-latency entries plus bulk-direct entries over a cycle reproduce the formula.

    Each matching is up for u - 1 slices and gives one bulk rule per slice,
    except when it leaves this rack on a fixed point.
    """
    t, s = k12
    per_slice = [build_all_tables(sl) for sl in s.slices]
    src = 3
    ll = sum(len(p[src].low_latency) for p in per_slice)
    bulk = sum(len(p[src].bulk_direct) for p in per_slice)
    fixed = sum(1 for m in t.all_matchings() if m.partner(src) == src)
    assert ll == t.N * (t.N - 1)
    assert ll + bulk == ruleset_size(t.N, t.u) - (t.u - 1) * fixed
    assert ruleset_size(t.N, t.u) == 108 * 107 + 108 * 5


def test_classify():
    assert classify(10, 100).kind == LOW_LATENCY
    assert classify(100, 100).is_bulk
    assert classify(10, 100, tag=BULK).is_bulk
    assert classify(10**9, 100, tag=LOW_LATENCY).kind == LOW_LATENCY
    with pytest.raises(InvalidParameterError):
        classify(10, 0)
    with pytest.raises(InvalidParameterError):
        classify(10, 100, tag="urgent")


def test_vlb_uniform_over_candidates(k12):
    _, s = k12
    sl = s.slice(0)
    src, dst = 0, 50
    mids = [m for m, _ in sl.neighbors[src] if m != dst]
    spare = {m: 1.0 for m in mids}
    rng = random.Random(7)
    picks = Counter(vlb_intermediate(src, dst, s, 0, spare, rng) for _ in range(1000))
    assert set(picks) <= set(mids)
    assert chisquare([picks[m] for m in mids]).pvalue > 0.01


def test_vlb_respects_spare(k12):
    _, s = k12
    sl = s.slice(0)
    mids = [m for m, _ in sl.neighbors[0] if m != 50]
    spare = {mids[0]: 10.0}
    rng = random.Random(0)
    assert vlb_intermediate(0, 50, s, 0, spare, rng) == mids[0]
    with pytest.raises(NoCandidateError):
        vlb_intermediate(0, 50, s, 0, {}, rng)
    with pytest.raises(InvalidParameterError):
        vlb_intermediate(4, 4, s, 0, spare, rng)


def test_tables_csv(eight_rack):
    _, s = eight_rack
    text = tables_to_csv([build_all_tables(sl) for sl in s.slices[:2]])
    assert text.splitlines()[0].startswith("slice")
    assert len(text.splitlines()) > 2


def test_classify_empty_flow():
    assert classify(0, 15_000_000).kind == LOW_LATENCY
