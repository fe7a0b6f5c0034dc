from __future__ import annotations

import csv
import io
import itertools

import networkx as nx
import numpy as np
import pytest

from opera.analysis import (
    FailureSet,
    direct_coverage,
    distance_matrix,
    expander_baseline_gap,
    failure_sweep,
    infer_uplinks,
    inject_and_measure,
    metrics_to_csv,
    ruleset_size,
    schedule_metrics,
    spectral_gap,
    zero_loss_threshold,
)
from opera.errors import InvalidParameterError


def test_ring_metrics_oracle():
    n = 8
    edges = [(i, (i + 1) % n) for i in range(n)]
    D = distance_matrix(n, edges)
    assert D.max() == 4
    assert D[~np.eye(n, dtype=bool)].mean() == pytest.approx(16 / 7)


def test_complete_graph_gap():
    n = 9
    edges = list(itertools.combinations(range(n), 2))
    # eigenvalues n-1 and -1: gap is (n-1) - 1
    assert spectral_gap(n, edges) == pytest.approx(n - 2)


def test_gap_matches_networkx():
    g = nx.random_regular_graph(4, 30, seed=3)
    eig = np.sort(np.linalg.eigvalsh(nx.to_numpy_array(g)))
    want = 4 - max(abs(eig[-2]), abs(eig[0]))
    assert spectral_gap(30, list(g.edges)) == pytest.approx(want)


def test_disconnected_slice_reported():
    n = 6
    D = distance_matrix(n, [(0, 1), (2, 3), (4, 5)])
    assert np.isinf(D[0, 2])


def test_schedule_metrics_k12(k12):
    _, s = k12
    rows = schedule_metrics(s)
    assert len(rows) == 108
    assert all(r.connected for r in rows)
    assert max(r.diameter for r in rows) <= 5
    for r in rows[:3]:
        assert sum(r.path_length_histogram.values()) == 108 * 107
    text = metrics_to_csv(rows)
    assert len(list(csv.DictReader(io.StringIO(text)))) == 108


def test_direct_coverage_bijection(k12):
    t, s = k12
    cov = direct_coverage(s)
    assert len(cov) == t.N * (t.N - 1)
    for (a, b), (i, sw) in list(cov.items())[:500]:
        assert s.slice(i).direct_switch(a, b) == sw
        assert cov[(b, a)] == (i, sw)


def test_eight_rack_coverage(eight_rack):
    _, s = eight_rack
    cov = direct_coverage(s)
    i, sw = cov[(0, 7)]
    assert sw == 1
    assert s.slice(i).active_index[sw] == 1


def test_no_failures_no_loss(k12):
    _, s = k12
    r = inject_and_measure(s, FailureSet())
    assert r.worst_slice_disconnected_pairs == 0
    assert r.integrated_disconnected_pairs == 0
    assert r.surviving_tors == 108


def test_all_switches_failed(eight_rack):
    _, s = eight_rack
    r = inject_and_measure(s, FailureSet(failed_switches=frozenset(range(4))), paths=False)
    assert r.worst_slice_loss == 1.0
    assert r.integrated_loss == 1.0


def test_failed_tor_excluded_from_pairs(eight_rack):
    _, s = eight_rack
    r = inject_and_measure(s, FailureSet(failed_tors=frozenset({3})), paths=False)
    assert r.surviving_tors == 7
    assert r.pair_count == 42


def test_failure_set_checked(eight_rack):
    _, s = eight_rack
    with pytest.raises(InvalidParameterError):
        inject_and_measure(s, FailureSet(failed_switches=frozenset({9})))


def test_sweep_monotone_within_seed(eight_rack):
    _, s = eight_rack
    pts = failure_sweep(s, "link", [0.0, 0.1, 0.2, 0.4, 0.6], seeds=[1])
    losses = [p.mean_integrated_loss for p in pts]
    assert losses == sorted(losses)
    assert pts[0].mean_integrated_loss == 0.0
    assert zero_loss_threshold(pts) == max(p.fraction for p in pts if p.mean_integrated_loss == 0)


def test_sweep_bad_kind(eight_rack):
    _, s = eight_rack
    with pytest.raises(InvalidParameterError):
        failure_sweep(s, "cable", [0.1], [0])
    with pytest.raises(InvalidParameterError):
        failure_sweep(s, "link", [1.5], [0])


def test_ruleset_formula_and_inverse():
    assert ruleset_size(108, 6) == 12_096
    for n, u in [(108, 6), (520, 9), (1272, 13)]:
        assert infer_uplinks(n, ruleset_size(n, u)) == u
    assert infer_uplinks(108, 12_097) is None


def test_expander_baseline_gap_reproducible():
    a = expander_baseline_gap(5, 108, 10, seed=1)
    assert a == expander_baseline_gap(5, 108, 10, seed=1)
    assert 0 < a < 5


def test_ruleset_trivial():
    assert ruleset_size(2, 1) == 2


def test_single_matching_gap_is_zero():
    assert expander_baseline_gap(1, 4, 5, seed=0) == 0.0


def test_zero_fraction_no_loss(k12):
    _, s = k12
    pts = failure_sweep(s, "tor", [0.0], seeds=range(3))
    assert pts[0].mean_integrated_loss == 0.0 and pts[0].failed == 0
