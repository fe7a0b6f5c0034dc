from __future__ import annotations

import pytest

from opera.costmodel import (
    DEFAULT_PART_COSTS,
    CostParams,
    alpha_clos,
    alpha_expander,
    alpha_from_parts,
    amortize,
    clos_sizing,
    hosts_for_alpha,
    parts_from_csv,
    parts_to_csv,
)
from opera.errors import InvalidParameterError


def test_alpha_from_parts():
    assert alpha_from_parts() == pytest.approx(275 / 215)
    assert round(alpha_from_parts(), 1) == 1.3


def test_clos_alpha():
    assert alpha_clos(3, 3) == pytest.approx(4 / 3)
    assert alpha_clos(3, 1) == 4
    with pytest.raises(InvalidParameterError):
        alpha_clos(1, 3)


def test_expander_alpha():
    assert alpha_expander(7, 12) == pytest.approx(7 / 5)
    with pytest.raises(InvalidParameterError):
        alpha_expander(12, 12)


@pytest.mark.parametrize("k,hosts", [(12, 648), (24, 5184)])
def test_hosts_for_alpha(k, hosts):
    assert hosts_for_alpha(k, 4 / 3) == (3, hosts)


def test_sizing_rounds_to_nearest():
    r = clos_sizing(12, 1.3)
    assert r.F_exact == pytest.approx(4 / 1.3)
    assert r.F == 3
    assert not r.integral
    assert clos_sizing(12, 4 / 3).integral
    with pytest.raises(InvalidParameterError):
        clos_sizing(12, 5.0)
    with pytest.raises(InvalidParameterError):
        clos_sizing(11, 1.0)


def test_amortize_scales_shared_parts():
    half = amortize(DEFAULT_PART_COSTS, 1024)
    assert half["Optical lenses"] == (None, 7.5)
    assert half["ToR port"] == (90.0, 90.0)
    assert alpha_from_parts(half) < alpha_from_parts()


def test_parts_csv_roundtrip(tmp_path):
    p = tmp_path / "parts.csv"
    p.write_text(parts_to_csv())
    assert parts_from_csv(p) == DEFAULT_PART_COSTS


def test_parts_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("component,static_dollars,opera_dollars\nport,abc,1\n")
    with pytest.raises(InvalidParameterError, match="port"):
        parts_from_csv(p)
    with pytest.raises(InvalidParameterError):
        alpha_from_parts({"x": (None, 3.0)})


def test_cost_params_validation():
    with pytest.raises(InvalidParameterError):
        CostParams(k=12, F=0.5)
    with pytest.raises(InvalidParameterError):
        CostParams(k=12, u=12)


@pytest.mark.parametrize("T,F,want", [(3, 3, 4 / 3), (2, 4, 0.5), (3, 4, 1.0)])
def test_alpha_clos_examples(T, F, want):
    assert alpha_clos(T, F) == pytest.approx(want)


def test_balanced_tor_and_full_bisection():
    assert alpha_expander(6, 12) == 1.0
    assert hosts_for_alpha(12, 4) == (1, 432)
