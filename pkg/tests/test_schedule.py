from __future__ import annotations

import csv
import io

import pytest

from opera.errors import InvalidParameterError
from opera.schedule import (
    TimingParams,
    build_schedule,
    compute_epsilon,
    custom_slice,
    cycle_time_scaling,
    guard_band_loss,
    schedule_to_csv,
)
from opera.topology import build_opera


def test_epsilon_terms():
    eps = compute_epsilon(TimingParams())
    # 5 hops of (full queue drain + 500 ns) plus one MTU onto the host link
    queue = (8 * 1500 + 187 * 64) * 8 / 10e9
    assert eps.seconds == pytest.approx(5 * (queue + 500e-9) + 1500 * 8 / 10e9)
    assert eps.seconds == pytest.approx(99.572e-6, rel=1e-9)
    assert eps.terms()["epsilon_s"] == eps.seconds


def test_timing_params_reject_small_queue():
    with pytest.raises(InvalidParameterError, match="queue_capacity"):
        TimingParams(queue_capacity=100)


def test_stagger_one_switch_dark_per_slice(k12):
    t, s = k12
    assert s.num_slices == 108
    for sl in s.slices:
        assert len(sl.reconfiguring) == 1
        assert len(sl.active) == 5
    # each switch dark once every u slices
    for sw in t.switches:
        dark = [sl.index for sl in s.slices if sw.id in sl.reconfiguring]
        assert len(dark) == 108 // 6
        assert all(b - a == 6 for a, b in zip(dark, dark[1:]))


def test_slice_duration_and_duty(k12):
    _, s = k12
    assert s.slice_duration == pytest.approx(s.epsilon + 10e-6)
    assert s.duty_cycle == pytest.approx(1 - 10e-6 / (6 * s.slice_duration))


def test_every_matching_used_once_per_cycle(k12):
    t, s = k12
    for sw in t.switches:
        used = [sl.active_index[sw.id] for sl in s.slices if sw.id in sl.active]
        assert sorted(set(used)) == list(range(t.matchings_per_switch))


def test_group_size_must_divide():
    t = build_opera(12, 108, 0)
    with pytest.raises(InvalidParameterError):
        build_schedule(t, group_size=4)
    with pytest.raises(InvalidParameterError, match="allow_degenerate"):
        build_schedule(t, group_size=6)
    s = build_schedule(t, group_size=2)
    assert s.num_slices == 54
    assert all(len(sl.reconfiguring) == 2 for sl in s.slices)


def test_slice_at_wraps(k12):
    _, s = k12
    assert s.slice_at(s.cycle_time + 0.5 * s.slice_duration).index == 0
    assert s.slice_at(3.5 * s.slice_duration).index == 3


def test_cycle_time_scaling():
    base = cycle_time_scaling(12, 1, epsilon=90e-6)
    assert base == pytest.approx(108 * 100e-6)
    # four times the racks, half the slices per rack
    assert cycle_time_scaling(24, 2, epsilon=90e-6) == pytest.approx(2 * base)
    with pytest.raises(InvalidParameterError):
        cycle_time_scaling(12, 7)


def test_cycle_time_radix_64():
    # 32 switches in groups of about six: five reconfigure at once
    ratio = cycle_time_scaling(64, 5) / cycle_time_scaling(12, 1)
    assert ratio == pytest.approx(3072 / 108 / 5)
    assert ratio == pytest.approx(6, rel=0.2)


def test_guard_band():
    t = build_opera(12, 108, 0)
    p = TimingParams(guard_time=1e-6)
    s = build_schedule(t, p, epsilon_override=90e-6)
    ll, bulk = guard_band_loss(p, s)
    assert ll == pytest.approx(0.01)
    assert bulk == pytest.approx(1 / 590)


def test_custom_slice():
    t = build_opera(8, 16, 0)
    sl = custom_slice(t, {0: 1, 2: 0})
    assert sl.reconfiguring == frozenset({1, 3})
    assert all(len(n) <= 2 for n in sl.neighbors)


def test_schedule_csv(k12):
    t, s = k12
    rows = list(csv.DictReader(io.StringIO(schedule_to_csv(s))))
    assert len(rows) == s.num_slices * len(t.switches)
    dark = [r for r in rows if r["reconfiguring"] == "True"]
    assert len(dark) == s.num_slices


def test_epsilon_single_hop_limit():
    p = TimingParams(worst_case_hops=1, queue_capacity=1500, prop_delay_per_hop=0)
    assert compute_epsilon(p).seconds == pytest.approx(2 * 1500 * 8 / 10e9)


def test_epsilon_half_rate():
    fast = compute_epsilon(TimingParams())
    slow = compute_epsilon(TimingParams(link_rate=5e9))
    prop = 5 * 500e-9
    assert slow.seconds - prop == pytest.approx(2 * (fast.seconds - prop))


def test_guard_band_linear():
    t = build_opera(12, 108, 0)
    s = build_schedule(t, epsilon_override=90e-6)
    assert guard_band_loss(TimingParams(guard_time=0), s) == (0.0, 0.0)
    one = guard_band_loss(TimingParams(guard_time=1e-6), s)
    two = guard_band_loss(TimingParams(guard_time=2e-6), s)
    assert two == pytest.approx((2 * one[0], 2 * one[1]))


def test_eight_rack_schedule(eight_rack):
    _, s = eight_rack
    assert s.num_slices == 8
    assert all(len(sl.reconfiguring) <= 1 for sl in s.slices)
