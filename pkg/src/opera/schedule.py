"""Slice schedules and timing math.

Switches reconfigure in a staggered round: with ``gsz`` switches dark at a
time there are ``P = u / gsz`` phases, and switch ``s`` reconfigures in the
slices ``i`` with ``i % P == s % P``. While dark during slice ``i`` it swaps
to its next matching, which it then presents for the following ``P - 1``
slices. One cycle visits every matching once and lasts ``N / gsz`` slices.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

from .errors import InvalidParameterError
from .topology import Matching, OperaTopology, opera_racks_for_radix

__all__ = [
    "TimingParams",
    "Epsilon",
    "TopologySlice",
    "SliceSchedule",
    "compute_epsilon",
    "build_schedule",
    "custom_slice",
    "cycle_time_scaling",
    "guard_band_loss",
    "schedule_to_csv",
]


@dataclass(frozen=True)
class TimingParams:
    """Inputs to the slice timing. Defaults are the 648-host example network."""

    link_rate: float = 10e9
    mtu: int = 1500
    queue_capacity: int = 8 * 1500 + 187 * 64
    header_size: int = 64
    prop_delay_per_hop: float = 500e-9
    reconfig_delay: float = 10e-6
    guard_time: float = 0.0
    worst_case_hops: int = 5

    def __post_init__(self):
        for name in ("link_rate", "mtu", "queue_capacity", "header_size", "reconfig_delay", "worst_case_hops"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be positive, got {getattr(self, name)}")
        if self.prop_delay_per_hop < 0 or self.guard_time < 0:
            raise InvalidParameterError("propagation delay and guard time must be >= 0")
        if self.queue_capacity < self.mtu:
            raise InvalidParameterError(f"queue_capacity {self.queue_capacity} B is below one MTU")

    def serialization(self, nbytes: int) -> float:
        return nbytes * 8 / self.link_rate


@dataclass(frozen=True)
class Epsilon:
    """Worst-case end-to-end delay of a low-latency packet, with its terms.

    Each of the ``hops`` ToR egress ports can hold a full queue ahead of the
    packet (the queue figure counts the packet's own slot) plus one hop of
    propagation; the packet is first serialized once onto the host link.
    """

    hops: int
    queue_drain: float
    propagation: float
    injection: float

    @property
    def seconds(self) -> float:
        return self.hops * (self.queue_drain + self.propagation) + self.injection

    def __float__(self) -> float:
        return self.seconds

    def terms(self) -> dict[str, float]:
        return {
            "hops": self.hops,
            "queue_drain_per_hop_s": self.queue_drain,
            "propagation_per_hop_s": self.propagation,
            "host_injection_s": self.injection,
            "epsilon_s": self.seconds,
        }


def compute_epsilon(p: TimingParams) -> Epsilon:
    return Epsilon(
        hops=p.worst_case_hops,
        queue_drain=p.serialization(p.queue_capacity),
        propagation=p.prop_delay_per_hop,
        injection=p.serialization(p.mtu),
    )


@dataclass(frozen=True)
class TopologySlice:
    index: int
    active: Mapping[int, Matching]
    reconfiguring: frozenset[int]
    num_racks: int
    active_index: Mapping[int, int] = field(default_factory=dict)

    @cached_property
    def neighbors(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """neighbors[r] = ((peer rack, switch id), ...) sorted, one entry per circuit."""
        adj: list[list[tuple[int, int]]] = [[] for _ in range(self.num_racks)]
        for s, m in self.active.items():
            for r, peer in enumerate(m.perm):
                if peer != r:
                    adj[r].append((peer, s))
        return tuple(tuple(sorted(a)) for a in adj)

    @cached_property
    def union_edges(self) -> tuple[tuple[int, int, int], ...]:
        """Unordered (a, b, switch) circuits with a < b."""
        return tuple(
            (a, b, s) for a, nbrs in enumerate(self.neighbors) for b, s in nbrs if a < b
        )

    def direct_switch(self, src: int, dst: int) -> int | None:
        for peer, s in self.neighbors[src]:
            if peer == dst:
                return s
        return None

    def degree(self, rack: int) -> int:
        return len(self.neighbors[rack])


@dataclass(frozen=True)
class SliceSchedule:
    topology: OperaTopology
    slices: tuple[TopologySlice, ...]
    slice_duration: float
    epsilon: float
    reconfig_delay: float
    group_size: int

    @property
    def num_slices(self) -> int:
        return len(self.slices)

    @property
    def cycle_time(self) -> float:
        return self.num_slices * self.slice_duration

    @property
    def phases(self) -> int:
        return len(self.topology.switches) // self.group_size

    @property
    def switch_period(self) -> float:
        """Time between successive reconfigurations of one switch."""
        return self.phases * self.slice_duration

    @property
    def duty_cycle(self) -> float:
        return 1.0 - self.reconfig_delay / self.switch_period

    def slice_at(self, t: float) -> TopologySlice:
        return self.slices[int(t // self.slice_duration) % self.num_slices]

    def slice(self, i: int) -> TopologySlice:
        return self.slices[i % self.num_slices]


def _phase(topology: OperaTopology, switch_pos: int, phases: int) -> int:
    return topology.switches[switch_pos].group % phases


def build_schedule(
    t: OperaTopology,
    p: TimingParams | None = None,
    epsilon_override: float | None = None,
    group_size: int = 1,
    *,
    allow_degenerate: bool = False,
) -> SliceSchedule:
    p = p or TimingParams()
    nsw = len(t.switches)
    if group_size < 1 or nsw % group_size:
        raise InvalidParameterError(f"group size {group_size} must divide the switch count {nsw}")
    if group_size == nsw and not allow_degenerate:
        raise InvalidParameterError("every switch would reconfigure at once; pass allow_degenerate=True")
    phases = nsw // group_size
    groups = [_phase(t, s, phases) for s in range(nsw)]
    if any(groups.count(g) != group_size for g in range(phases)):
        raise InvalidParameterError(f"switch groups {groups} do not split into {phases} phases of {group_size}")
    eps = float(compute_epsilon(p)) if epsilon_override is None else float(epsilon_override)
    M = t.matchings_per_switch
    nslices = M * phases
    slices = []
    for i in range(nslices):
        active: dict[int, Matching] = {}
        active_idx: dict[int, int] = {}
        reconf = set()
        for pos, sw in enumerate(t.switches):
            ph = groups[pos]
            j = ((i - ph) // phases) % M
            if (i - ph) % phases == 0:
                reconf.add(sw.id)
            else:
                active[sw.id] = sw.matchings[j]
                active_idx[sw.id] = j
        slices.append(
            TopologySlice(
                index=i,
                active=active,
                reconfiguring=frozenset(reconf),
                num_racks=t.N,
                active_index=active_idx,
            )
        )
    return SliceSchedule(
        topology=t,
        slices=tuple(slices),
        slice_duration=eps + p.reconfig_delay,
        epsilon=eps,
        reconfig_delay=p.reconfig_delay,
        group_size=group_size,
    )


def custom_slice(t: OperaTopology, active: Mapping[int, int], index: int = 0) -> TopologySlice:
    """A slice with an explicit choice of matching per switch; absent switches are dark."""
    return TopologySlice(
        index=index,
        active={s: t.switches[s].matchings[j] for s, j in active.items()},
        reconfiguring=frozenset(sw.id for sw in t.switches if sw.id not in active),
        num_racks=t.N,
        active_index=dict(active),
    )


def cycle_time_scaling(k: int, group_size: int, p: TimingParams | None = None, epsilon: float | None = None) -> float:
    """Cycle time of the radix-``k`` Opera network with ``group_size`` switches dark per slice."""
    p = p or TimingParams()
    u = k // 2
    if group_size < 1 or group_size > u:
        raise InvalidParameterError(f"group size {group_size} outside [1, {u}]")
    eps = float(compute_epsilon(p)) if epsilon is None else epsilon
    return opera_racks_for_radix(k) / group_size * (eps + p.reconfig_delay)


def guard_band_loss(p: TimingParams, schedule: SliceSchedule) -> tuple[float, float]:
    """Capacity fractions lost to guard time: (low-latency, bulk)."""
    g = p.guard_time
    low_latency = g / schedule.slice_duration
    bulk = g / (schedule.switch_period - schedule.reconfig_delay)
    return low_latency, bulk


def schedule_to_csv(schedule: SliceSchedule) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slice_index", "switch_id", "matching_index", "reconfiguring", "start_time_s", "end_time_s"])
    t = schedule.topology
    phases = schedule.phases
    M = t.matchings_per_switch
    for sl in schedule.slices:
        start = sl.index * schedule.slice_duration
        end = start + schedule.slice_duration
        for pos, sw in enumerate(t.switches):
            j = ((sl.index - _phase(t, pos, phases)) // phases) % M
            w.writerow([sl.index, sw.id, j, sw.id in sl.reconfiguring, repr(start), repr(end)])
    return buf.getvalue()
