"""Per-slice forwarding state and path selection.

Low-latency tables hold every equal-cost next hop toward each destination
rack in a slice's union graph; bulk tables hold the switch (if any) that
directly connects the two racks in that slice.
"""

from __future__ import annotations

import csv
import io
import random
from collections import deque
from dataclasses import dataclass
from typing import Mapping, Sequence

from .errors import InvalidParameterError, NoCandidateError
from .schedule import SliceSchedule, TopologySlice

__all__ = [
    "SliceTables",
    "FlowClass",
    "bfs_distances",
    "build_slice_tables",
    "build_all_tables",
    "tables_from_adjacency",
    "classify",
    "vlb_intermediate",
    "walk_low_latency",
    "tables_to_csv",
]

BULK = "bulk"
LOW_LATENCY = "low_latency"


@dataclass(frozen=True)
class SliceTables:
    slice_index: int
    src: int
    low_latency: Mapping[int, tuple[tuple[int, int], ...]]
    bulk_direct: Mapping[int, int]
    distance: Mapping[int, int]


@dataclass(frozen=True)
class FlowClass:
    kind: str
    threshold: int

    @property
    def is_bulk(self) -> bool:
        return self.kind == BULK


def bfs_distances(neighbors: Sequence[Sequence[tuple[int, int]]], src: int) -> dict[int, int]:
    dist = {src: 0}
    q = deque([src])
    while q:
        x = q.popleft()
        dx = dist[x] + 1
        for y, _ in neighbors[x]:
            if y not in dist:
                dist[y] = dx
                q.append(y)
    return dist


def tables_from_adjacency(
    neighbors: Sequence[Sequence[tuple[int, int]]],
    index: int = 0,
    direct: bool = True,
) -> list[SliceTables]:
    """Tables for every source rack of one graph.

    ``neighbors[r]`` lists ``(peer, port)`` per link. Next hops are sorted by
    ``(peer, port)``.
    """
    n = len(neighbors)
    dists = [bfs_distances(neighbors, r) for r in range(n)]
    out = []
    for src in range(n):
        ll: dict[int, tuple[tuple[int, int], ...]] = {}
        dsrc = dists[src]
        for dst, dd in dsrc.items():
            if dst == src:
                continue
            hops = sorted(
                (peer, port)
                for peer, port in neighbors[src]
                if dists[peer].get(dst, -1) == dd - 1
            )
            ll[dst] = tuple(hops)
        bulk = {peer: port for peer, port in neighbors[src]} if direct else {}
        out.append(
            SliceTables(
                slice_index=index,
                src=src,
                low_latency=ll,
                bulk_direct=bulk,
                distance={d: v for d, v in dsrc.items() if d != src},
            )
        )
    return out


def build_all_tables(sl: TopologySlice) -> list[SliceTables]:
    return tables_from_adjacency(sl.neighbors, sl.index)


def build_slice_tables(sl: TopologySlice, src: int) -> SliceTables:
    return build_all_tables(sl)[src]


def classify(flow_size: int, threshold: int, tag: str | None = None) -> FlowClass:
    """Size-based class; an explicit application ``tag`` wins."""
    if threshold <= 0:
        raise InvalidParameterError(f"threshold must be positive, got {threshold}")
    if flow_size < 0:
        raise InvalidParameterError(f"flow size must be >= 0, got {flow_size}")
    if tag in (BULK, LOW_LATENCY):
        return FlowClass(tag, threshold)
    if tag not in (None, "by_size"):
        raise InvalidParameterError(f"unknown class tag {tag!r}")
    return FlowClass(BULK if flow_size >= threshold else LOW_LATENCY, threshold)


def vlb_intermediate(
    src: int,
    dst: int,
    schedule: SliceSchedule,
    slice_index: int,
    spare: Mapping[int, float],
    rng: random.Random,
) -> int:
    """Pick a two-hop relay for ``src -> dst`` traffic.

    Candidates are racks directly connected to ``src`` in the current slice
    with ``spare[mid] > 0`` bytes of unused circuit capacity, and which meet
    ``dst`` directly in some slice of the coming cycle.
    """
    if src == dst:
        raise InvalidParameterError("source and destination rack are the same")
    sl = schedule.slice(slice_index)
    candidates = []
    for mid, _ in sl.neighbors[src]:
        if mid == dst or spare.get(mid, 0) <= 0:
            continue
        if _meets_later(schedule, slice_index, mid, dst):
            candidates.append(mid)
    if not candidates:
        raise NoCandidateError(f"no relay for {src}->{dst} in slice {slice_index}; wait for a direct circuit")
    return candidates[rng.randrange(len(candidates))]


def _meets_later(schedule: SliceSchedule, slice_index: int, a: int, b: int) -> bool:
    for k in range(1, schedule.num_slices + 1):
        if schedule.slice(slice_index + k).direct_switch(a, b) is not None:
            return True
    return False


def walk_low_latency(tables: Sequence[SliceTables], src: int, dst: int, choose=min) -> list[int]:
    """Follow next hops from ``src`` to ``dst``; returns the rack sequence."""
    path = [src]
    cur = src
    limit = len(tables)
    while cur != dst:
        hops = tables[cur].low_latency.get(dst)
        if not hops:
            raise KeyError(f"rack {cur} has no route to {dst}")
        cur = choose(hops)[0]
        path.append(cur)
        if len(path) > limit:
            raise RuntimeError(f"routing loop from {src} to {dst}: {path}")
    return path


def tables_to_csv(per_slice: Sequence[Sequence[SliceTables]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slice", "src", "dst", "kind", "next_hop_or_switch"])
    for tabs in per_slice:
        for t in tabs:
            for dst in sorted(t.low_latency):
                w.writerow([t.slice_index, t.src, dst, "LL", " ".join(f"{p}:{s}" for p, s in t.low_latency[dst])])
            for dst in sorted(t.bulk_direct):
                w.writerow([t.slice_index, t.src, dst, "BULK", t.bulk_direct[dst]])
    return buf.getvalue()
