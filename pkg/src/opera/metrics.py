"""Turning raw delivery records into FCT, throughput and bandwidth-tax figures."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .workload import FlowRecord

__all__ = [
    "Delivery",
    "FlowResult",
    "MetricsReport",
    "nearest_rank",
    "tax_from_histogram",
    "report_metrics",
    "SIZE_BUCKETS",
]

SIZE_BUCKETS = (0, 10_000, 100_000, 1_000_000, 15_000_000, math.inf)


@dataclass(frozen=True)
class Delivery:
    """First arrival of one packet's payload at its destination host."""

    flow: int
    time: float
    payload: int
    hops: int


@dataclass(frozen=True)
class FlowResult:
    id: int
    size: int
    tag: str
    fct: float | None
    hops_mean: float | None


def nearest_rank(values: Sequence[float], pct: float) -> float:
    if not values:
        return math.nan
    s = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(s)))
    return s[rank - 1]


def tax_from_histogram(hist: dict[int, int]) -> float:
    """Extra link-bytes per delivered inter-rack payload byte: sum((h-1)*b) / sum(b)."""
    total = sum(b for h, b in hist.items() if h >= 1)
    if not total:
        return 0.0
    return sum((h - 1) * b for h, b in hist.items() if h >= 1) / total


@dataclass
class MetricsReport:
    flows: list[FlowResult]
    fct_percentiles: dict[str, dict[str, float]]
    throughput: list[tuple[float, float]]
    bin_width: float
    hop_histogram: dict[int, int]
    direct_bytes: int
    indirect_bytes: int
    extra_link_bytes: int
    rack_local_bytes: int
    tax: float
    counters: dict[str, int] = field(default_factory=dict)
    tx_log: list = field(default_factory=list, repr=False, compare=False)

    @property
    def completed(self) -> list[FlowResult]:
        return [f for f in self.flows if f.fct is not None]

    @property
    def delivered_bytes(self) -> int:
        return self.direct_bytes + self.indirect_bytes + self.rack_local_bytes

    def aggregate_throughput(self) -> float:
        """Delivered payload bits per second between the first and last non-empty bins."""
        busy = [i for i, (_, bits) in enumerate(self.throughput) if bits > 0]
        if not busy:
            return 0.0
        span = (busy[-1] - busy[0] + 1) * self.bin_width
        return sum(b for _, b in self.throughput) / span

    def summary(self) -> dict:
        done = self.completed
        fcts = [f.fct for f in done]
        return {
            "flows": len(self.flows),
            "completed": len(done),
            "fct_p50_s": nearest_rank(fcts, 50) if fcts else None,
            "fct_p99_s": nearest_rank(fcts, 99) if fcts else None,
            "fct_mean_s": sum(fcts) / len(fcts) if fcts else None,
            "fct_percentiles": self.fct_percentiles,
            "tax": self.tax,
            "direct_bytes": self.direct_bytes,
            "indirect_bytes": self.indirect_bytes,
            "extra_link_bytes": self.extra_link_bytes,
            "rack_local_bytes": self.rack_local_bytes,
            "hop_histogram": {str(k): v for k, v in sorted(self.hop_histogram.items())},
            "counters": dict(sorted(self.counters.items())),
            "bin_width_s": self.bin_width,
        }

    def to_json(self) -> str:
        return json.dumps(_clean(self.summary()), sort_keys=True, indent=1) + "\n"

    def flows_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["id", "size", "class", "fct_s", "hops_mean"])
        for f in self.flows:
            w.writerow([f.id, f.size, f.tag, "" if f.fct is None else repr(f.fct),
                        "" if f.hops_mean is None else repr(f.hops_mean)])
        return buf.getvalue()

    def timeseries_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "delivered_bits"])
        for t, bits in self.throughput:
            w.writerow([repr(t), repr(bits)])
        return buf.getvalue()


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def report_metrics(
    flows: Sequence[FlowRecord],
    deliveries: Iterable[Delivery],
    *,
    completion: dict[int, float] | None = None,
    bin_width: float = 1e-3,
    counters: dict[str, int] | None = None,
) -> MetricsReport:
    """Aggregate raw deliveries.

    ``completion`` maps flow id to completion time; when omitted a flow is
    complete once its delivered payload reaches its size. Packets with zero
    ToR-to-ToR hops are rack-local and stay out of the tax.
    """
    by_id = {f.id: f for f in flows}
    got = {f.id: 0 for f in flows}
    hop_bytes = {f.id: 0 for f in flows}
    done_at: dict[int, float] = dict(completion or {})
    hist: dict[int, int] = {}
    bins: dict[int, float] = {}
    local = 0
    for d in deliveries:
        got[d.flow] += d.payload
        hop_bytes[d.flow] += d.hops * d.payload
        if d.hops == 0:
            local += d.payload
        else:
            hist[d.hops] = hist.get(d.hops, 0) + d.payload
        b = int(d.time // bin_width)
        bins[b] = bins.get(b, 0.0) + 8.0 * d.payload
        if completion is None and got[d.flow] >= by_id[d.flow].size and d.flow not in done_at:
            done_at[d.flow] = d.time
    results = []
    for f in flows:
        end = done_at.get(f.id)
        results.append(
            FlowResult(
                id=f.id,
                size=f.size,
                tag=f.tag,
                fct=None if end is None else end - f.arrival,
                hops_mean=hop_bytes[f.id] / got[f.id] if got[f.id] else None,
            )
        )
    pct: dict[str, dict[str, float]] = {}
    for lo, hi in zip(SIZE_BUCKETS, SIZE_BUCKETS[1:]):
        vals = [r.fct for r in results if r.fct is not None and lo <= r.size < hi]
        if vals:
            key = f"[{lo},{'inf' if math.isinf(hi) else int(hi)})"
            pct[key] = {
                "count": len(vals),
                "p50": nearest_rank(vals, 50),
                "p99": nearest_rank(vals, 99),
                "mean": sum(vals) / len(vals),
            }
    series = []
    if bins:
        for b in range(0, max(bins) + 1):
            series.append((b * bin_width, bins.get(b, 0.0)))
    direct = hist.get(1, 0)
    indirect = sum(v for h, v in hist.items() if h >= 2)
    extra = sum((h - 1) * v for h, v in hist.items())
    return MetricsReport(
        flows=results,
        fct_percentiles=pct,
        throughput=series,
        bin_width=bin_width,
        hop_histogram=dict(sorted(hist.items())),
        direct_bytes=direct,
        indirect_bytes=indirect,
        extra_link_bytes=extra,
        rack_local_bytes=local,
        tax=tax_from_histogram(hist),
        counters=dict(counters or {}),
    )
