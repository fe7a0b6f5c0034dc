"""Flow-arrival traces.

Flow sizes come from empirical CDFs sampled by inverse transform with
interpolation linear in log(size); between two CDF points the size grows
geometrically. Arrivals are Poisson at a rate set from the target load.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParameterError, ValidationError
from .routing import BULK, LOW_LATENCY, classify

__all__ = [
    "SizeDistribution",
    "WorkloadSpec",
    "FlowRecord",
    "load_cdf",
    "builtin_cdf",
    "gen_poisson",
    "gen_shuffle",
    "gen_pattern",
    "offered_load",
    "trace_to_csv",
    "trace_from_csv",
]

DEFAULT_BULK_THRESHOLD = 15_000_000


@dataclass(frozen=True)
class SizeDistribution:
    points: tuple[tuple[float, float], ...]
    name: str = ""

    def __post_init__(self):
        if not self.points:
            raise ValidationError("empty CDF")
        sizes = [s for s, _ in self.points]
        probs = [p for _, p in self.points]
        if any(s <= 0 for s in sizes):
            raise ValidationError("CDF sizes must be positive")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValidationError("CDF sizes must be strictly increasing")
        if any(b < a for a, b in zip(probs, probs[1:])) or probs[0] < 0:
            raise ValidationError("CDF probabilities must be non-decreasing and >= 0")
        if abs(probs[-1] - 1.0) > 1e-12:
            raise ValidationError(f"CDF must end at 1.0, ends at {probs[-1]}")

    @property
    def max_size(self) -> float:
        return self.points[-1][0]

    @property
    def min_size(self) -> float:
        return self.points[0][0]

    def mean(self) -> float:
        s0, c0 = self.points[0]
        total = s0 * c0
        for (sa, ca), (sb, cb) in zip(self.points, self.points[1:]):
            if cb > ca:
                total += (cb - ca) * (sb - sa) / math.log(sb / sa)
        return total

    def quantile(self, u: np.ndarray | float) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        sizes = np.array([s for s, _ in self.points])
        probs = np.array([p for _, p in self.points])
        idx = np.searchsorted(probs, u, side="left")
        idx = np.clip(idx, 0, len(sizes) - 1)
        lo = np.maximum(idx - 1, 0)
        span = probs[idx] - probs[lo]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(span > 0, (u - probs[lo]) / span, 1.0)
        frac = np.clip(frac, 0.0, 1.0)
        out = np.exp(np.log(sizes[lo]) + frac * (np.log(sizes[idx]) - np.log(sizes[lo])))
        return np.where(idx == 0, sizes[0], out)

    def cdf(self, x: np.ndarray | float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        sizes = np.array([s for s, _ in self.points])
        probs = np.array([p for _, p in self.points])
        idx = np.searchsorted(sizes, x, side="right")
        hi = np.clip(idx, 1, len(sizes) - 1)
        lo = hi - 1
        frac = (np.log(np.maximum(x, sizes[0])) - np.log(sizes[lo])) / (np.log(sizes[hi]) - np.log(sizes[lo])) if len(sizes) > 1 else 0
        val = probs[lo] + np.clip(frac, 0, 1) * (probs[hi] - probs[lo]) if len(sizes) > 1 else np.ones_like(x)
        val = np.where(x < sizes[0], 0.0, val)
        return np.where(x >= sizes[-1], 1.0, val)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.quantile(rng.random(n))


def load_cdf(path: str | Path | io.TextIOBase, name: str = "") -> SizeDistribution:
    text = Path(path).read_text() if not isinstance(path, io.TextIOBase) else path.read()
    rows = [r for r in csv.reader(line for line in text.splitlines() if line and not line.startswith("#"))]
    if rows and rows[0][0].strip() == "size_bytes":
        rows = rows[1:]
    try:
        pts = tuple((float(s), float(p)) for s, p in rows)
    except ValueError as exc:
        raise ValidationError(f"bad CDF row: {exc}") from exc
    return SizeDistribution(pts, name or (Path(path).stem if not isinstance(path, io.TextIOBase) else ""))


def builtin_cdf(name: str) -> SizeDistribution:
    """One of the bundled approximate CDFs: websearch, datamining, hadoop."""
    try:
        text = resources.files("opera.data").joinpath(f"{name}.csv").read_text()
    except FileNotFoundError:
        raise InvalidParameterError(f"no bundled CDF named {name!r}") from None
    return load_cdf(io.StringIO(text), name)


@dataclass(frozen=True)
class FlowRecord:
    id: int
    src: int
    dst: int
    size: int
    arrival: float
    tag: str

    def __post_init__(self):
        if self.src == self.dst:
            raise ValidationError(f"flow {self.id} has src == dst == {self.src}")
        if self.size <= 0:
            raise ValidationError(f"flow {self.id} has non-positive size {self.size}")
        if self.tag not in (BULK, LOW_LATENCY):
            raise ValidationError(f"flow {self.id} has unknown tag {self.tag!r}")


@dataclass(frozen=True)
class WorkloadSpec:
    pattern: str = "poisson_cdf"
    load: float = 0.1
    seed: int = 0
    duration: float | None = None
    num_flows: int | None = None
    flow_size: int | None = None
    skew: float = 1.0
    tagging: str = "by_size"
    bulk_threshold: int = DEFAULT_BULK_THRESHOLD
    link_rate: float = 10e9

    def __post_init__(self):
        if not 0 < self.load <= 1:
            raise InvalidParameterError(f"load must be in (0, 1], got {self.load}")
        if not 0 < self.skew <= 1:
            raise InvalidParameterError(f"skew must be in (0, 1], got {self.skew}")
        if self.tagging not in ("by_size", "all_bulk", "all_low_latency"):
            raise InvalidParameterError(f"unknown tagging {self.tagging!r}")

    def tag_for(self, size: int) -> str:
        if self.tagging == "all_bulk":
            return BULK
        if self.tagging == "all_low_latency":
            return LOW_LATENCY
        return classify(size, self.bulk_threshold).kind


def _distinct_pairs(rng: np.random.Generator, hosts: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    src = rng.integers(0, hosts, size=n)
    off = rng.integers(1, hosts, size=n)
    return src, (src + off) % hosts


def gen_poisson(spec: WorkloadSpec, cdf: SizeDistribution, hosts: int) -> list[FlowRecord]:
    """Poisson arrivals between uniformly random distinct hosts.

    The rate makes the expected offered load ``spec.load`` of the aggregate
    host-link capacity. Generation stops at ``spec.num_flows`` flows or at
    ``spec.duration`` seconds, whichever is given.
    """
    if hosts < 2:
        raise InvalidParameterError("need at least two hosts")
    mean_bits = cdf.mean() * 8
    lam = spec.load * hosts * spec.link_rate / mean_bits
    if not math.isfinite(lam) or lam <= 0 or lam > 1e12:
        raise InvalidParameterError(f"arrival rate {lam} flows/s is out of range")
    if spec.num_flows is None and spec.duration is None:
        raise InvalidParameterError("give num_flows or duration")
    rng = np.random.default_rng(spec.seed)
    if spec.num_flows is not None:
        n = spec.num_flows
        gaps = rng.exponential(1.0 / lam, size=n)
        times = np.cumsum(gaps)
    else:
        chunks = []
        t = 0.0
        while t < spec.duration:
            g = rng.exponential(1.0 / lam, size=max(16, int(lam * spec.duration * 0.5) + 1))
            c = t + np.cumsum(g)
            chunks.append(c)
            t = c[-1]
        times = np.concatenate(chunks)
        times = times[times < spec.duration]
        n = len(times)
    sizes = np.maximum(1, np.rint(cdf.sample(rng, n))).astype(np.int64)
    src, dst = _distinct_pairs(rng, hosts, n)
    return [
        FlowRecord(i, int(src[i]), int(dst[i]), int(sizes[i]), float(times[i]), spec.tag_for(int(sizes[i])))
        for i in range(n)
    ]


def gen_shuffle(flow_size: int, hosts: int, stagger: float = 0.0, seed: int = 0) -> list[FlowRecord]:
    """All-to-all: one bulk-tagged flow per ordered host pair."""
    if hosts < 2:
        raise InvalidParameterError("need at least two hosts")
    rng = np.random.default_rng(seed)
    n = hosts * (hosts - 1)
    arrivals = rng.uniform(0.0, stagger, size=n) if stagger > 0 else np.zeros(n)
    flows = []
    i = 0
    for s in range(hosts):
        for d in range(hosts):
            if s != d:
                flows.append(FlowRecord(i, s, d, int(flow_size), float(arrivals[i]), BULK))
                i += 1
    return flows


def _host_permutation(hosts: int, hosts_per_rack: int, rng: np.random.Generator) -> np.ndarray:
    racks = hosts // hosts_per_rack
    if racks < 2:
        raise InvalidParameterError("a non-rack-local permutation needs two racks")
    for _ in range(1000):
        perm = rng.permutation(hosts)
        for _ in range(10 * hosts):
            bad = np.flatnonzero(perm // hosts_per_rack == np.arange(hosts) // hosts_per_rack)
            if not len(bad):
                return perm
            i = int(bad[0])
            j = int(rng.integers(hosts))
            perm[i], perm[j] = perm[j], perm[i]
    raise InvalidParameterError("could not draw a non-rack-local permutation")


def gen_pattern(
    kind: str,
    load: float,
    hosts: int,
    racks: int,
    seed: int = 0,
    *,
    skew: float = 0.2,
    flow_size: int = 1_000_000,
    duration: float | None = None,
    link_rate: float = 10e9,
    tag: str = BULK,
) -> list[FlowRecord]:
    """Skewed and permutation traffic.

    ``hotrack``: every host of one rack sends to every host of another.
    ``skew``: a random ``ceil(skew * racks)`` subset of racks exchanges
    traffic uniformly. ``permutation``: each host sends to one host in a
    different rack and each host receives once. ``uniform``: every ordered
    pair of distinct hosts.

    Without ``duration`` each pair gets one ``flow_size`` flow at ``t=0``.
    With it, arrivals are Poisson at ``load`` times the sending hosts' link
    capacity, with pairs drawn uniformly from the pattern.
    """
    if not 0 < load <= 1:
        raise InvalidParameterError(f"load must be in (0, 1], got {load}")
    if hosts % racks:
        raise InvalidParameterError(f"{hosts} hosts do not split over {racks} racks")
    d = hosts // racks
    rng = np.random.default_rng(seed)
    if kind == "hotrack":
        a, b = (int(x) for x in rng.choice(racks, size=2, replace=False))
        pairs = [(a * d + i, b * d + j) for i in range(d) for j in range(d)]
    elif kind == "skew":
        if not 0 < skew <= 1:
            raise InvalidParameterError(f"skew must be in (0, 1], got {skew}")
        active = sorted(int(r) for r in rng.choice(racks, size=max(2, math.ceil(skew * racks)), replace=False))
        members = [r * d + i for r in active for i in range(d)]
        pairs = [(s, t) for s in members for t in members if s // d != t // d]
    elif kind == "permutation":
        perm = _host_permutation(hosts, d, rng)
        pairs = [(s, int(perm[s])) for s in range(hosts)]
    elif kind == "uniform":
        pairs = [(s, t) for s in range(hosts) for t in range(hosts) if s != t]
    else:
        raise InvalidParameterError(f"unknown pattern {kind!r}")
    if duration is None:
        return [FlowRecord(i, s, t, flow_size, 0.0, tag) for i, (s, t) in enumerate(pairs)]
    senders = len({s for s, _ in pairs})
    lam = load * senders * link_rate / (8 * flow_size)
    times = []
    t = 0.0
    while True:
        t += rng.exponential(1.0 / lam)
        if t >= duration:
            break
        times.append(t)
    picks = rng.integers(0, len(pairs), size=len(times))
    return [FlowRecord(i, pairs[p][0], pairs[p][1], flow_size, float(times[i]), tag) for i, p in enumerate(picks)]


def offered_load(flows: Sequence[FlowRecord], hosts: int, link_rate: float, duration: float) -> float:
    """Offered bits over the window as a fraction of aggregate host capacity."""
    bits = 8 * sum(f.size for f in flows if f.arrival < duration)
    return bits / (hosts * link_rate * duration)


def trace_to_csv(flows: Iterable[FlowRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id", "src", "dst", "size_bytes", "arrival_s", "tag"])
    for f in flows:
        w.writerow([f.id, f.src, f.dst, f.size, repr(f.arrival), f.tag])
    return buf.getvalue()


def trace_from_csv(text: str) -> list[FlowRecord]:
    rows = list(csv.DictReader(io.StringIO(text)))
    try:
        return [
            FlowRecord(int(r["id"]), int(r["src"]), int(r["dst"]), int(r["size_bytes"]), float(r["arrival_s"]), r["tag"])
            for r in rows
        ]
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"malformed trace: {exc!r}") from exc
