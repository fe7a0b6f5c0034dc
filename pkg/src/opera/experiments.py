"""Desk-scale comparisons between a rotor network and its cost-matched expander."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .analysis import generate_expanding_opera
from .metrics import MetricsReport
from .schedule import SliceSchedule, build_schedule
from .simulate import SimParams, run
from .topology import BaselineTopology, OperaTopology, build_baseline
from .workload import FlowRecord, gen_pattern, gen_shuffle

__all__ = [
    "DESK_K",
    "DESK_RACKS",
    "DESK_ALPHA",
    "DeskNetworks",
    "desk_networks",
    "ShuffleResult",
    "shuffle_comparison",
    "goodput_ratio",
    "AdmissibleResult",
    "admissible_load",
]

DESK_K = 8
DESK_RACKS = 16
DESK_ALPHA = 1.3


@dataclass(frozen=True)
class DeskNetworks:
    opera: OperaTopology
    schedule: SliceSchedule
    expander: BaselineTopology


def desk_networks(seed: int = 0, k: int = DESK_K, racks: int = DESK_RACKS, alpha: float = DESK_ALPHA) -> DeskNetworks:
    t, _ = generate_expanding_opera(k, racks, seed)
    exp = build_baseline("static_expander", k, alpha, hosts=t.num_hosts, seed=seed)
    return DeskNetworks(t, build_schedule(t), exp)


@dataclass(frozen=True)
class ShuffleResult:
    opera: MetricsReport
    expander: MetricsReport

    @property
    def ratio(self) -> float:
        return self.opera.aggregate_throughput() / self.expander.aggregate_throughput()


def shuffle_comparison(
    nets: DeskNetworks,
    flow_size: int = 50_000,
    seed: int = 0,
    params: SimParams | None = None,
) -> ShuffleResult:
    """All-to-all shuffle: rotor bulk on direct circuits only vs. the expander."""
    params = params or SimParams(horizon=5.0)
    trace = gen_shuffle(flow_size, nets.opera.num_hosts, 0.0, seed)
    op = run(nets.opera, nets.schedule, None, trace, replace(params, vlb=False), seed)
    ex = run(nets.expander, None, None, trace, params, seed)
    return ShuffleResult(op, ex)


def goodput_ratio(report: MetricsReport, trace: list[FlowRecord], window: float) -> float:
    """Delivered over offered bits in the second half of the arrival window."""
    lo = window / 2
    offered = 8 * sum(f.size for f in trace if lo <= f.arrival < window)
    delivered = sum(bits for t, bits in report.throughput if lo <= t < window)
    return delivered / offered if offered else 1.0


@dataclass(frozen=True)
class AdmissibleResult:
    load: float
    probes: tuple[tuple[float, float], ...]


def admissible_load(
    network: OperaTopology | BaselineTopology,
    schedule: SliceSchedule | None,
    *,
    flow_size: int = 100_000,
    window: float = 3e-3,
    threshold: float = 0.9,
    tol: float = 1 / 32,
    seed: int = 0,
    params: SimParams | None = None,
) -> AdmissibleResult:
    """Largest uniform all-to-all low-latency load the fabric keeps up with.

    A load passes when goodput in the second half of a ``window`` of Poisson
    arrivals reaches ``threshold`` of the offered rate. Bisection on (0, 1),
    so the answer is at most ``1 - tol``.
    """
    params = replace(params or SimParams(), horizon=window, bin_width=window / 32)
    hosts = network.num_hosts
    racks = network.N if isinstance(network, OperaTopology) else network.num_tors
    probes = []

    def passes(load: float) -> bool:
        trace = gen_pattern("uniform", load, hosts, racks, seed, flow_size=flow_size,
                            duration=window, link_rate=params.link_rate, tag="low_latency")
        rep = run(network, schedule, None, trace, params, seed)
        g = goodput_ratio(rep, trace, window)
        probes.append((load, g))
        return g >= threshold

    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return AdmissibleResult(lo, tuple(probes))
