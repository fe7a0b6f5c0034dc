"""Graph metrics over topology slices: paths, expansion, failures, routing state."""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .errors import InvalidParameterError, TopologyInvariantError
from .schedule import SliceSchedule, TimingParams, TopologySlice, build_schedule
from .topology import BaselineTopology, OperaTopology, build_opera

__all__ = [
    "SliceMetrics",
    "FailureSet",
    "FaultReport",
    "SweepPoint",
    "distance_matrix",
    "spectral_gap",
    "slice_metrics",
    "schedule_metrics",
    "direct_coverage",
    "inject_and_measure",
    "inject_and_measure_baseline",
    "random_failure_set",
    "failure_sweep",
    "zero_loss_threshold",
    "ruleset_size",
    "infer_uplinks",
    "expander_baseline_gap",
    "generate_expanding_opera",
    "metrics_to_csv",
    "sweep_to_csv",
]

GAP_CONVENTION = "average degree minus second-largest adjacency eigenvalue magnitude, largest component, fixed points carry no weight"


def _adjacency(n: int, edges: Iterable[tuple[int, int]]) -> csr_matrix:
    e = np.array([(a, b) for a, b in edges], dtype=np.int64).reshape(-1, 2)
    rows = np.concatenate([e[:, 0], e[:, 1]])
    cols = np.concatenate([e[:, 1], e[:, 0]])
    return csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))


def distance_matrix(n: int, edges: Iterable[tuple[int, int]]) -> np.ndarray:
    """All-pairs hop counts (``inf`` when unreachable); parallel edges are harmless."""
    edges = list(edges)
    if not edges:
        d = np.full((n, n), np.inf)
        np.fill_diagonal(d, 0)
        return d
    return shortest_path(_adjacency(n, edges), unweighted=True, directed=False)


def spectral_gap(n: int, edges: Iterable[tuple[int, int]]) -> float:
    """Spectral gap of the (multi)graph's largest connected component.

    Bipartite or single-edge components give 0.
    """
    edges = list(edges)
    if not edges:
        return 0.0
    A = _adjacency(n, edges)
    ncomp, labels = connected_components(A, directed=False)
    if ncomp > 1:
        big = np.bincount(labels).argmax()
        keep = np.flatnonzero(labels == big)
        A = A[keep][:, keep]
    dense = A.toarray()
    if dense.shape[0] < 2:
        return 0.0
    eig = np.sort(np.linalg.eigvalsh(dense))
    second = max(abs(eig[-2]), abs(eig[0]))
    d_avg = dense.sum() / dense.shape[0]
    return float(max(0.0, d_avg - second))


@dataclass(frozen=True)
class SliceMetrics:
    slice_index: int
    connected: bool
    diameter: float
    avg_path_length: float
    path_length_histogram: dict[int, int]
    spectral_gap: float


def _metrics_from_edges(index: int, n: int, edges: list[tuple[int, int]]) -> SliceMetrics:
    D = distance_matrix(n, edges)
    off = D[~np.eye(n, dtype=bool)]
    finite = off[np.isfinite(off)]
    connected = finite.size == off.size
    hist = Counter(int(h) for h in finite)
    return SliceMetrics(
        slice_index=index,
        connected=connected,
        diameter=float(finite.max()) if connected and finite.size else math.inf,
        avg_path_length=float(finite.mean()) if finite.size else math.inf,
        path_length_histogram=dict(sorted(hist.items())),
        spectral_gap=spectral_gap(n, edges),
    )


def slice_metrics(sl: TopologySlice) -> SliceMetrics:
    return _metrics_from_edges(sl.index, sl.num_racks, [(a, b) for a, b, _ in sl.union_edges])


def schedule_metrics(schedule: SliceSchedule) -> list[SliceMetrics]:
    return [slice_metrics(sl) for sl in schedule.slices]


def direct_coverage(schedule: SliceSchedule) -> dict[tuple[int, int], tuple[int, int]]:
    """Map each ordered rack pair to the (slice, switch) that first carries its circuit.

    A circuit stays up for ``P - 1`` consecutive slices; the slice reported is
    the first one after the owning switch finishes reconfiguring.
    """
    t = schedule.topology
    n = t.N
    out: dict[tuple[int, int], tuple[int, int]] = {}
    phases = schedule.phases
    for sl in schedule.slices:
        prev = schedule.slice(sl.index - 1)
        for s, m in sl.active.items():
            if phases > 1 and s in prev.active and prev.active_index.get(s) == sl.active_index.get(s):
                continue
            for a, b in m.pairs:
                for key in ((a, b), (b, a)):
                    if key in out:
                        raise TopologyInvariantError(f"pair {key} has circuits in slices {out[key][0]} and {sl.index}")
                    out[key] = (sl.index, s)
    expected = n * (n - 1)
    if len(out) != expected:
        missing = [(a, b) for a in range(n) for b in range(n) if a != b and (a, b) not in out][:10]
        raise TopologyInvariantError(f"{expected - len(out)} ordered pairs never get a direct circuit, e.g. {missing}")
    return out


# ---------------------------------------------------------------------------
# Failures
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FailureSet:
    failed_links: frozenset[tuple[int, int]] = frozenset()
    failed_tors: frozenset[int] = frozenset()
    failed_switches: frozenset[int] = frozenset()

    def check(self, t: OperaTopology) -> None:
        ids = {sw.id for sw in t.switches}
        bad = [x for x in self.failed_tors if not 0 <= x < t.N]
        bad += [s for s in self.failed_switches if s not in ids]
        bad += [l for l in self.failed_links if not (0 <= l[0] < t.N and l[1] in ids)]
        if bad:
            raise InvalidParameterError(f"failure set references unknown elements {bad[:5]}")

    def filter_slice(self, sl: TopologySlice) -> list[tuple[int, int]]:
        return [
            (a, b)
            for a, b, s in sl.union_edges
            if s not in self.failed_switches
            and a not in self.failed_tors
            and b not in self.failed_tors
            and (a, s) not in self.failed_links
            and (b, s) not in self.failed_links
        ]


@dataclass(frozen=True)
class FaultReport:
    worst_slice_disconnected_pairs: int
    integrated_disconnected_pairs: int
    avg_path_length_under_failure: float
    max_path_length_under_failure: float
    surviving_tors: int

    @property
    def pair_count(self) -> int:
        return self.surviving_tors * (self.surviving_tors - 1)

    @property
    def worst_slice_loss(self) -> float:
        return self.worst_slice_disconnected_pairs / self.pair_count if self.pair_count else 0.0

    @property
    def integrated_loss(self) -> float:
        return self.integrated_disconnected_pairs / self.pair_count if self.pair_count else 0.0


def _measure(graphs: Sequence[list[tuple[int, int]]], n: int, dead: frozenset[int], paths: bool) -> FaultReport:
    alive = np.array([r for r in range(n) if r not in dead], dtype=np.int64)
    m = len(alive)
    worst = 0
    ever = np.zeros((m, m), dtype=bool)
    total = 0.0
    count = 0
    longest = 0.0
    for edges in graphs:
        if paths:
            D = distance_matrix(n, edges)[np.ix_(alive, alive)]
            cut = np.isinf(D)
            fin = D[~cut & ~np.eye(m, dtype=bool)]
            if fin.size:
                total += fin.sum()
                count += fin.size
                longest = max(longest, float(fin.max()))
        else:
            if edges:
                _, labels = connected_components(_adjacency(n, edges), directed=False)
            else:
                labels = np.arange(n)
            lab = labels[alive]
            cut = lab[:, None] != lab[None, :]
        worst = max(worst, int(cut.sum()))
        ever |= cut
    return FaultReport(
        worst_slice_disconnected_pairs=worst,
        integrated_disconnected_pairs=int(ever.sum()),
        avg_path_length_under_failure=total / count if count else math.nan,
        max_path_length_under_failure=longest if count else math.nan,
        surviving_tors=m,
    )


def inject_and_measure(schedule: SliceSchedule, f: FailureSet, *, paths: bool = True) -> FaultReport:
    """Connectivity loss and path lengths over every slice with ``f`` removed.

    Pairs involving failed ToRs are excluded from all counts. ``paths=False``
    skips the all-pairs distances and leaves the path statistics as NaN.
    """
    f.check(schedule.topology)
    graphs = [f.filter_slice(sl) for sl in schedule.slices]
    return _measure(graphs, schedule.topology.N, f.failed_tors, paths)


def inject_and_measure_baseline(
    b: BaselineTopology,
    failed_edges: Iterable[int] = (),
    failed_tors: Iterable[int] = (),
    *,
    paths: bool = True,
) -> FaultReport:
    """Same counting rules on a static network; ``failed_edges`` index ``b.edges``.

    Path lengths are between ToRs, in switch-to-switch hops.
    """
    fe = set(failed_edges)
    ft = frozenset(failed_tors)
    edges = [e for i, e in enumerate(b.edges) if i not in fe and e[0] not in ft and e[1] not in ft]
    dead = ft | frozenset(range(b.num_tors, b.num_nodes))
    return _measure([edges], b.num_nodes, dead, paths)


def random_failure_set(t: OperaTopology, kind: str, count: int, rng: np.random.Generator) -> FailureSet:
    order = _failure_order(t, kind, rng)
    return _prefix_failure(kind, order, count)


def _failure_order(t: OperaTopology, kind: str, rng: np.random.Generator) -> list:
    if kind == "link":
        elems = [(r, sw.id) for r in range(t.N) for sw in t.switches]
    elif kind == "tor":
        elems = list(range(t.N))
    elif kind == "switch":
        elems = [sw.id for sw in t.switches]
    else:
        raise InvalidParameterError(f"unknown failure kind {kind!r}")
    return [elems[i] for i in rng.permutation(len(elems))]


def _prefix_failure(kind: str, order: list, count: int) -> FailureSet:
    chosen = frozenset(order[:count])
    if kind == "link":
        return FailureSet(failed_links=chosen)
    if kind == "tor":
        return FailureSet(failed_tors=chosen)
    return FailureSet(failed_switches=chosen)


@dataclass(frozen=True)
class SweepPoint:
    fraction: float
    failed: int
    mean_worst_slice_loss: float
    max_worst_slice_loss: float
    mean_integrated_loss: float
    max_integrated_loss: float
    mean_avg_path: float = math.nan
    mean_max_path: float = math.nan
    trials: list[FaultReport] = field(default_factory=list, repr=False, compare=False)


def failure_sweep(
    schedule: SliceSchedule,
    kind: str,
    fractions: Sequence[float],
    seeds: Sequence[int],
    *,
    paths: bool = False,
) -> list[SweepPoint]:
    """Monte-Carlo connectivity loss as a function of the failed fraction.

    Each seed fixes one random order of the failable elements and fails a
    growing prefix of it, so within a seed the failure sets are nested and
    the loss cannot decrease with the fraction.
    """
    t = schedule.topology
    total = {"link": t.N * t.u, "tor": t.N, "switch": t.u}.get(kind)
    if total is None:
        raise InvalidParameterError(f"unknown failure kind {kind!r}")
    for fr in fractions:
        if not 0 <= fr <= 1:
            raise InvalidParameterError(f"failure fraction {fr} outside [0, 1]")
    orders = [_failure_order(t, kind, np.random.default_rng(s)) for s in seeds]
    points = []
    for fr in fractions:
        count = int(round(fr * total))
        reports = [inject_and_measure(schedule, _prefix_failure(kind, o, count), paths=paths) for o in orders]
        worst = [r.worst_slice_loss for r in reports]
        integ = [r.integrated_loss for r in reports]
        points.append(
            SweepPoint(
                fraction=fr,
                failed=count,
                mean_worst_slice_loss=float(np.mean(worst)),
                max_worst_slice_loss=float(np.max(worst)),
                mean_integrated_loss=float(np.mean(integ)),
                max_integrated_loss=float(np.max(integ)),
                mean_avg_path=float(np.nanmean([r.avg_path_length_under_failure for r in reports])) if paths else math.nan,
                mean_max_path=float(np.nanmean([r.max_path_length_under_failure for r in reports])) if paths else math.nan,
                trials=reports,
            )
        )
    return points


def zero_loss_threshold(points: Sequence[SweepPoint], metric: str = "mean_integrated_loss") -> float:
    """Largest swept fraction up to which the chosen loss stays exactly zero."""
    best = 0.0
    for p in sorted(points, key=lambda p: p.fraction):
        if getattr(p, metric) > 0:
            break
        best = p.fraction
    return best


def ruleset_size(num_racks: int, uplinks: int) -> int:
    """Forwarding entries per ToR: a low-latency next hop for every other rack
    in every slice, plus the bulk direct-port rules."""
    if num_racks < 1 or uplinks < 1:
        raise InvalidParameterError("rack and uplink counts must be positive")
    return num_racks * (num_racks - 1) + num_racks * (uplinks - 1)


def infer_uplinks(num_racks: int, entries: int) -> int | None:
    """Invert :func:`ruleset_size` for ``u``; None if no integral ``u`` fits."""
    rest = entries - num_racks * (num_racks - 1)
    if rest < 0 or rest % num_racks:
        return None
    return rest // num_racks + 1


def expander_baseline_gap(u_active: int, num_racks: int, trials: int, seed: int | None = None) -> float:
    """Mean spectral gap of unions of ``u_active`` independent random perfect matchings."""
    if trials < 1:
        raise InvalidParameterError("need at least one trial")
    rng = np.random.default_rng(seed)
    gaps = []
    for _ in range(trials):
        edges = []
        for _ in range(u_active):
            p = rng.permutation(num_racks)
            edges.extend((int(p[2 * i]), int(p[2 * i + 1])) for i in range(num_racks // 2))
        gaps.append(spectral_gap(num_racks, edges))
    return float(np.mean(gaps))


def generate_expanding_opera(
    k: int,
    num_racks: int,
    seed: int,
    *,
    max_diameter: int | None = None,
    attempts: int = 3,
    timing: TimingParams | None = None,
    group_size: int = 1,
) -> tuple[OperaTopology, int]:
    """Draw realizations with seeds ``seed, seed+1, ...`` until every slice is
    connected (and within ``max_diameter`` if given).

    Returns the accepted topology and the seed that produced it.
    """
    for attempt in range(attempts):
        s = seed + attempt
        t = build_opera(k, num_racks, s)
        sched = build_schedule(t, timing, group_size=group_size)
        ok = True
        for sl in sched.slices:
            D = distance_matrix(t.N, [(a, b) for a, b, _ in sl.union_edges])
            worst = D.max()
            if not np.isfinite(worst) or (max_diameter is not None and worst > max_diameter):
                ok = False
                break
        if ok:
            return t, s
    raise TopologyInvariantError(
        f"no realization with connected slices{'' if max_diameter is None else f' of diameter <= {max_diameter}'} in {attempts} attempts"
    )


def metrics_to_csv(rows: Sequence[SliceMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["slice_index", "connected", "diameter", "avg_path_length", "spectral_gap", "histogram"])
    for m in rows:
        hist = ";".join(f"{h}:{c}" for h, c in m.path_length_histogram.items())
        w.writerow([m.slice_index, m.connected, m.diameter, f"{m.avg_path_length:.6f}", f"{m.spectral_gap:.6f}", hist])
    return buf.getvalue()


def sweep_to_csv(kind: str, points: Sequence[SweepPoint], seeds: Sequence[int]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "fraction", "failed", "seed", "worst_slice_disconnected", "integrated_disconnected",
                "worst_slice_loss", "integrated_loss", "avg_path", "max_path"])
    for p in points:
        for seed, r in zip(seeds, p.trials):
            w.writerow([kind, p.fraction, p.failed, seed, r.worst_slice_disconnected_pairs,
                        r.integrated_disconnected_pairs, f"{r.worst_slice_loss:.6f}", f"{r.integrated_loss:.6f}",
                        r.avg_path_length_under_failure, r.max_path_length_under_failure])
    return buf.getvalue()
