"""Opera topology construction.

An Opera network is ``N`` ToRs, each with ``u = k/2`` uplinks into ``u``
rotor circuit switches. The ``N`` matchings of a factorization of the
all-ones ``N x N`` matrix are dealt out to the switches (``N/u`` each), and
every switch cycles through its share in a fixed random order.

Factorizations are stored as symmetric Latin squares internally
(``square[i, j]`` is the index of the matching that pairs ``i`` with ``j``;
the diagonal marks fixed points) and exposed as :class:`Matching` objects.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InfeasibleSizingError, InvalidParameterError, ValidationError

__all__ = [
    "Matching",
    "CircuitSwitch",
    "OperaTopology",
    "BaselineTopology",
    "ValidationReport",
    "factorize_complete_graph",
    "lift_factorization",
    "build_opera",
    "build_baseline",
    "validate_topology",
    "validate_factorization",
    "eight_rack_topology",
    "opera_racks_for_radix",
    "topology_to_dict",
    "topology_from_dict",
    "save_topology",
    "load_topology",
]


@dataclass(frozen=True)
class Matching:
    """One circuit configuration: rack ``i`` is connected to ``perm[i]``.

    ``perm[i] == i`` is a fixed point (the port loops back, no inter-rack
    link). Built from pairs the matching is symmetric by construction;
    :meth:`from_permutation` accepts arbitrary maps so malformed input can be
    represented and reported by the validators.
    """

    perm: tuple[int, ...]

    @classmethod
    def from_pairs(
        cls, n: int, pairs: Iterable[Sequence[int]], fixed_points: Iterable[int] = ()
    ) -> "Matching":
        perm = [-1] * n
        for a, b in pairs:
            if a == b:
                raise ValidationError(f"pair ({a}, {b}) is a self-loop; list it as a fixed point")
            for x in (a, b):
                if not 0 <= x < n:
                    raise ValidationError(f"rack {x} out of range [0, {n})")
                if perm[x] != -1:
                    raise ValidationError(f"rack {x} appears more than once")
            perm[a], perm[b] = b, a
        for x in fixed_points:
            if not 0 <= x < n:
                raise ValidationError(f"rack {x} out of range [0, {n})")
            if perm[x] != -1:
                raise ValidationError(f"rack {x} appears more than once")
            perm[x] = x
        missing = [i for i, p in enumerate(perm) if p == -1]
        if missing:
            raise ValidationError(f"racks {missing} are not covered")
        return cls(tuple(perm))

    @classmethod
    def from_permutation(cls, perm: Sequence[int]) -> "Matching":
        return cls(tuple(int(p) for p in perm))

    @property
    def n(self) -> int:
        return len(self.perm)

    @cached_property
    def pairs(self) -> frozenset[tuple[int, int]]:
        return frozenset(
            (min(i, p), max(i, p)) for i, p in enumerate(self.perm) if p != i
        )

    @cached_property
    def fixed_points(self) -> frozenset[int]:
        return frozenset(i for i, p in enumerate(self.perm) if p == i)

    def is_symmetric(self) -> bool:
        n = self.n
        return all(0 <= p < n and self.perm[p] == i for i, p in enumerate(self.perm))

    def partner(self, rack: int) -> int:
        return self.perm[rack]

    def to_lists(self) -> list[list]:
        return [sorted([list(p) for p in self.pairs]), sorted(self.fixed_points)]

    def __repr__(self) -> str:
        return f"Matching(pairs={sorted(self.pairs)}, fixed_points={sorted(self.fixed_points)})"


@dataclass(frozen=True)
class CircuitSwitch:
    id: int
    matchings: tuple[Matching, ...]
    group: int = 0


@dataclass(frozen=True)
class OperaTopology:
    num_racks: int
    hosts_per_rack: int
    uplinks_per_rack: int
    tor_radix: int
    switches: tuple[CircuitSwitch, ...]
    seed: int | None = None

    @property
    def N(self) -> int:
        return self.num_racks

    @property
    def u(self) -> int:
        return self.uplinks_per_rack

    @property
    def d(self) -> int:
        return self.hosts_per_rack

    @property
    def k(self) -> int:
        return self.tor_radix

    @property
    def num_hosts(self) -> int:
        return self.num_racks * self.hosts_per_rack

    @property
    def matchings_per_switch(self) -> int:
        return self.num_racks // self.uplinks_per_rack

    def all_matchings(self) -> list[Matching]:
        return [m for sw in self.switches for m in sw.matchings]

    def rack_of_host(self, host: int) -> int:
        return host // self.hosts_per_rack


# ---------------------------------------------------------------------------
# Factorization of the all-ones matrix
# ---------------------------------------------------------------------------


def _reflection_square(n: int) -> np.ndarray:
    # matching c pairs i with (c - i) mod n; each diagonal cell is hit once
    i = np.arange(n)
    return (i[:, None] + i[None, :]) % n


def _circle_square(n: int) -> np.ndarray:
    # round-robin 1-factorization of K_n on colors 0..n-2, identity on color n-1
    sq = np.full((n, n), -1, dtype=np.int64)
    m = n - 1
    for r in range(m):
        sq[m, r] = sq[r, m] = r
        for j in range(1, n // 2):
            a, b = (r + j) % m, (r - j) % m
            sq[a, b] = sq[b, a] = r
    np.fill_diagonal(sq, m)
    return sq


def _square_to_partners(sq: np.ndarray) -> np.ndarray:
    """partners[c, i] = rack paired with i in matching c."""
    n = sq.shape[0]
    partners = np.empty((n, n), dtype=np.int64)
    rows, cols = np.indices((n, n))
    partners[sq, rows] = cols
    return partners


def _kempe_mix(partners: np.ndarray, swaps: int, rng: np.random.Generator, colors: np.ndarray) -> None:
    """Randomize a factorization in place by swapping two matchings along
    alternating components (Kempe chains).

    In the union of matchings ``a`` and ``b`` every rack has exactly one
    ``a``-partner and one ``b``-partner (possibly itself), so exchanging the
    two partner entries for every rack of a component keeps both matchings
    valid and symmetric.
    """
    n = partners.shape[1]
    if len(colors) < 2:
        return
    for _ in range(swaps):
        a, b = rng.choice(colors, size=2, replace=False)
        pa, pb = partners[a], partners[b]
        start = int(rng.integers(n))
        comp = [start]
        seen = {start}
        x, use_a = start, True
        while True:
            y = int(pa[x] if use_a else pb[x])
            use_a = not use_a
            if y in seen:
                # closed the cycle, or hit a fixed point: then walk the other way
                break
            seen.add(y)
            comp.append(y)
            x = y
        x, use_a = start, False
        while True:
            y = int(pa[x] if use_a else pb[x])
            use_a = not use_a
            if y in seen:
                break
            seen.add(y)
            comp.append(y)
            x = y
        idx = np.fromiter(seen, dtype=np.int64)
        tmp = pa[idx].copy()
        pa[idx] = pb[idx]
        pb[idx] = tmp


def _partners_to_matchings(partners: np.ndarray) -> list[Matching]:
    return [Matching(tuple(int(x) for x in row)) for row in partners]


def factorize_complete_graph(
    n: int,
    seed: int | None = None,
    *,
    diagonal: str = "spread",
    mixing_swaps: int | None = None,
) -> list[Matching]:
    """Randomly factor the ``n x n`` all-ones matrix into ``n`` symmetric matchings.

    ``diagonal="spread"`` starts from the reflection factorization of
    ``Z_n`` (half the matchings carry two fixed points, the rest are perfect);
    ``diagonal="identity"`` starts from the round-robin 1-factorization plus
    one all-fixed-point matching. Either start is relabeled at random and
    scrambled with Kempe-chain swaps so the union of a few matchings looks
    like a random regular graph rather than a circulant.
    """
    if n < 2 or n % 2:
        raise InvalidParameterError(f"rack count must be even and >= 2, got {n}")
    if diagonal not in ("spread", "identity"):
        raise InvalidParameterError(f"unknown diagonal mode {diagonal!r}")
    rng = np.random.default_rng(seed)
    sq = _reflection_square(n) if diagonal == "spread" else _circle_square(n)
    relabel = rng.permutation(n)
    inv = np.argsort(relabel)
    sq = sq[np.ix_(inv, inv)]
    partners = _square_to_partners(sq)
    if diagonal == "spread":
        mixable = np.arange(n)
    else:
        mixable = np.arange(n - 1)  # keep the identity matching intact
    if mixing_swaps is None:
        mixing_swaps = 4 * n * max(1, int(math.log2(n)))
    _kempe_mix(partners, mixing_swaps, rng, mixable)
    order = rng.permutation(n)
    return _partners_to_matchings(partners[order])


def _random_latin_rows(L: int, rng: np.random.Generator) -> np.ndarray:
    """rows[t] is a permutation of range(L); column i of rows is a permutation too."""
    alpha = rng.permutation(L)
    beta = rng.permutation(L)
    gamma = rng.permutation(L)
    return gamma[(alpha[None, :] + beta[:, None]) % L]


def lift_factorization(base: Sequence[Matching], factor: int, seed: int | None = None) -> list[Matching]:
    """Lift a factorization on ``n`` racks to one on ``n * factor`` racks.

    Rack ``a`` becomes the block ``a*L .. a*L+L-1``. A base pair ``(a, b)``
    spawns ``L`` lifted matchings that join the two blocks through the rows
    of a random Latin square, so all ``L^2`` block-to-block pairs are used
    exactly once. A base fixed point ``a`` spawns the matchings of a random
    factorization of the block's own all-ones matrix.
    """
    report = validate_factorization(base)
    if not report.ok:
        raise ValidationError("base is not a valid factorization: " + "; ".join(report.failures))
    if factor < 1:
        raise InvalidParameterError(f"lift factor must be >= 1, got {factor}")
    L = factor
    n = len(base)
    if L == 1:
        return list(base)
    rng = np.random.default_rng(seed)
    out = np.empty((n * L, n * L), dtype=np.int64)
    block_sq = _reflection_square(L)
    block_partners = _square_to_partners(block_sq)
    for m_idx, m in enumerate(base):
        rows = out[m_idx * L:(m_idx + 1) * L]
        for a, b in m.pairs:
            sigma = _random_latin_rows(L, rng)  # sigma[t, i] = offset in block b
            src = a * L + np.arange(L)
            dst = b * L + sigma
            rows[:, src] = dst
            rows[np.arange(L)[:, None], dst] = src[None, :]
        for a in m.fixed_points:
            relabel = rng.permutation(L)
            order = rng.permutation(L)
            # block_partners[c] relabeled: relabel[i] <-> relabel[partner(i)]
            for t in range(L):
                bp = block_partners[order[t]]
                rows[t, a * L + relabel] = a * L + relabel[bp]
    return _partners_to_matchings(out)


@dataclass
class ValidationReport:
    checks: dict[str, bool] = field(default_factory=dict)
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def record(self, name: str, problems: list[str]) -> None:
        self.checks[name] = not problems
        self.failures.extend(f"{name}: {p}" for p in problems)

    def summary(self) -> str:
        lines = [f"{'PASS' if v else 'FAIL'} {k}" for k, v in self.checks.items()]
        lines.extend("  " + f for f in self.failures)
        return "\n".join(lines)


def _coverage_problems(matchings: Sequence[Matching], n: int, limit: int = 20) -> list[str]:
    seen: dict[tuple[int, int], int] = {}
    problems = []
    for idx, m in enumerate(matchings):
        for i, p in enumerate(m.perm):
            if not 0 <= p < n or p < i:
                continue
            key = (i, p)
            if key in seen:
                if len(problems) < limit:
                    what = f"fixed point {i}" if i == p else f"pair ({i}, {p})"
                    problems.append(f"{what} in matchings {seen[key]} and {idx}")
            else:
                seen[key] = idx
    expected = n * (n - 1) // 2 + n
    if len(seen) != expected:
        missing = [
            (i, j) for i in range(n) for j in range(i, n) if (i, j) not in seen
        ][:limit]
        for i, j in missing:
            problems.append(f"fixed point {i} missing" if i == j else f"pair ({i}, {j}) missing")
    return problems


def validate_factorization(matchings: Sequence[Matching]) -> ValidationReport:
    report = ValidationReport()
    n = len(matchings)
    report.record(
        "count",
        [] if all(m.n == n for m in matchings) else [f"{n} matchings but sizes {sorted({m.n for m in matchings})}"],
    )
    perm_problems = []
    sym_problems = []
    for idx, m in enumerate(matchings):
        if sorted(m.perm) != list(range(m.n)):
            perm_problems.append(f"matching {idx} is not a permutation")
        elif not m.is_symmetric():
            bad = [i for i, p in enumerate(m.perm) if m.perm[p] != i][:5]
            sym_problems.append(f"matching {idx} maps racks {bad} asymmetrically")
    report.record("permutation", perm_problems)
    report.record("symmetry", sym_problems)
    report.record("coverage", _coverage_problems(matchings, n) if report.checks["count"] else [])
    return report


def validate_topology(t: OperaTopology) -> ValidationReport:
    """Check every structural invariant of ``t``; failures name offenders."""
    report = ValidationReport()
    sizing = []
    if t.uplinks_per_rack != t.tor_radix // 2 or t.hosts_per_rack != t.tor_radix - t.uplinks_per_rack:
        sizing.append(f"k={t.k} requires u=d={t.k // 2}, got u={t.u}, d={t.d}")
    if len(t.switches) != t.u:
        sizing.append(f"{len(t.switches)} switches for u={t.u}")
    report.record("sizing", sizing)
    per_switch = []
    disjoint = []
    for sw in t.switches:
        if len(sw.matchings) != t.N // t.u:
            per_switch.append(f"switch {sw.id} holds {len(sw.matchings)} matchings, expected {t.N // t.u}")
        pairs_seen: dict[tuple[int, int], int] = {}
        for idx, m in enumerate(sw.matchings):
            for p in m.pairs:
                if p in pairs_seen:
                    disjoint.append(f"switch {sw.id} matchings {pairs_seen[p]} and {idx} share pair {p}")
                pairs_seen[p] = idx
    report.record("per_switch_count", per_switch)
    report.record("disjointness", disjoint)
    sub = validate_factorization(t.all_matchings())
    for name in ("count", "permutation", "symmetry", "coverage"):
        report.checks[name] = sub.checks[name]
    report.failures.extend(sub.failures)
    return report


# ---------------------------------------------------------------------------
# Opera assembly
# ---------------------------------------------------------------------------


def opera_racks_for_radix(k: int) -> int:
    """Rack count of the Opera network cost-matched to a 3:1 folded Clos of radix ``k``."""
    if k % 2:
        raise InvalidParameterError(f"radix must be even, got {k}")
    return 3 * (k // 2) ** 2


def build_opera(
    k: int,
    num_racks: int,
    seed: int | None = None,
    *,
    lift_base: int | None = None,
    diagonal: str = "spread",
) -> OperaTopology:
    """Generate a random Opera topology for ToR radix ``k``.

    The factorization is drawn directly on ``num_racks`` racks unless
    ``lift_base`` names a smaller base to factorize and lift. Lifting is cheap
    but the lifts of one base matching project onto the same base edges, so
    slices that happen to activate several of them expand poorly.
    """
    if k < 2 or k % 2:
        raise InvalidParameterError(f"ToR radix must be even, got {k}")
    u = k // 2
    n = num_racks
    if n < 2 or n % 2:
        raise InvalidParameterError(f"rack count must be even, got {n}")
    if n % u:
        raise InvalidParameterError(f"rack count {n} is not divisible by u={u}")
    rng = np.random.default_rng(seed)
    fact_seed, lift_seed = (int(s) for s in rng.integers(0, 2**63 - 1, size=2))
    if lift_base is None or lift_base == n:
        matchings = factorize_complete_graph(n, fact_seed, diagonal=diagonal)
    else:
        if n % lift_base or lift_base % 2:
            raise InvalidParameterError(f"lift base {lift_base} must be even and divide {n}")
        base = factorize_complete_graph(lift_base, fact_seed, diagonal=diagonal)
        matchings = lift_factorization(base, n // lift_base, lift_seed)
    assignment = rng.permutation(n)
    per = n // u
    switches = []
    for s in range(u):
        chosen = [matchings[i] for i in assignment[s * per:(s + 1) * per]]
        order = rng.permutation(per)
        switches.append(CircuitSwitch(id=s, matchings=tuple(chosen[i] for i in order), group=s))
    return OperaTopology(
        num_racks=n,
        hosts_per_rack=k - u,
        uplinks_per_rack=u,
        tor_radix=k,
        switches=tuple(switches),
        seed=seed,
    )


# Eight racks, four rotor switches with matchings [A, B] each (1-based as
# drawn): rack 1-6 rides switch 4's A, rack 6-8 switch 2's A and rack 1-8
# switch 2's B. Any three matchings on three distinct switches connect all
# racks, and with switches 2-4 on A the only two-hop route 1 -> 8 is via 6.
_EIGHT_RACK_LAYOUT = (
    # switch 1
    ([(0, 6), (1, 2), (3, 7), (4, 5)], [(0, 2), (1, 7), (3, 4), (5, 6)]),
    # switch 2
    ([(0, 4), (1, 6), (5, 7), (2, 2), (3, 3)], [(0, 7), (1, 5), (2, 3), (4, 6)]),
    # switch 3
    ([(0, 1), (2, 7), (3, 5), (4, 4), (6, 6)], [(0, 3), (2, 6), (4, 7), (5, 5), (1, 1)]),
    # switch 4
    ([(0, 5), (1, 3), (2, 4), (6, 7)], [(1, 4), (2, 5), (3, 6), (7, 7), (0, 0)]),
)


def eight_rack_topology() -> OperaTopology:
    """The eight-rack, four-switch example network (racks/switches 0-based)."""
    switches = []
    for s, (a, b) in enumerate(_EIGHT_RACK_LAYOUT):
        ms = []
        for pairs in (a, b):
            fixed = [x for x, y in pairs if x == y]
            real = [(x, y) for x, y in pairs if x != y]
            ms.append(Matching.from_pairs(8, real, fixed))
        switches.append(CircuitSwitch(id=s, matchings=tuple(ms), group=s))
    return OperaTopology(8, 4, 4, 8, tuple(switches), seed=None)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BaselineTopology:
    """A static comparison network.

    ``edges`` lists inter-switch links (a multiset; parallel links repeat).
    For the expander, nodes are racks. For the folded Clos, nodes
    ``0..num_tors-1`` are ToRs followed by aggregation then core switches.
    """

    kind: str
    params: dict
    num_nodes: int
    num_tors: int
    hosts_per_tor: int
    edges: tuple[tuple[int, int], ...]

    @property
    def num_hosts(self) -> int:
        return self.num_tors * self.hosts_per_tor

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.num_nodes)]
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj


def _random_perfect_matching(n: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    p = rng.permutation(n)
    return [(int(p[2 * i]), int(p[2 * i + 1])) for i in range(n // 2)]


def _connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    seen = {0}
    stack = [0]
    while stack:
        x = stack.pop()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == n


def random_regular_union(n: int, u: int, rng: np.random.Generator, max_tries: int = 1000) -> list[tuple[int, int]]:
    """Union of ``u`` independent random perfect matchings, regenerated until connected."""
    if n % 2:
        raise InvalidParameterError(f"need an even node count for perfect matchings, got {n}")
    for _ in range(max_tries):
        edges = [e for _ in range(u) for e in _random_perfect_matching(n, rng)]
        if u == 0 or _connected(n, edges):
            return edges
    raise InvalidParameterError(f"could not draw a connected {u}-regular union on {n} nodes")


def build_baseline(
    kind: str,
    k: int,
    alpha: float,
    *,
    hosts: int | None = None,
    seed: int | None = None,
) -> BaselineTopology:
    """Build a static network at cost ratio ``alpha`` for ToR radix ``k``.

    folded_clos: ``F = 4/alpha`` and the host count follows from ``F``.
    static_expander: ``u = round(alpha*k/(1+alpha))`` uplinks, ``d = k - u``
    hosts per rack, and enough racks to host ``hosts`` servers (default: the
    host count of the Opera network of the same radix, so both carry the
    same servers).
    """
    from .costmodel import hosts_for_alpha

    if alpha <= 0:
        raise InvalidParameterError(f"cost ratio must be positive, got {alpha}")
    rng = np.random.default_rng(seed)
    if kind == "folded_clos":
        F_exact = 4.0 / alpha
        F = round(F_exact)
        up = k / (F + 1) if F >= 1 else 0
        if F < 1 or abs(F - F_exact) > 1e-9 or up != int(up) or k % 2:
            nearest = []
            for cand in range(1, k):
                if k % (cand + 1) == 0:
                    nearest.append({"F": cand, "alpha": 4.0 / cand, "hosts": hosts_for_alpha(k, 4.0 / cand)[1]})
            nearest.sort(key=lambda c: abs(c["F"] - F_exact))
            raise InfeasibleSizingError(
                f"alpha={alpha} gives F={F_exact:.4g}, not an integral folded Clos for k={k}",
                nearest[:2],
            )
        return _build_clos(k, F)
    if kind == "static_expander":
        u = round(alpha * k / (1 + alpha))
        if u < 1 or u >= k:
            raise InfeasibleSizingError(
                f"alpha={alpha} gives u={u} uplinks, need 0 < u < {k}",
                [{"u": 1, "d": k - 1}, {"u": k - 1, "d": 1}],
            )
        d = k - u
        if hosts is None:
            hosts = opera_racks_for_radix(k) * (k // 2)
        racks = math.ceil(hosts / d)
        if (racks * u) % 2:
            racks += 1
        if racks % 2 == 0:
            edges = random_regular_union(racks, u, rng)
        else:
            edges = _random_regular_multigraph(racks, u, rng)
        return BaselineTopology(
            kind="static_expander",
            params={"k": k, "u": u, "d": d, "racks": racks, "alpha": alpha},
            num_nodes=racks,
            num_tors=racks,
            hosts_per_tor=d,
            edges=tuple(edges),
        )
    raise InvalidParameterError(f"unknown baseline kind {kind!r}")


def _random_regular_multigraph(n: int, u: int, rng: np.random.Generator, max_tries: int = 1000) -> list[tuple[int, int]]:
    # configuration model without self-loops; only used for odd n
    for _ in range(max_tries):
        stubs = np.repeat(np.arange(n), u)
        rng.shuffle(stubs)
        edges = [(int(stubs[2 * i]), int(stubs[2 * i + 1])) for i in range(len(stubs) // 2)]
        if all(a != b for a, b in edges) and _connected(n, edges):
            return edges
    raise InvalidParameterError(f"could not draw a connected {u}-regular multigraph on {n} nodes")


def _build_clos(k: int, F: int) -> BaselineTopology:
    up = k // (F + 1)
    d = k - up
    half = k // 2
    pods = k
    tors_per_pod = half
    aggs_per_pod = up
    num_tors = pods * tors_per_pod
    num_aggs = pods * aggs_per_pod
    num_cores = aggs_per_pod * half
    agg0 = num_tors
    core0 = num_tors + num_aggs
    edges = []
    for p in range(pods):
        for t in range(tors_per_pod):
            tor = p * tors_per_pod + t
            for a in range(aggs_per_pod):
                edges.append((tor, agg0 + p * aggs_per_pod + a))
        for a in range(aggs_per_pod):
            for c in range(half):
                edges.append((agg0 + p * aggs_per_pod + a, core0 + a * half + c))
    return BaselineTopology(
        kind="folded_clos",
        params={"k": k, "F": F, "tiers": 3, "tor_uplinks": up, "pods": pods, "alpha": 4.0 / F},
        num_nodes=core0 + num_cores,
        num_tors=num_tors,
        hosts_per_tor=d,
        edges=tuple(edges),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def topology_to_dict(t: OperaTopology) -> dict:
    return {
        "k": t.k,
        "N": t.N,
        "d": t.d,
        "u": t.u,
        "seed": t.seed,
        "switches": [
            {"id": sw.id, "group": sw.group, "matchings": [m.to_lists() for m in sw.matchings]}
            for sw in t.switches
        ],
    }


def topology_from_dict(doc: dict) -> OperaTopology:
    try:
        n = int(doc["N"])
        switches = []
        for sw in doc["switches"]:
            ms = tuple(Matching.from_pairs(n, pairs, fixed) for pairs, fixed in sw["matchings"])
            switches.append(CircuitSwitch(id=int(sw["id"]), matchings=ms, group=int(sw.get("group", sw["id"]))))
        return OperaTopology(
            num_racks=n,
            hosts_per_rack=int(doc["d"]),
            uplinks_per_rack=int(doc["u"]),
            tor_radix=int(doc["k"]),
            switches=tuple(switches),
            seed=doc.get("seed"),
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed topology document: {exc!r}") from exc


def save_topology(t: OperaTopology, path: str | Path) -> None:
    Path(path).write_text(json.dumps(topology_to_dict(t), indent=1, sort_keys=True) + "\n")


def load_topology(path: str | Path) -> OperaTopology:
    return topology_from_dict(json.loads(Path(path).read_text()))
