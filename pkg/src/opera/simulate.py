"""Packet-level discrete-event simulation of rotor and static fabrics.

Time is kept in integer nanoseconds; serialization times are rounded up to
the next nanosecond. Every egress port has three FIFO queues served in strict
priority (control, low-latency data, bulk). Circuit uplinks look up the
physical state of their switch at dequeue time, so nothing is put on a
circuit that is dark or has moved on to another matching.

Low-latency flows use a small trimming/pull transport: a window goes out at
once, overflowing data packets are cut to headers that jump to the control
queue, and the receiver paces pulls (one per MTU time) that either clock out
new data or ask for a trimmed packet again. A slow timeout only covers lost
control packets.

Bulk flows on a rotor fabric wait at the sending host, per destination rack.
At every slice start each ToR admits up to one slice worth of bytes per
active circuit: first relayed traffic parked at this ToR, then local traffic
for the circuit's peer, then (optionally) two-hop offload of backlog that
exceeds what the direct circuits can carry in one cycle. Bulk packets that
are dropped or find their circuit gone produce a NACK to the sender.

Static fabrics are a single slice that never ends; every flow uses the
low-latency transport there. The folded Clos is collapsed into one core node
whose ports run at the ToR's aggregate uplink rate.
"""

from __future__ import annotations

import heapq
import math
import random
from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .errors import InvalidParameterError, NoCandidateError
from .metrics import Delivery, MetricsReport, report_metrics
from .routing import BULK, build_all_tables, tables_from_adjacency, vlb_intermediate
from .schedule import SliceSchedule
from .topology import BaselineTopology, OperaTopology
from .workload import FlowRecord

__all__ = [
    "SimParams",
    "run",
    "KIND_NAMES",
    "LL_DATA",
    "LL_HEADER",
    "LL_PULL",
    "BULK_DATA",
    "BULK_NACK",
    "HELLO",
]

NS = 1_000_000_000

LL_DATA, LL_HEADER, LL_PULL, BULK_DATA, BULK_NACK, HELLO = range(6)
KIND_NAMES = ("LL_data", "LL_header", "LL_pull", "bulk_data", "bulk_nack", "hello")
CTRL, LLQ, BULKQ = 0, 1, 2
_QUEUE_OF = (LLQ, CTRL, CTRL, BULKQ, CTRL, CTRL)

# port kinds
_NIC, _DOWN, _CIRCUIT, _STATIC, _CORE = range(5)

# event kinds
_ARR_TOR, _ARR_HOST, _FREE, _FLOW, _SLICE, _PACE, _RTO, _BRTO = range(8)


@dataclass(frozen=True)
class SimParams:
    """Engine constants. Queue sizes are bytes; times are seconds."""

    link_rate: float = 10e9
    mtu: int = 1500
    header_size: int = 64
    prop_delay: float = 500e-9
    host_delay: float = 0.0
    tor_delay: float = 0.0
    ll_queue: int = 12_000
    ctrl_queue: int = 12_000
    bulk_queue: int = 1_000_000
    ll_window: int = 12
    ll_rto: float = 1e-3
    bulk_rto_cycles: float = 4.0
    bulk_threshold: int = 15_000_000
    vlb: bool = True
    duty_factor: float | None = None
    horizon: float = 1.0
    bin_width: float = 1e-3
    max_hops: int = 8
    record_tx: bool = False

    def __post_init__(self):
        for name in ("link_rate", "mtu", "header_size", "ll_queue", "ctrl_queue", "bulk_queue",
                     "ll_window", "ll_rto", "bulk_rto_cycles", "bulk_threshold", "horizon",
                     "bin_width", "max_hops"):
            if getattr(self, name) <= 0:
                raise InvalidParameterError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("prop_delay", "host_delay", "tor_delay"):
            if getattr(self, name) < 0:
                raise InvalidParameterError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.header_size >= self.mtu:
            raise InvalidParameterError("header_size must be below mtu")
        if self.ll_queue < self.mtu:
            raise InvalidParameterError(f"ll_queue {self.ll_queue} B cannot hold one MTU")
        if self.duty_factor is not None and not 0 < self.duty_factor <= 1:
            raise InvalidParameterError(f"duty_factor must be in (0, 1], got {self.duty_factor}")


class Packet:
    __slots__ = ("flow", "seq", "size", "payload", "kind", "stamp", "hops",
                 "dst_rack", "dst_host", "peer", "port", "nack", "reroutes")

    def __init__(self, flow, seq, size, payload, kind, dst_rack, dst_host):
        self.flow = flow
        self.seq = seq
        self.size = size
        self.payload = payload
        self.kind = kind
        self.dst_rack = dst_rack
        self.dst_host = dst_host
        self.stamp = None
        self.hops = 0
        self.peer = -1
        self.port = -1
        self.nack = None
        self.reroutes = 0


class _Flow:
    __slots__ = ("rec", "id", "src", "dst", "src_rack", "dst_rack", "size", "npk", "bulk",
                 "next_new", "rtx", "got", "got_count", "done", "checked", "queued")

    def __init__(self, rec: FlowRecord, d: int, mtu: int, bulk: bool):
        self.rec = rec
        self.id = rec.id
        self.src = rec.src
        self.dst = rec.dst
        self.src_rack = rec.src // d
        self.dst_rack = rec.dst // d
        self.size = rec.size
        self.npk = -(-rec.size // mtu)
        self.bulk = bulk
        self.next_new = 0
        self.rtx: deque[int] = deque()
        self.got = bytearray(self.npk)
        self.got_count = 0
        self.done = False
        self.checked = -1
        self.queued = False


class _Port:
    __slots__ = ("kind", "rack", "switch", "dest", "rate", "q", "qb", "cap", "busy", "hop")

    def __init__(self, kind, rack, dest, rate, caps, switch=-1, hop=False):
        self.kind = kind
        self.rack = rack
        self.switch = switch
        self.dest = dest
        self.rate = rate
        self.q = (deque(), deque(), deque())
        self.qb = [0, 0, 0]
        self.cap = caps
        self.busy = False
        self.hop = hop


class _Engine:
    def __init__(self, network, schedule, tables, trace, params: SimParams, seed: int):
        self.p = params
        self.rng = random.Random(seed)
        self.rotor = isinstance(network, OperaTopology)
        self.counters = {
            "events": 0, "trims": 0, "ctrl_drops": 0, "bulk_drops": 0, "nacks": 0,
            "ll_rto": 0, "bulk_rto": 0, "hop_overflow": 0, "stale": 0, "vlb_bytes": 0,
            "retransmits": 0, "duplicates": 0, "unroutable": 0, "max_ll_queue_bytes": 0,
        }
        self.tx_log: list[tuple] = []
        self.deliveries: list[tuple[int, int, int, int]] = []
        self.completion: dict[int, float] = {}
        self.heap: list = []
        self.seqno = 0
        self.now = 0
        self.horizon = int(round(params.horizon * NS))
        self._ser_cache: dict[tuple[float, int], int] = {}
        self.prop = int(round(params.prop_delay * NS))
        self.host_prop = int(round(params.host_delay * NS))
        self.tor_fwd = int(round(params.tor_delay * NS))
        self.pace = self.ser(params.mtu, params.link_rate)
        rate = params.link_rate
        ll_caps = [params.ctrl_queue, params.ll_queue, params.bulk_queue]
        unbounded = [math.inf, math.inf, math.inf]

        if self.rotor:
            if schedule is None or schedule.topology is not network:
                raise InvalidParameterError("a rotor topology needs its own SliceSchedule")
            self.sched: SliceSchedule | None = schedule
            self.N = network.N
            self.d = network.d
            self.core = -1
            self.slice_ns = int(round(schedule.slice_duration * NS))
            self.eps_ns = int(round(schedule.epsilon * NS))
            self.uplinks = [
                {sw.id: _Port(_CIRCUIT, r, None, rate, ll_caps, switch=sw.id, hop=True)
                 for sw in network.switches}
                for r in range(self.N)
            ]
            nsl = schedule.num_slices
            if tables is not None:
                if len(tables) != nsl:
                    raise InvalidParameterError(f"expected tables for {nsl} slices, got {len(tables)}")
                self.tables = list(tables)
            else:
                self.tables = [None] * nsl
            duty = params.duty_factor if params.duty_factor is not None else schedule.duty_cycle
            self.credit = int(schedule.slice_duration * rate * duty / 8)
            if self.credit < params.mtu:
                raise InvalidParameterError(f"slice credit {self.credit} B is below one MTU")
            self.cycle_direct = (schedule.phases - 1) * self.credit
        elif isinstance(network, BaselineTopology):
            self.sched = None
            self.N = network.num_tors
            self.d = network.hosts_per_tor
            self.uplinks = [dict() for _ in range(self.N)]
            if network.kind == "folded_clos":
                up = network.params["tor_uplinks"]
                agg = rate * up
                scaled = [c * up for c in ll_caps]
                self.core = self.N
                self.core_ports = [_Port(_CORE, -1, b, agg, scaled) for b in range(self.N)]
                neighbors = [[(self.core, 0)] for _ in range(self.N)]
                neighbors.append([(b, b) for b in range(self.N)])
                for r in range(self.N):
                    self.uplinks[r][0] = _Port(_STATIC, r, self.core, agg, scaled, hop=True)
            elif network.kind == "static_expander":
                self.core = -1
                neighbors = [[] for _ in range(self.N)]
                for a, b in network.edges:
                    for x, y in ((a, b), (b, a)):
                        idx = len(self.uplinks[x])
                        self.uplinks[x][idx] = _Port(_STATIC, x, y, rate, ll_caps, hop=True)
                        neighbors[x].append((y, idx))
            else:
                raise InvalidParameterError(f"unknown baseline kind {network.kind!r}")
            self.tables = [tables[0] if tables else tables_from_adjacency(neighbors)]
        else:
            raise InvalidParameterError(f"cannot simulate a {type(network).__name__}")

        self.H = self.N * self.d
        self.nic = [_Port(_NIC, h // self.d, h // self.d, rate, unbounded) for h in range(self.H)]
        self.down = [_Port(_DOWN, h // self.d, h, rate, ll_caps) for h in range(self.H)]
        self.pacer = [deque() for _ in range(self.H)]
        self.pacing = [False] * self.H
        # bulk state
        self.hq = [dict() for _ in range(self.H)]        # host -> dst rack -> deque of flows
        self.hq_bytes = [dict() for _ in range(self.H)]  # host -> dst rack -> pending bytes
        self.rack_backlog = [dict() for _ in range(self.N)]
        self.relay = [dict() for _ in range(self.N)]     # rack -> next rack -> deque of packets
        self.relay_bytes = [dict() for _ in range(self.N)]

        self.flows: list[_Flow] = []
        for rec in trace:
            if not (0 <= rec.src < self.H and 0 <= rec.dst < self.H):
                raise InvalidParameterError(f"flow {rec.id} uses hosts outside 0..{self.H - 1}")
            bulk = rec.tag == BULK if rec.tag else rec.size >= params.bulk_threshold
            self.flows.append(_Flow(rec, self.d, params.mtu, bulk and self.rotor))
        self.outstanding = len(self.flows)
        for f in sorted(self.flows, key=lambda f: (f.rec.arrival, f.id)):
            self.push(int(round(f.rec.arrival * NS)), _FLOW, f, None)
        if self.rotor and self.flows:
            self.push(0, _SLICE, 0, None)

    # -- helpers ----------------------------------------------------------

    def push(self, t, kind, a, b):
        self.seqno += 1
        heapq.heappush(self.heap, (t, self.seqno, kind, a, b))

    def ser(self, nbytes: int, rate: float) -> int:
        key = (rate, nbytes)
        v = self._ser_cache.get(key)
        if v is None:
            v = math.ceil(nbytes * 8 * NS / rate - 1e-9)
            self._ser_cache[key] = v
        return v

    def payload_of(self, f: _Flow, seq: int) -> int:
        return min(self.p.mtu, f.size - seq * self.p.mtu)

    def slice_tables(self, stamp: int):
        i = stamp % len(self.tables)
        t = self.tables[i]
        if t is None:
            t = self.tables[i] = build_all_tables(self.sched.slices[i])
        return t

    def current_stamp(self) -> int:
        return self.now // self.slice_ns if self.rotor else 0

    def circuit_peer(self, rack: int, sw: int, ser: int) -> int:
        """Rack reached through ``sw`` from ``rack`` if a packet starting now fits; else -1."""
        i, off = divmod(self.now, self.slice_ns)
        sched = self.sched
        m = sched.slices[i % sched.num_slices].active.get(sw)
        if m is None:
            if off + ser > self.eps_ns:
                return -1
            m = sched.slices[(i - 1) % sched.num_slices].active.get(sw)
            if m is None:
                return -1
        peer = m.perm[rack]
        return -1 if peer == rack else peer

    # -- queues and links -------------------------------------------------

    def enqueue(self, port: _Port, pkt: Packet) -> None:
        qi = _QUEUE_OF[pkt.kind]
        if port.qb[qi] + pkt.size > port.cap[qi]:
            if pkt.kind == LL_DATA:
                self.counters["trims"] += 1
                pkt.kind = LL_HEADER
                pkt.size = self.p.header_size
                qi = CTRL
                if port.qb[qi] + pkt.size > port.cap[qi]:
                    self.counters["ctrl_drops"] += 1
                    return
            elif pkt.kind == BULK_DATA:
                self.counters["bulk_drops"] += 1
                self.drop_bulk(pkt, port.rack)
                return
            else:
                self.counters["ctrl_drops"] += 1
                return
        port.q[qi].append(pkt)
        port.qb[qi] += pkt.size
        if qi == LLQ and port.kind != _NIC and port.qb[qi] > self.counters["max_ll_queue_bytes"]:
            self.counters["max_ll_queue_bytes"] = port.qb[qi]
        if not port.busy:
            self.kick(port)

    def kick(self, port: _Port) -> None:
        stale = None
        while True:
            for qi in (CTRL, LLQ, BULKQ):
                if port.q[qi]:
                    break
            else:
                break
            pkt = port.q[qi].popleft()
            port.qb[qi] -= pkt.size
            ser = self.ser(pkt.size, port.rate)
            if port.kind == _CIRCUIT:
                if self.circuit_peer(port.rack, port.switch, ser) != pkt.peer:
                    if stale is None:
                        stale = []
                    stale.append(pkt)
                    continue
                if self.p.record_tx:
                    self.tx_log.append((self.now, self.now + ser, port.rack, port.switch, pkt.peer, pkt.kind))
            port.busy = True
            done = self.now + ser
            self.push(done, _FREE, port, None)
            if port.hop:
                pkt.hops += 1
            kind = port.kind
            if kind == _DOWN:
                self.push(done + self.host_prop, _ARR_HOST, port.dest, pkt)
            elif kind == _NIC:
                self.push(done + self.host_prop + self.tor_fwd, _ARR_TOR, port.dest, pkt)
            elif kind == _CIRCUIT:
                self.push(done + self.prop + self.tor_fwd, _ARR_TOR, pkt.peer, pkt)
            else:
                self.push(done + self.prop + self.tor_fwd, _ARR_TOR, port.dest, pkt)
            break
        if stale:
            for pkt in stale:
                self.on_stale(pkt, port.rack)

    def on_stale(self, pkt: Packet, rack: int) -> None:
        self.counters["stale"] += 1
        if pkt.kind == BULK_DATA:
            self.drop_bulk(pkt, rack)
            return
        if pkt.kind == LL_DATA:
            self.counters["trims"] += 1
            pkt.kind = LL_HEADER
            pkt.size = self.p.header_size
        pkt.reroutes += 1
        if pkt.reroutes > self.p.max_hops:
            self.counters["hop_overflow"] += 1
            return
        pkt.stamp = self.current_stamp()
        self.route_ll(rack, pkt)

    # -- forwarding -------------------------------------------------------

    def at_tor(self, node: int, pkt: Packet) -> None:
        if node == self.core:
            self.enqueue(self.core_ports[pkt.dst_rack], pkt)
            return
        if pkt.hops > self.p.max_hops:
            self.counters["hop_overflow"] += 1
            if pkt.kind == BULK_DATA:
                self.drop_bulk(pkt, node)
            return
        if pkt.dst_rack == node:
            self.enqueue(self.down[pkt.dst_host], pkt)
            return
        if pkt.kind == BULK_DATA:
            if pkt.hops == 0:
                self.enqueue(self.uplinks[node][pkt.port], pkt)
            else:
                # parked until this rack meets the destination directly
                q = pkt.dst_rack
                buf = self.relay[node].get(q)
                if buf is None:
                    buf = self.relay[node][q] = deque()
                buf.append(pkt)
            return
        self.route_ll(node, pkt)

    def route_ll(self, rack: int, pkt: Packet) -> None:
        if pkt.stamp is None:
            pkt.stamp = self.current_stamp()
        hops = self.slice_tables(pkt.stamp)[rack].low_latency.get(pkt.dst_rack)
        if not hops:
            self.counters["unroutable"] += 1
            return
        peer, port = hops[self.rng.randrange(len(hops))] if len(hops) > 1 else hops[0]
        pkt.peer = peer
        self.enqueue(self.uplinks[rack][port], pkt)

    def drop_bulk(self, pkt: Packet, rack: int) -> None:
        if pkt.hops == 0 and pkt.peer != pkt.dst_rack and pkt.peer >= 0:
            rb = self.relay_bytes[pkt.peer]
            rb[pkt.dst_rack] -= pkt.size
        f = pkt.flow
        self.counters["nacks"] += 1
        nack = Packet(f, pkt.seq, self.p.header_size, 0, BULK_NACK, f.src_rack, f.src)
        self.at_tor(rack, nack)

    # -- hosts ------------------------------------------------------------

    def at_host(self, h: int, pkt: Packet) -> None:
        f = pkt.flow
        kind = pkt.kind
        if kind == LL_DATA or kind == BULK_DATA:
            if not f.got[pkt.seq]:
                f.got[pkt.seq] = 1
                f.got_count += 1
                self.deliveries.append((f.id, self.now, pkt.payload, pkt.hops))
                if f.got_count == f.npk:
                    f.done = True
                    self.completion[f.id] = self.now / NS
                    self.outstanding -= 1
            else:
                self.counters["duplicates"] += 1
            if kind == LL_DATA and not f.done:
                self.pull(h, f, None)
        elif kind == LL_HEADER:
            if not f.done:
                self.pull(h, f, None if f.got[pkt.seq] else pkt.seq)
        elif kind == LL_PULL:
            if pkt.nack is not None:
                f.rtx.append(pkt.nack)
            self.ll_send_one(f)
        elif kind == BULK_NACK:
            if not f.done:
                f.rtx.append(pkt.seq)
                self.bulk_add(f, self.payload_of(f, pkt.seq))

    def pull(self, h: int, f: _Flow, nack: int | None) -> None:
        self.pacer[h].append((f, nack))
        if not self.pacing[h]:
            self.pacing[h] = True
            self.push(self.now, _PACE, h, None)

    def on_pace(self, h: int) -> None:
        q = self.pacer[h]
        while q:
            f, nack = q.popleft()
            if f.done:
                continue
            pkt = Packet(f, -1, self.p.header_size, 0, LL_PULL, f.src_rack, f.src)
            pkt.nack = nack
            self.enqueue(self.nic[h], pkt)
            self.push(self.now + self.pace, _PACE, h, None)
            return
        self.pacing[h] = False

    def ll_packet(self, f: _Flow, seq: int) -> None:
        pay = self.payload_of(f, seq)
        self.enqueue(self.nic[f.src], Packet(f, seq, pay, pay, LL_DATA, f.dst_rack, f.dst))

    def ll_send_one(self, f: _Flow) -> None:
        if f.done:
            return
        if f.rtx:
            self.counters["retransmits"] += 1
            self.ll_packet(f, f.rtx.popleft())
        elif f.next_new < f.npk:
            f.next_new += 1
            self.ll_packet(f, f.next_new - 1)

    def on_rto(self, f: _Flow) -> None:
        if f.done:
            return
        if f.got_count == f.checked:
            self.counters["ll_rto"] += 1
            missing = [s for s in range(f.next_new) if not f.got[s]][: self.p.ll_window]
            for s in missing:
                self.counters["retransmits"] += 1
                self.ll_packet(f, s)
        f.checked = f.got_count
        self.push(self.now + int(self.p.ll_rto * NS), _RTO, f, None)

    def on_flow(self, f: _Flow) -> None:
        if f.bulk and f.src_rack != f.dst_rack:
            self.bulk_add(f, f.size)
            self.push(self.now + int(self.p.bulk_rto_cycles * self.sched.cycle_time * NS), _BRTO, f, None)
            return
        for _ in range(min(self.p.ll_window, f.npk)):
            self.ll_send_one(f)
        self.push(self.now + int(self.p.ll_rto * NS), _RTO, f, None)

    # -- bulk -------------------------------------------------------------

    def bulk_add(self, f: _Flow, nbytes: int) -> None:
        h, q = f.src, f.dst_rack
        hb = self.hq_bytes[h]
        hb[q] = hb.get(q, 0) + nbytes
        rb = self.rack_backlog[f.src_rack]
        rb[q] = rb.get(q, 0) + nbytes
        if not f.queued:
            f.queued = True
            dq = self.hq[h].get(q)
            if dq is None:
                dq = self.hq[h][q] = deque()
            dq.append(f)

    def take_one(self, h: int, q: int, limit: int) -> Packet | None:
        """Next bulk packet from host ``h`` toward rack ``q`` if it fits in ``limit`` bytes."""
        dq = self.hq[h].get(q)
        while dq:
            f = dq[0]
            if f.done:
                left = sum(self.payload_of(f, s) for s in f.rtx) + sum(
                    self.payload_of(f, s) for s in range(f.next_new, f.npk))
                f.rtx.clear()
                f.next_new = f.npk
                self.hq_bytes[h][q] -= left
                self.rack_backlog[f.src_rack][q] -= left
                dq.popleft()
                f.queued = False
                continue
            if f.rtx:
                seq = f.rtx[0]
                retx = True
            elif f.next_new < f.npk:
                seq = f.next_new
                retx = False
            else:
                dq.popleft()
                f.queued = False
                continue
            pay = self.payload_of(f, seq)
            if pay > limit:
                return None
            if retx:
                f.rtx.popleft()
                self.counters["retransmits"] += 1
            else:
                f.next_new += 1
            # flows to one rack share the host's grant packet by packet
            dq.rotate(-1)
            self.hq_bytes[h][q] -= pay
            self.rack_backlog[f.src_rack][q] -= pay
            return Packet(f, seq, pay, pay, BULK_DATA, f.dst_rack, f.dst)
        return None

    def admit(self, hosts, q, budget, host_budget, peer, sw, grants) -> int:
        """Round-robin whole packets from ``hosts`` toward rack ``q`` via ``peer``."""
        used = 0
        active = [h for h in hosts if self.hq_bytes[h].get(q, 0) > 0 and host_budget[h] > 0]
        while active and budget - used > 0:
            nxt = []
            for h in active:
                pkt = self.take_one(h, q, min(budget - used, host_budget[h]))
                if pkt is None:
                    continue
                pkt.peer = peer
                pkt.port = sw
                used += pkt.size
                host_budget[h] -= pkt.size
                grants[h].append(pkt)
                if self.hq_bytes[h].get(q, 0) > 0 and host_budget[h] > 0:
                    nxt.append(h)
            active = nxt
        return used

    def on_slice(self, i: int) -> None:
        sl = self.sched.slice(i)
        C = self.credit
        d = self.d
        for r in range(self.N):
            relay = self.relay[r]
            backlog = self.rack_backlog[r]
            if not any(relay.values()) and not any(v > 0 for v in backlog.values()):
                continue
            circuits = sl.neighbors[r]
            budget = {s: C for _, s in circuits}
            hosts = range(r * d, (r + 1) * d)
            host_budget = {h: C for h in hosts}
            grants = {h: [] for h in hosts}
            # second hop of offloaded traffic goes first
            for p, s in circuits:
                buf = relay.get(p)
                port = self.uplinks[r][s]
                while buf and buf[0].size <= budget[s]:
                    pkt = buf.popleft()
                    budget[s] -= pkt.size
                    self.relay_bytes[r][p] -= pkt.size
                    pkt.peer = p
                    pkt.port = s
                    self.enqueue(port, pkt)
            for p, s in circuits:
                if backlog.get(p, 0) > 0:
                    assert sl.direct_switch(r, p) == s, f"slice {i}: rack {r} has no circuit to {p}"
                    budget[s] -= self.admit(hosts, p, budget[s], host_budget, p, s, grants)
            if self.p.vlb:
                self.offload(r, i, circuits, budget, hosts, host_budget, grants)
            for h in hosts:
                for pkt in grants[h]:
                    self.enqueue(self.nic[h], pkt)
        if self.outstanding > 0:
            self.push((i + 1) * self.slice_ns, _SLICE, i + 1, None)

    def offload(self, r, i, circuits, budget, hosts, host_budget, grants) -> None:
        C = self.credit
        excess = sorted(
            ((v - self.cycle_direct, q) for q, v in self.rack_backlog[r].items() if v > self.cycle_direct),
            key=lambda x: (-x[0], x[1]),
        )
        if not excess:
            return
        via = {p: s for p, s in circuits}
        for extra, q in excess:
            spare = {}
            for p, s in circuits:
                if p == q or budget[s] <= 0:
                    continue
                room = C - self.relay_bytes[p].get(q, 0)
                if room > 0:
                    spare[p] = min(budget[s], room)
            while extra > 0 and spare:
                try:
                    mid = vlb_intermediate(r, q, self.sched, i, spare, self.rng)
                except NoCandidateError:
                    break
                s = via[mid]
                used = self.admit(hosts, q, min(spare.pop(mid), extra), host_budget, mid, s, grants)
                if used:
                    budget[s] -= used
                    extra -= used
                    rb = self.relay_bytes[mid]
                    rb[q] = rb.get(q, 0) + used
                    self.counters["vlb_bytes"] += used

    def on_bulk_rto(self, f: _Flow) -> None:
        if f.done:
            return
        pending = f.rtx or f.next_new < f.npk
        if f.got_count == f.checked and not pending:
            self.counters["bulk_rto"] += 1
            for s in range(f.npk):
                if not f.got[s]:
                    f.rtx.append(s)
                    self.bulk_add(f, self.payload_of(f, s))
        f.checked = f.got_count
        self.push(self.now + int(self.p.bulk_rto_cycles * self.sched.cycle_time * NS), _BRTO, f, None)

    # -- main loop --------------------------------------------------------

    def run(self) -> None:
        heap = self.heap
        pop = heapq.heappop
        horizon = self.horizon
        n = 0
        while heap:
            t, _, kind, a, b = pop(heap)
            if t > horizon:
                break
            self.now = t
            n += 1
            if kind == _ARR_TOR:
                self.at_tor(a, b)
            elif kind == _FREE:
                a.busy = False
                self.kick(a)
            elif kind == _ARR_HOST:
                self.at_host(a, b)
            elif kind == _PACE:
                self.on_pace(a)
            elif kind == _SLICE:
                self.on_slice(a)
            elif kind == _FLOW:
                self.on_flow(a)
            elif kind == _RTO:
                self.on_rto(a)
            elif kind == _BRTO:
                self.on_bulk_rto(a)
            if self.outstanding == 0:
                break
        self.counters["events"] = n

    def report(self, trace: Sequence[FlowRecord]) -> MetricsReport:
        self.counters["incomplete"] = self.outstanding
        rep = report_metrics(
            trace,
            (Delivery(fid, t / NS, pay, hops) for fid, t, pay, hops in self.deliveries),
            completion=self.completion,
            bin_width=self.p.bin_width,
            counters=self.counters,
        )
        rep.tx_log = self.tx_log
        return rep


def run(
    network: OperaTopology | BaselineTopology,
    schedule: SliceSchedule | None = None,
    tables=None,
    trace: Sequence[FlowRecord] = (),
    params: SimParams | None = None,
    seed: int = 0,
) -> MetricsReport:
    """Simulate ``trace`` on ``network`` until every flow finishes or the horizon passes.

    ``tables`` may carry precomputed per-slice forwarding tables (a list with
    one entry per slice, each a list of per-rack tables); they are built on
    demand otherwise.
    """
    params = params or SimParams()
    eng = _Engine(network, schedule, tables, list(trace), params, seed)
    eng.run()
    return eng.report(trace)
