"""Discrete-event engine: clock, event queue, links, transfers and workload.

Positions are sampled on the LinkCheck tick; link changes found there are
queued as LinkDown/LinkUp events at the same timestamp, so connections
settle before transfers, message creation and sweeps at that instant.
"""
from __future__ import annotations

import heapq
import random
from dataclasses import dataclass
from enum import IntEnum
from typing import Any, NamedTuple

import numpy as np

from .config import Scenario, validate
from .errors import InvalidScenario
from .links import Link, range_matrix, scan_links
from .metrics import MetricEvent, MetricsCollector, SimReport
from .mobility import Fleet, initial_state
from .node import NodeState
from .qlearn import QTable
from .routing import Router, make_router
from .routing.base import Decision
from .routing.message import Buffer, Message, buffer_admit


class EventKind(IntEnum):
    """Kinds in tiebreak order for events sharing a timestamp."""

    LINK_CHECK = 1
    LINK_DOWN = 2
    LINK_UP = 3
    TRANSFER_COMPLETE = 4
    MESSAGE_CREATE = 5
    TTL_SWEEP = 6
    REPORT_SAMPLE = 7


class Event(NamedTuple):
    """Heap entry; tuple order gives (time, kind rank, sequence) precedence."""

    time: float
    kind: EventKind
    seq: int
    payload: Any = None


class EventQueue:
    def __init__(self):
        self._heap: list[Event] = []
        self._seq = 0

    def push(self, time: float, kind: EventKind, payload: Any = None) -> None:
        heapq.heappush(self._heap, (time, kind, self._seq, payload))
        self._seq += 1

    def pop(self) -> Event:
        return Event(*heapq.heappop(self._heap))

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else float("inf")

    def __len__(self) -> int:
        return len(self._heap)


@dataclass
class SimClock:
    now: float = 0.0
    end: float = 0.0

    def advance(self, t: float) -> None:
        if t < self.now:
            raise RuntimeError(f"clock moved backwards: {t} < {self.now}")
        if t > self.end:
            raise RuntimeError(f"event at {t} beyond end {self.end}")
        self.now = t


@dataclass(slots=True)
class Transfer:
    sender: int
    receiver: int
    msg_id: str
    copies: int
    keep: bool
    split: bool
    size: int
    dst: int
    started: float
    link: Link
    cancelled: bool = False


class Contact(NamedTuple):
    """Scripted link change, replacing mobility-driven detection."""

    time: float
    a: int
    b: int
    up: bool


class ScriptedMessage(NamedTuple):
    time: float
    id: str
    src: int
    dst: int
    size: int
    ttl: float  # seconds


class DecisionRecord(NamedTuple):
    time: float
    sender: int
    receiver: int
    msg_id: str
    action: str


def _seeded(ss: np.random.SeedSequence) -> random.Random:
    return random.Random(int(ss.generate_state(2, dtype=np.uint64)[0]))


class Simulator:
    """One run of one scenario with one router.

    ``contacts`` and ``messages`` replace mobility and the random workload
    with fixed scripts; ``placements`` pins initial node positions.
    """

    def __init__(self, scenario: Scenario, router: Router | None = None, *, trace: bool = False,
                 contacts: list[Contact] | None = None,
                 messages: list[ScriptedMessage] | None = None,
                 placements: dict[int, tuple[float, float]] | None = None,
                 check_invariants: bool = False, record_popularity: bool = False):
        validate(scenario)
        self.scenario = scenario
        self.router = router if router is not None else make_router(scenario)
        self.clock = SimClock(0.0, float(scenario.duration))
        self.queue = EventQueue()
        self.metrics = MetricsCollector()
        self.trace = trace
        self.decision_log: list[DecisionRecord] = []
        self.check_invariants = check_invariants
        # (time, node id, popularity) per report sample when enabled
        self.record_popularity = record_popularity
        self.popularity_log: list[tuple[float, int, float]] = []

        ss = np.random.SeedSequence(scenario.seed)
        mob_ss, work_ss = ss.spawn(2)
        self.nodes: list[NodeState] = []
        n_total = scenario.n_total
        models, ranges, bws = [], [], []
        for gi, g in enumerate(scenario.groups):
            model = g.mobility_model(scenario.world)
            for _ in range(g.count):
                nid = len(self.nodes)
                self.nodes.append(NodeState(nid, gi, Buffer(g.buffer), scenario.energy_model(g),
                                            qtable=QTable(nid, n_total)))
                models.append(model)
                ranges.append(g.range)
                bws.append(g.bandwidth)
        self.n_total = len(self.nodes)
        self._bandwidth = bws
        self._range2 = range_matrix(np.array(ranges, dtype=float))

        self.contacts = sorted(contacts) if contacts is not None else None
        self.scripted_messages = messages
        self.fleet = None
        if self.contacts is None:
            rngs = [_seeded(s) for s in mob_ss.spawn(self.n_total)]
            placements = placements or {}
            states = [initial_state(m, r, 0.0, placements.get(i)) for i, (m, r)
                      in enumerate(zip(models, rngs))]
            self.fleet = Fleet(models, rngs, 0.0, states)
        self.work_rng = _seeded(work_ss)

        self.adjacency = np.zeros((self.n_total, self.n_total), dtype=bool)
        self.links: dict[tuple[int, int], Link] = {}
        self._msg_counter = 0
        # replica accounting per message id: budget, live copies, made, gone
        self.budget: dict[str, int] = {}
        self.live_copies: dict[str, int] = {}
        self.made: dict[str, int] = {}
        self.gone: dict[str, int] = {}
        self.violating: set[str] = set()
        self.router.setup(self)

    # ---- scheduling -------------------------------------------------------

    def _schedule_initial(self) -> None:
        s, q, end = self.scenario, self.queue, self.clock.end
        if self.contacts is None:
            q.push(0.0, EventKind.LINK_CHECK)
        else:
            for c in self.contacts:
                if c.time <= end:
                    q.push(c.time, EventKind.LINK_UP if c.up else EventKind.LINK_DOWN,
                           (min(c.a, c.b), max(c.a, c.b)))
        if self.scripted_messages is None:
            t = self._next_interval()
            if t <= end:
                q.push(t, EventKind.MESSAGE_CREATE)
        else:
            for m in self.scripted_messages:
                if m.time <= end:
                    q.push(m.time, EventKind.MESSAGE_CREATE, m)
        q.push(s.ttl_sweep_interval, EventKind.TTL_SWEEP)
        q.push(0.0, EventKind.REPORT_SAMPLE)

    def _next_interval(self) -> float:
        lo, hi = self.scenario.workload.interval
        return self.clock.now + self.work_rng.uniform(lo, hi)

    # ---- main loop --------------------------------------------------------

    def run(self) -> SimReport:
        self._schedule_initial()
        q, clock, end = self.queue, self.clock, self.clock.end
        handlers = {
            EventKind.LINK_CHECK: self._on_link_check,
            EventKind.LINK_DOWN: self._on_link_down,
            EventKind.LINK_UP: self._on_link_up,
            EventKind.TRANSFER_COMPLETE: self._on_transfer_complete,
            EventKind.MESSAGE_CREATE: self._on_message_create,
            EventKind.TTL_SWEEP: self._on_ttl_sweep,
            EventKind.REPORT_SAMPLE: self._on_report_sample,
        }
        heap, pop, check = q._heap, heapq.heappop, self.check_invariants
        while heap and heap[0][0] <= end:
            time, kind, _, payload = pop(heap)
            clock.advance(time)
            handlers[kind](payload)
            if check:
                self.assert_invariants()
        clock.now = end
        return self.metrics.finalize(end, self.scenario.name, self.router.name,
                                     self.scenario.seed, len(self.violating))

    def _record(self, kind: str, msg: Message | None = None, hops: int = 0) -> None:
        now = self.clock.now
        if msg is None:
            self.metrics.record(MetricEvent(kind, now))
        else:
            self.metrics.record(MetricEvent(kind, now, msg.id, msg.created_at, hops))

    # ---- links --------------------------------------------------------------

    def _on_link_check(self, _payload) -> None:
        now = self.clock.now
        pos = self.fleet.advance(now)
        changes = scan_links(pos, self._range2, self.adjacency)
        if len(changes):
            push = self.queue.push
            for a, b, up in changes.tolist():
                push(now, EventKind.LINK_UP if up else EventKind.LINK_DOWN, (a, b))
        nxt = now + self.scenario.link_check_interval
        if nxt <= self.clock.end:
            self.queue.push(nxt, EventKind.LINK_CHECK)

    def _on_link_up(self, pair) -> None:
        a_id, b_id = pair
        if pair in self.links:
            return
        now = self.clock.now
        link = Link(a_id, b_id, now, min(self._bandwidth[a_id], self._bandwidth[b_id]))
        self.links[pair] = link
        a, b = self.nodes[a_id], self.nodes[b_id]
        a.links[b_id] = link
        b.links[a_id] = link
        if self.router.uses_acks and len(a.acked) + len(b.acked):
            if len(a.acked) < len(b.acked):
                a, b = b, a  # fold the smaller set into the larger
            new_for_a = b.acked - a.acked
            a.acked |= new_for_a
            if len(b.acked) != len(a.acked):
                b.acked |= a.acked
            self._purge_acked(a)
            self._purge_acked(b)
            a, b = self.nodes[a_id], self.nodes[b_id]
        self.router.on_link_up(a, b, now)
        self._pump(link)

    def _on_link_down(self, pair) -> None:
        link = self.links.pop(pair, None)
        if link is None:
            return
        now = self.clock.now
        a, b = self.nodes[link.a], self.nodes[link.b]
        a.links.pop(link.b, None)
        b.links.pop(link.a, None)
        t = link.active
        if t is not None:
            t.cancelled = True
            link.active = None
            self._release(t)
            self._record("aborted")
        self.router.on_link_down(a, b, now, now - link.established_at)

    def _release(self, t: Transfer) -> None:
        s, r = self.nodes[t.sender], self.nodes[t.receiver]
        s.outbound.discard(t.msg_id)
        r.incoming.discard(t.msg_id)
        if r.id != t.dst:
            r.buffer.release(t.size)

    # ---- transfers ------------------------------------------------------------

    def _refill(self, link: Link) -> None:
        now = self.clock.now
        a, b = self.nodes[link.a], self.nodes[link.b]
        per_dir = []
        for s, r in ((a, b), (b, a)):
            if not (s.alive(now) and r.alive(now)):
                per_dir.append([])
                continue
            if self.trace:
                decisions = self.router.decide(s, r, now)
                self.decision_log.extend(DecisionRecord(now, s.id, r.id, d.msg_id, d.action)
                                         for d in decisions)
                decisions = [d for d in decisions if d.forward]
            else:
                decisions = self.router.forwards(s, r, now)
            per_dir.append([(s.id, r.id, d) for d in decisions])
        fa, fb = per_dir
        queue = []
        for i in range(max(len(fa), len(fb))):
            if i < len(fa):
                queue.append(fa[i])
            if i < len(fb):
                queue.append(fb[i])
        link.queue = queue
        link.dirty = False

    def _pump(self, link: Link) -> None:
        """Start the next valid queued transfer if the link is idle."""
        if link.active is not None:
            return
        if not link.queue and link.dirty:
            self._refill(link)
        while link.queue:
            s_id, r_id, dec = link.queue.pop(0)
            if self._try_start(link, s_id, r_id, dec):
                return
            if not link.queue and link.dirty:
                self._refill(link)

    def _try_start(self, link: Link, s_id: int, r_id: int, dec: Decision) -> bool:
        now = self.clock.now
        s, r = self.nodes[s_id], self.nodes[r_id]
        if not (s.alive(now) and r.alive(now)):
            return False
        mid = dec.msg_id
        msg = s.buffer.messages.get(mid)
        if msg is None or msg.initial_ttl - (now - msg.created_at) <= 0.0 or mid in s.outbound:
            return False
        if (mid in r.buffer.messages or mid in r.incoming or mid in r.delivered
                or (self.router.uses_acks and mid in r.acked)):
            return False
        if dec.split:
            copies = msg.copies // 2
            if copies < 1:
                return False
        elif not dec.keep:
            copies = msg.copies
        else:
            copies = dec.copies
        if r.id != msg.dst:
            rb = r.buffer
            if msg.size > rb.capacity - rb.occupancy - rb.reserved:
                adm = buffer_admit(rb, msg, now, self.router.victims(r), r.outbound)
                for victim in adm.evicted:
                    self._drop_replica(r, victim, "dropped")
                if not adm.admitted:
                    self._record("refused")
                    return False
                if adm.evicted:
                    self._mark_dirty(r, skip=link)
            rb.reserve(msg.size)
        s.outbound.add(msg.id)
        r.incoming.add(msg.id)
        t = Transfer(s_id, r_id, msg.id, copies, dec.keep, dec.split, msg.size, msg.dst, now,
                     link)
        link.active = t
        self.queue.push(now + msg.size / link.bandwidth, EventKind.TRANSFER_COMPLETE, t)
        return True

    def _on_transfer_complete(self, t: Transfer) -> None:
        if t.cancelled:
            return
        now = self.clock.now
        link = t.link
        link.active = None
        s, r = self.nodes[t.sender], self.nodes[t.receiver]
        msg = s.buffer.get(t.msg_id)
        self._release(t)
        e_s, e_r = s.energy, r.energy
        s.spent += t.size * e_s.tx_cost
        r.spent += t.size * e_r.rx_cost
        self._record("relayed")
        if r.id == msg.dst:
            first = msg.id not in r.delivered
            r.delivered.add(msg.id)
            self._record("delivered", msg, msg.hop_count + 1)
            if self.router.uses_acks:
                r.acked.add(msg.id)
                s.acked.add(msg.id)
            if t.keep and not t.split:
                pass  # sender keeps its replica (router asked to)
            else:
                self._remove_replica(s, msg.id, "delivered")
        else:
            first = True
            replica = msg.replica(t.copies, now)
            r.buffer.add(replica)
            self._add_replica(replica.id, t.copies)
            if t.split:
                msg.copies -= t.copies
                self.live_copies[msg.id] -= t.copies
            elif not t.keep:
                self._remove_replica(s, msg.id, "handover")
            self._check_budget(msg.id)
        self.router.on_transfer_done(s, r, msg, now, first, link)
        self._mark_dirty(s)
        self._mark_dirty(r)
        for node in (s, r):
            for l in list(node.links.values()):
                self._pump(l)

    def _mark_dirty(self, node: NodeState, skip: Link | None = None) -> None:
        for l in node.links.values():
            if l is not skip:
                l.dirty = True

    # ---- replica bookkeeping --------------------------------------------------

    def _add_replica(self, msg_id: str, copies: int) -> None:
        self.made[msg_id] = self.made.get(msg_id, 0) + 1
        self.live_copies[msg_id] = self.live_copies.get(msg_id, 0) + copies

    def _remove_replica(self, node: NodeState, msg_id: str, reason: str) -> Message:
        msg = node.buffer.remove(msg_id)
        self.gone[msg_id] = self.gone.get(msg_id, 0) + 1
        self.live_copies[msg_id] -= msg.copies
        return msg

    def _drop_replica(self, node: NodeState, msg: Message, kind: str) -> None:
        # buffer_admit already removed evicted messages from the buffer
        if msg.id in node.buffer:
            node.buffer.remove(msg.id)
        self.gone[msg.id] = self.gone.get(msg.id, 0) + 1
        self.live_copies[msg.id] -= msg.copies
        self._record(kind, msg)

    def _check_budget(self, msg_id: str) -> None:
        if self.router.limits_copies and self.live_copies[msg_id] > self.budget[msg_id]:
            self.violating.add(msg_id)

    def _purge_acked(self, node: NodeState) -> None:
        for m in node.buffer:
            if m.id in node.acked and m.id not in node.outbound:
                self._remove_replica(node, m.id, "acked")

    # ---- workload and housekeeping ----------------------------------------------

    def _on_message_create(self, scripted: ScriptedMessage | None) -> None:
        now = self.clock.now
        if scripted is None:
            w = self.scenario.workload
            lo, hi = w.host_range(self.n_total)
            src = self.work_rng.randint(lo, hi)
            dst = self.work_rng.randint(lo, hi - 1)
            if dst >= src:
                dst += 1
            size = self.work_rng.randint(*w.size)
            self._msg_counter += 1
            mid, ttl = f"M{self._msg_counter}", w.ttl * 60.0
            nxt = self._next_interval()
            if nxt <= self.clock.end:
                self.queue.push(nxt, EventKind.MESSAGE_CREATE)
        else:
            mid, src, dst, size, ttl = (scripted.id, scripted.src, scripted.dst,
                                        scripted.size, scripted.ttl)
        node = self.nodes[src]
        copies = self.router.initial_copies(node, now)
        msg = Message(mid, src, dst, size, now, ttl, 0, copies, 0.0, now)
        self._record("created", msg)
        self.budget[mid] = copies
        adm = buffer_admit(node.buffer, msg, now, self.router.victims(node), node.outbound)
        for victim in adm.evicted:
            self._drop_replica(node, victim, "dropped")
        if not adm.admitted:
            self._record("dropped", msg)
            return
        node.buffer.add(msg)
        self._add_replica(mid, copies)
        self._mark_dirty(node)
        for l in list(node.links.values()):
            self._pump(l)

    def _on_ttl_sweep(self, _payload) -> None:
        now = self.clock.now
        for node in self.nodes:
            for m in node.buffer:
                if m.created_at + m.initial_ttl <= now and m.id not in node.outbound:
                    self._remove_replica(node, m.id, "expired")
                    self._record("expired", m)
        # periodic re-consult: priorities and learned values drift with time
        for link in list(self.links.values()):
            link.dirty = True
            self._pump(link)
        nxt = now + self.scenario.ttl_sweep_interval
        if nxt <= self.clock.end:
            self.queue.push(nxt, EventKind.TTL_SWEEP)

    def _on_report_sample(self, _payload) -> None:
        now = self.clock.now
        occ = sum(n.buffer.occupancy / n.buffer.capacity for n in self.nodes) / self.n_total
        self.metrics.sample(now, occ, len(self.links))
        if self.record_popularity:
            self.popularity_log.extend(
                (now, n.id, n.social.popularity.peek(now, n.social.params)) for n in self.nodes)
        nxt = now + self.scenario.report_interval
        if nxt <= self.clock.end:
            self.queue.push(nxt, EventKind.REPORT_SAMPLE)

    # ---- checks -----------------------------------------------------------------

    def assert_invariants(self) -> None:
        """Conservation, buffer bounds and copy budgets; raises AssertionError."""
        held: dict[str, int] = {}
        for node in self.nodes:
            buf = node.buffer
            assert buf.occupancy == sum(m.size for m in buf.messages.values())
            assert buf.occupancy + buf.reserved <= buf.capacity
            for m in buf.messages.values():
                assert m.copies >= 1
                held[m.id] = held.get(m.id, 0) + 1
        for mid, made in self.made.items():
            assert made - self.gone.get(mid, 0) == held.get(mid, 0), mid
        if self.router.limits_copies:
            for mid, live in self.live_copies.items():
                assert live <= self.budget[mid], mid
        for (a, b), link in self.links.items():
            assert a < b and link.key == (a, b)


def contact_trace(scenario: Scenario,
                  placements: dict[int, tuple[float, float]] | None = None) -> list[Contact]:
    """Every link change mobility produces for ``scenario``, in engine order.

    Movement never depends on routing, so one trace can stand in for the
    mobility model in runs that differ only in router, buffers or TTL;
    replaying it through ``contacts=`` yields the same run as live detection.
    """
    from .routing import EpidemicRouter

    sim = Simulator(scenario, EpidemicRouter(), placements=placements)
    out: list[Contact] = []
    t, end, step = 0.0, sim.clock.end, scenario.link_check_interval
    while t <= end:
        changes = scan_links(sim.fleet.advance(t), sim._range2, sim.adjacency)
        out.extend(Contact(t, a, b, bool(up)) for a, b, up in changes.tolist())
        t = t + step
    return out


def run_simulation(scenario: Scenario, router: Router | None = None, **kwargs) -> SimReport:
    """Validate ``scenario``, run it to the end and return the report."""
    if not isinstance(scenario, Scenario):
        raise InvalidScenario("expected a Scenario")
    return Simulator(scenario, router, **kwargs).run()
