"""PRoPHET: delivery predictability from encounter history and transitivity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Decision, Router, deliver, skip


@dataclass(frozen=True)
class ProphetParams:
    p_init: float = 0.75
    beta: float = 0.25
    gamma: float = 0.98
    aging_unit: float = 30.0
    acks: bool = False


class Predictability:
    """Delivery predictabilities of one owner toward every other node id."""

    def __init__(self, owner: int, size: int = 0):
        self.owner = owner
        self.p = np.zeros(max(size, owner + 1))
        self.last_aged = 0.0

    def _ensure(self, k: int) -> None:
        if k >= len(self.p):
            grown = np.zeros(k + 1)
            grown[:len(self.p)] = self.p
            self.p = grown

    def get(self, x: int) -> float:
        if x == self.owner:
            return 1.0
        return float(self.p[x]) if x < len(self.p) else 0.0

    def known(self) -> dict[int, float]:
        return {int(x): float(self.p[x]) for x in np.flatnonzero(self.p)}

    def age(self, now: float, params: ProphetParams) -> None:
        k = (now - self.last_aged) / params.aging_unit
        if k > 0:
            self.p *= params.gamma ** k
        self.last_aged = max(now, self.last_aged)


def prophet_meet(pa: Predictability, pb: Predictability, now: float, params: ProphetParams) -> None:
    """Age both tables, then direct and transitive updates on both sides."""
    pa.age(now, params)
    pb.age(now, params)
    a, b = pa.owner, pb.owner
    n = max(len(pa.p), len(pb.p), a + 1, b + 1)
    pa._ensure(n - 1)
    pb._ensure(n - 1)
    for mine, other in ((pa, b), (pb, a)):
        old = mine.p[other]
        mine.p[other] = old + (1.0 - old) * params.p_init
    snap_a, snap_b = pa.p.copy(), pb.p.copy()
    for mine, peer, peer_p in ((pa, b, snap_b), (pb, a, snap_a)):
        p_ab = mine.p[peer]
        gain = p_ab * peer_p * params.beta
        gain[mine.owner] = 0.0
        gain[peer] = 0.0
        mine.p += (1.0 - mine.p) * gain


def prophet_update_and_decide(a, b, pa: Predictability, pb: Predictability, now: float,
                              params: ProphetParams = ProphetParams(), msgs=None,
                              update: bool = True) -> list[Decision]:
    if update:
        prophet_meet(pa, pb, now, params)
    out = []
    for m in msgs if msgs is not None else a.buffer:
        if b.holds(m.id):
            out.append(skip(m))
        elif m.dst == b.id:
            out.append(deliver(m))
        elif pb.get(m.dst) > pa.get(m.dst):
            out.append(Decision(m.id, True, 1))
        else:
            out.append(skip(m))
    return out


class ProphetRouter(Router):
    name = "prophet"

    def __init__(self, params: ProphetParams = ProphetParams()):
        self.params = params
        self.uses_acks = params.acks
        self.tables: dict[int, Predictability] = {}

    def table(self, node_id: int) -> Predictability:
        t = self.tables.get(node_id)
        if t is None:
            size = self.sim.n_total if hasattr(self, "sim") else 0
            t = self.tables[node_id] = Predictability(node_id, size)
        return t

    def on_link_up(self, a, b, now):
        prophet_meet(self.table(a.id), self.table(b.id), now, self.params)

    def decide(self, a, b, now):
        pa, pb = self.table(a.id), self.table(b.id)
        pa.age(now, self.params)
        pb.age(now, self.params)
        return prophet_update_and_decide(a, b, pa, pb, now, self.params,
                                         self.deliverable_first(a, b, now), update=False)

    def forwards(self, a, b, now):
        pa, pb = self.table(a.id), self.table(b.id)
        pa.age(now, self.params)
        pb.age(now, self.params)
        mine, rest = self.offerable(a, b, now)
        out = [deliver(m) for m in mine]
        if rest:
            n = max(len(pa.p), len(pb.p), a.id + 1, b.id + 1)
            pa._ensure(n - 1)
            pb._ensure(n - 1)
            better = (pb.p > pa.p).tolist()
            better[a.id] = False  # pa reads 1 toward its own owner
            better[b.id] = True
            out.extend(Decision(m.id, True, 1) for m in rest if better[m.dst])
        return out
