from __future__ import annotations

from .base import Decision, Router


def epidemic_decide(a, b, now: float, msgs=None) -> list[Decision]:
    """Summary-vector exchange: offer every message the peer does not hold."""
    out = []
    held, incoming, consumed, bid = b.buffer.messages, b.incoming, b.delivered, b.id
    for m in msgs if msgs is not None else a.buffer:
        mid = m.id
        if mid in held or mid in incoming or mid in consumed:
            out.append(Decision(mid, False, 0))
        elif m.dst == bid:
            out.append(Decision(mid, True, m.copies, False))
        else:
            out.append(Decision(mid, True, 1))
    return out


class EpidemicRouter(Router):
    name = "epidemic"

    def __init__(self, acks: bool = False):
        self.uses_acks = acks

    def decide(self, a, b, now):
        return epidemic_decide(a, b, now, self.deliverable_first(a, b, now))

    def forwards(self, a, b, now):
        mine, rest = self.offerable(a, b, now)
        return ([Decision(m.id, True, m.copies, False) for m in mine]
                + [Decision(m.id, True, 1) for m in rest])
