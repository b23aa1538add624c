from __future__ import annotations

from dataclasses import dataclass

from .base import Decision, Router, deliver, skip


@dataclass(frozen=True)
class SnwParams:
    copies: int = 8
    binary: bool = True
    acks: bool = False


def snw_decide(a, b, now: float, binary: bool = True, msgs=None) -> list[Decision]:
    """Spray while more than one copy is held, then wait for the destination."""
    out = []
    for m in msgs if msgs is not None else a.buffer:
        if b.holds(m.id):
            out.append(skip(m))
        elif m.dst == b.id:
            out.append(deliver(m))
        elif m.copies > 1:
            if binary:
                out.append(Decision(m.id, True, m.copies // 2, split=True))
            elif m.src == a.id:
                # source spray: hand out one copy at a time
                out.append(Decision(m.id, True, 1, split=True))
            else:
                out.append(skip(m))
        else:
            out.append(skip(m))
    return out


class SprayAndWaitRouter(Router):
    name = "snw"
    limits_copies = True

    def __init__(self, params: SnwParams = SnwParams()):
        self.params = params
        self.uses_acks = params.acks

    def initial_copies(self, node, now):
        return self.params.copies

    def decide(self, a, b, now):
        return snw_decide(a, b, now, self.params.binary, self.deliverable_first(a, b, now))

    def forwards(self, a, b, now):
        mine, rest = self.offerable(a, b, now)
        out = [deliver(m) for m in mine]
        binary = self.params.binary
        for m in rest:
            if m.copies > 1:
                if binary:
                    out.append(Decision(m.id, True, m.copies // 2, split=True))
                elif m.src == a.id:
                    out.append(Decision(m.id, True, 1, split=True))
        return out
