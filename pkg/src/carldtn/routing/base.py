from __future__ import annotations

from typing import TYPE_CHECKING, NamedTuple

from .message import Buffer, Message, fifo_victims

if TYPE_CHECKING:
    from ..node import NodeState


class Decision(NamedTuple):
    """What a sender wants to do with one buffered message for one peer.

    ``split``: send half the copies and keep the rest.  ``keep=False``: hand
    the message over and delete the local replica once the transfer completes.
    """

    msg_id: str
    forward: bool
    copies: int = 1
    keep: bool = True
    split: bool = False

    @property
    def action(self) -> str:
        return f"forward:{self.copies}" if self.forward else "skip"


def skip(msg: Message) -> Decision:
    return Decision(msg.id, False, 0)


def deliver(msg: Message) -> Decision:
    return Decision(msg.id, True, msg.copies, keep=False)


class Router:
    """Routing policy driven by the engine.  Subclasses override the hooks they need."""

    name = "base"
    uses_acks = False
    limits_copies = False

    def setup(self, sim) -> None:
        self.sim = sim

    def initial_copies(self, node: "NodeState", now: float) -> int:
        return 1

    def on_link_up(self, a: "NodeState", b: "NodeState", now: float) -> None:
        pass

    def on_link_down(self, a: "NodeState", b: "NodeState", now: float, session: float) -> None:
        pass

    def decide(self, a: "NodeState", b: "NodeState", now: float) -> list[Decision]:
        raise NotImplementedError

    def forwards(self, a: "NodeState", b: "NodeState", now: float) -> list[Decision]:
        """The forwarding subset of ``decide`` in the same order (no skip records)."""
        return [d for d in self.decide(a, b, now) if d.forward]

    def on_transfer_done(self, sender: "NodeState", receiver: "NodeState", msg: Message,
                         now: float, first: bool, link=None) -> None:
        pass

    def victims(self, node: "NodeState"):
        """Eviction order callable for ``buffer_admit``."""
        return fifo_victims

    def deliverable_first(self, a: "NodeState", b: "NodeState", now: float) -> list[Message]:
        msgs = [m for m in a.buffer.messages.values() if m.created_at + m.initial_ttl > now]
        bid = b.id
        return [m for m in msgs if m.dst == bid] + [m for m in msgs if m.dst != bid]

    def offerable(self, a: "NodeState", b: "NodeState", now: float):
        """Unexpired messages of ``a`` that ``b`` does not hold, split into
        ``(for b, for others)``, each in buffer order."""
        held, incoming, consumed, bid = b.buffer.messages, b.incoming, b.delivered, b.id
        mine, rest = [], []
        for m in a.buffer.messages.values():
            mid = m.id
            if (m.created_at + m.initial_ttl <= now or mid in held or mid in incoming
                    or mid in consumed):
                continue
            (mine if m.dst == bid else rest).append(m)
        return mine, rest
