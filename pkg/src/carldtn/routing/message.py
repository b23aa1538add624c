from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable


@dataclass
class Message:
    id: str
    src: int
    dst: int
    size: int
    created_at: float
    initial_ttl: float
    hop_count: int = 0
    copies: int = 1
    priority: float = 0.0
    received_at: float = 0.0

    def remaining_ttl(self, now: float) -> float:
        return self.initial_ttl - (now - self.created_at)

    def ttl_fraction(self, now: float) -> float:
        if self.initial_ttl <= 0:
            return 0.0
        return min(max(self.remaining_ttl(now) / self.initial_ttl, 0.0), 1.0)

    def expired(self, now: float) -> bool:
        return self.remaining_ttl(now) <= 0.0

    def replica(self, copies: int, now: float) -> "Message":
        """Copy handed to the next hop."""
        return Message(self.id, self.src, self.dst, self.size, self.created_at, self.initial_ttl,
                       self.hop_count + 1, copies, self.priority, now)


@dataclass
class Buffer:
    """Byte-bounded message store; insertion order is arrival order."""

    capacity: int
    messages: dict[str, Message] = field(default_factory=dict)
    occupancy: int = 0
    reserved: int = 0

    def __contains__(self, msg_id: str) -> bool:
        return msg_id in self.messages

    def __len__(self) -> int:
        return len(self.messages)

    def __iter__(self):
        return iter(list(self.messages.values()))

    def get(self, msg_id: str) -> Message | None:
        return self.messages.get(msg_id)

    @property
    def free(self) -> int:
        return self.capacity - self.occupancy - self.reserved

    @property
    def free_fraction(self) -> float:
        return max(self.free, 0) / self.capacity if self.capacity > 0 else 0.0

    def add(self, msg: Message) -> None:
        if msg.id in self.messages:
            raise ValueError(f"duplicate message {msg.id}")
        if msg.size > self.capacity - self.occupancy:
            raise ValueError(f"no room for {msg.id}")
        self.messages[msg.id] = msg
        self.occupancy += msg.size

    def remove(self, msg_id: str) -> Message:
        msg = self.messages.pop(msg_id)
        self.occupancy -= msg.size
        return msg

    def reserve(self, size: int) -> None:
        self.reserved += size

    def release(self, size: int) -> None:
        self.reserved -= size


@dataclass
class Admission:
    admitted: bool
    evicted: list[Message] = field(default_factory=list)


def buffer_admit(buf: Buffer, incoming: Message, now: float,
                 victims: Callable[[Buffer, float], Iterable[Message]] | None = None,
                 protected: set[str] | frozenset[str] = frozenset()) -> Admission:
    """Make room for ``incoming`` by evicting in the order ``victims`` yields.

    Nothing is evicted unless the evictions are enough to admit the message.
    Messages in ``protected`` (currently being sent) are never evicted.
    """
    if incoming.size > buf.capacity:
        return Admission(False)
    need = incoming.size - buf.free
    if need <= 0:
        return Admission(True)
    order = victims(buf, now) if victims is not None else fifo_victims(buf, now)
    chosen: list[Message] = []
    freed = 0
    for m in order:
        if m.id in protected:
            continue
        chosen.append(m)
        freed += m.size
        if freed >= need:
            break
    if freed < need:
        return Admission(False)
    for m in chosen:
        buf.remove(m.id)
    return Admission(True, chosen)


def fifo_victims(buf: Buffer, now: float) -> list[Message]:
    """Oldest arrival first (the buffer keeps arrival order)."""
    return list(buf.messages.values())
