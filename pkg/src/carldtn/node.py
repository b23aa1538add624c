from __future__ import annotations

from dataclasses import dataclass, field

from .qlearn import QTable
from .routing.message import Buffer
from .social import SocialParams, SocialState


@dataclass(frozen=True)
class EnergyModel:
    """Scalar battery with fixed drain rates (units, units/s, units/byte)."""

    initial: float = 10000.0
    idle_rate: float = 0.05
    tx_cost: float = 2e-6
    rx_cost: float = 1e-6


@dataclass
class NodeState:
    id: int
    group: int
    buffer: Buffer
    energy: EnergyModel = EnergyModel()
    spent: float = 0.0
    social: SocialState = None
    qtable: QTable = None
    # ids this node has received as final destination
    delivered: set[str] = field(default_factory=set)
    # delivery acknowledgements known to this node
    acked: set[str] = field(default_factory=set)
    outbound: set[str] = field(default_factory=set)
    incoming: set[str] = field(default_factory=set)
    links: dict[int, object] = field(default_factory=dict)

    def __post_init__(self):
        if self.social is None:
            self.social = SocialState(self.id, SocialParams())
        if self.qtable is None:
            self.qtable = QTable(self.id)

    def battery(self, now: float) -> float:
        e = self.energy
        if e.initial <= 0:
            return 0.0
        left = e.initial - e.idle_rate * now - self.spent
        return min(max(left / e.initial, 0.0), 1.0)

    def alive(self, now: float) -> bool:
        e = self.energy
        return e.initial > 0 and e.initial - e.idle_rate * now - self.spent > 0.0

    def holds(self, msg_id: str) -> bool:
        """True if the node has, is receiving, or already consumed ``msg_id``."""
        return msg_id in self.buffer or msg_id in self.incoming or msg_id in self.delivered
