from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit


class LinkEvent(NamedTuple):
    up: bool
    a: int
    b: int
    time: float


@dataclass
class Link:
    a: int
    b: int
    established_at: float
    bandwidth: float
    active: object = None  # the Transfer in flight, if any
    queue: list = field(default_factory=list)
    dirty: bool = True
    merged: bool = False
    turn: int = 0

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("a link needs two distinct nodes")
        if self.a > self.b:
            self.a, self.b = self.b, self.a

    @property
    def key(self) -> tuple[int, int]:
        return (self.a, self.b)

    def other(self, node: int) -> int:
        return self.b if node == self.a else self.a


def range_matrix(ranges: np.ndarray) -> np.ndarray:
    """Squared pairwise radio range: a pair connects within the shorter of its two radios."""
    r = np.minimum.outer(ranges, ranges)
    return r * r


def in_range(positions: np.ndarray, range2: np.ndarray | float) -> np.ndarray:
    """Boolean upper-triangular adjacency; distance equal to range counts as connected."""
    diff = positions[:, None, :] - positions[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    return np.triu(d2 <= range2, k=1)


def detect_link_events(positions: np.ndarray, radio_range, live: np.ndarray, now: float
                       ) -> tuple[list[LinkEvent], np.ndarray]:
    """Compare connectivity at ``now`` with ``live``; return events and the new adjacency.

    ``radio_range`` is a scalar range in metres or a precomputed squared-range
    matrix.  LinkDown events come first, then LinkUp, each in ``(a, b)`` order.
    """
    if np.isscalar(radio_range):
        range2 = float(radio_range) ** 2
    else:
        range2 = radio_range
    adj = in_range(positions, range2)
    changed = adj != live
    if not changed.any():
        return [], adj
    ia, ib = np.nonzero(changed)
    downs, ups = [], []
    for a, b in zip(ia.tolist(), ib.tolist()):
        if adj[a, b]:
            ups.append(LinkEvent(True, a, b, now))
        else:
            downs.append(LinkEvent(False, a, b, now))
    return downs + ups, adj


@njit(cache=True)
def scan_links(pos, range2, adj):
    """Update the upper-triangular adjacency ``adj`` in place from positions.

    Returns an ``(k, 3)`` array of ``(a, b, up)`` rows: downs first, then ups,
    each in ``(a, b)`` order.
    """
    n = pos.shape[0]
    downs = []
    ups = []
    for a in range(n):
        xa = pos[a, 0]
        ya = pos[a, 1]
        for b in range(a + 1, n):
            dx = xa - pos[b, 0]
            dy = ya - pos[b, 1]
            now_up = dx * dx + dy * dy <= range2[a, b]
            if now_up != adj[a, b]:
                adj[a, b] = now_up
                if now_up:
                    ups.append((a, b))
                else:
                    downs.append((a, b))
    out = np.empty((len(downs) + len(ups), 3), dtype=np.int64)
    i = 0
    for a, b in downs:
        out[i, 0] = a
        out[i, 1] = b
        out[i, 2] = 0
        i += 1
    for a, b in ups:
        out[i, 0] = a
        out[i, 1] = b
        out[i, 2] = 1
        i += 1
    return out
