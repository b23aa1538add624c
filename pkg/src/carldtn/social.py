"""Encounter bookkeeping: ENS exchange, density, popularity, tie strength."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np
from numba import njit

from .errors import UnknownPeer


@dataclass(frozen=True)
class TieNorms:
    f_max: float = 20.0
    c_max: float = 2000.0
    tau: float = 2000.0


@dataclass(frozen=True)
class SocialParams:
    ens_window: float = 3600.0
    pop_window: float = 200.0
    pop_threshold: int = 50
    pop_alpha: float = 0.5
    tie: TieNorms = TieNorms()


@dataclass
class EnsEntry:
    peer: int
    last_meeting: float
    remaining_energy: float
    available_buffer: int
    total_connection_duration: float = 0.0
    encounter_count: int = 1


@dataclass
class EncounterSet:
    """Peers met within the retention ``window`` (older entries are pruned on read)."""

    owner: int
    window: float = 3600.0
    entries: dict[int, EnsEntry] = field(default_factory=dict)
    # array mirrors of the entries indexed by peer id, for vectorised reads
    _last: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False, compare=False)
    _count: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False, compare=False)
    _dur: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False, compare=False)

    # lower bound on every entry's last_meeting; lets prune skip full scans
    _oldest: float = field(default=-math.inf, repr=False, compare=False)

    def prune(self, now: float) -> None:
        horizon = now - self.window
        if horizon <= self._oldest:
            return
        stale = [p for p, e in self.entries.items() if e.last_meeting < horizon]
        for p in stale:
            del self.entries[p]
            self._count[p] = 0.0
        self._oldest = min((e.last_meeting for e in self.entries.values()), default=-math.inf)

    def sync(self, entry: EnsEntry) -> None:
        """Copy one entry into the array mirrors (after any change to it)."""
        p = entry.peer
        if p >= len(self._last):
            n = max(p + 1, 2 * len(self._last), 8)
            for name in ("_last", "_count", "_dur"):
                old = getattr(self, name)
                new = np.zeros(n)
                new[:len(old)] = old
                setattr(self, name, new)
        self._last[p] = entry.last_meeting
        self._oldest = min(self._oldest, entry.last_meeting)
        self._count[p] = entry.encounter_count
        self._dur[p] = entry.total_connection_duration

    def peers(self, now: float) -> set[int]:
        self.prune(now)
        return set(self.entries)

    def get(self, peer: int) -> EnsEntry | None:
        return self.entries.get(peer)

    def __contains__(self, peer: int) -> bool:
        return peer in self.entries

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class PopularityState:
    value: float = 0.0
    recent_count: int = 0
    window_start: float = 0.0

    def roll(self, now: float, params: SocialParams) -> None:
        """Close every tumbling window that ended at or before ``now``."""
        w = params.pop_window
        if now < self.window_start + w:
            return
        closed = int((now - self.window_start) // w)
        current = compute_popularity(self.recent_count, params.pop_threshold)
        self.value = update_popularity_ewma(self.value, current, params.pop_alpha)
        if closed > 1:
            # the remaining windows saw no encounters
            self.value *= (1.0 - params.pop_alpha) ** (closed - 1)
        self.recent_count = 0
        self.window_start += closed * w

    def record(self, now: float, params: SocialParams) -> None:
        self.roll(now, params)
        self.recent_count += 1

    def read(self, now: float, params: SocialParams) -> float:
        self.roll(now, params)
        return self.value

    def peek(self, now: float, params: SocialParams) -> float:
        """``read`` without rolling this state (for diagnostics)."""
        return replace(self).read(now, params)


@dataclass
class SocialState:
    """Per-node link-manager state."""

    owner: int
    params: SocialParams = SocialParams()
    ens: EncounterSet = None
    # peer -> (time received, peer ids that peer reported); density input only
    remote: dict[int, tuple[float, frozenset[int]]] = field(default_factory=dict)
    popularity: PopularityState = field(default_factory=PopularityState)

    def __post_init__(self):
        if self.ens is None:
            self.ens = EncounterSet(self.owner, self.params.ens_window)

    def remote_peers(self, now: float) -> set[int]:
        horizon = now - self.params.ens_window
        out: set[int] = set()
        for t, ids in self.remote.values():
            if t >= horizon:
                out |= ids
        return out


def compute_popularity(recent_count: int, threshold: int) -> float:
    return min(recent_count / threshold, 1.0)


def update_popularity_ewma(prev: float, current: float, alpha: float) -> float:
    return (1.0 - alpha) * prev + alpha * current


def compute_tie_strength(entry: EnsEntry | None, now: float, norm: TieNorms = TieNorms()) -> float:
    """Mean of normalised frequency, closeness and exponential recency."""
    if entry is None:
        return 0.0
    f = min(entry.encounter_count / norm.f_max, 1.0)
    c = min(entry.total_connection_duration / norm.c_max, 1.0)
    r = math.exp(-(now - entry.last_meeting) / norm.tau)
    return (f + c + r) / 3.0


@njit(cache=True)
def _tie_kernel(last, count, dur, peers, now, window, f_max, c_max, tau):
    out = np.zeros(peers.shape[0])
    n = last.shape[0]
    for i in range(peers.shape[0]):
        p = peers[i]
        if p < n and count[p] > 0 and last[p] >= now - window:
            f = min(count[p] / f_max, 1.0)
            c = min(dur[p] / c_max, 1.0)
            r = math.exp(-(now - last[p]) / tau)
            out[i] = (f + c + r) / 3.0
    return out


def tie_strengths(ens: EncounterSet, peers: np.ndarray, now: float,
                  norm: TieNorms = TieNorms()) -> np.ndarray:
    """``compute_tie_strength`` for many peers; peers outside the window read 0."""
    return _tie_kernel(ens._last, ens._count, ens._dur, np.asarray(peers, dtype=np.int64),
                       float(now), ens.window, norm.f_max, norm.c_max, norm.tau)


def estimate_density(peers_a: Iterable[int], peers_b: Iterable[int], n_total: int,
                     a: int | None = None, b: int | None = None) -> float:
    """Fraction of the ``n_total`` nodes present in the union of two encounter sets.

    The meeting nodes ``a`` and ``b`` count as part of the union.
    """
    if n_total <= 0:
        raise ValueError("n_total must be positive")
    union = set(peers_a) | set(peers_b)
    union.update(x for x in (a, b) if x is not None)
    return min(len(union) / n_total, 1.0)


def node_density(state: SocialState, now: float, n_total: int) -> float:
    """Density as seen by one node: its own ENS plus ENS sets received from peers."""
    return estimate_density(state.ens.peers(now), state.remote_peers(now), n_total, a=state.owner)


def _touch(state: SocialState, peer: int, now: float, energy: float, free_buffer: int) -> None:
    entry = state.ens.get(peer)
    if entry is None:
        entry = state.ens.entries[peer] = EnsEntry(peer, now, energy, free_buffer)
    else:
        entry.last_meeting = now
        entry.encounter_count += 1
        entry.remaining_energy = energy
        entry.available_buffer = free_buffer
    state.ens.sync(entry)


def exchange_ens(a: SocialState, b: SocialState, now: float,
                 a_context: tuple[float, int] = (1.0, 0),
                 b_context: tuple[float, int] = (1.0, 0)) -> tuple[SocialState, SocialState]:
    """Swap encounter sets at link-up and record the meeting on both sides.

    ``*_context`` is ``(remaining energy fraction, free buffer bytes)`` of
    that node at meeting time.
    """
    snap_a = frozenset(a.ens.peers(now))
    snap_b = frozenset(b.ens.peers(now))
    a.remote[b.owner] = (now, snap_b)
    b.remote[a.owner] = (now, snap_a)
    _touch(a, b.owner, now, *b_context)
    _touch(b, a.owner, now, *a_context)
    a.popularity.record(now, a.params)
    b.popularity.record(now, b.params)
    return a, b


def update_connection_duration(state: SocialState, peer: int, session_length: float) -> SocialState:
    entry = state.ens.get(peer)
    if entry is None:
        raise UnknownPeer(f"node {state.owner} has no ENS entry for {peer}")
    entry.total_connection_duration += max(session_length, 0.0)
    state.ens.sync(entry)
    return state
