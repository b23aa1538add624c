"""Per-node Q-tables: connect update, disconnect aging and merge on transfer.

Values are stored with the time they were last refreshed and aged lazily:
the value seen at ``now`` is ``value * beta ** ((now - last) / aging_unit)``.
Tables are dense ``(destination, next hop)`` matrices over node ids so that
a whole encounter's worth of updates is a handful of array operations.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import math

import numpy as np
from numba import njit


@dataclass(frozen=True)
class QParams:
    alpha: float = 0.3
    gamma: float = 0.9
    beta: float = 0.98
    aging_unit: float = 30.0

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1)")
        if self.aging_unit <= 0.0:
            raise ValueError("aging_unit must be positive")


@dataclass
class QCell:
    value: float = 0.0
    last_connection_change: float = 0.0

    def aged(self, now: float, p: QParams) -> float:
        k = (now - self.last_connection_change) / p.aging_unit
        if k <= 0.0 or self.value == 0.0:
            return self.value
        return self.value * p.beta ** k


def _aging(last: np.ndarray, now: float, p: QParams) -> np.ndarray:
    k = (now - last) / p.aging_unit
    return np.where(k > 0.0, p.beta ** np.maximum(k, 0.0), 1.0)


# Ranking key: log(value) - (last / unit) * log(beta).  The aged value at any
# instant is exp(key + (now / unit) * log(beta)), so comparing keys compares
# aged values without evaluating a power per cell.

@njit(cache=True)
def _key(v, last, log_beta, unit):
    if v <= 0.0:
        return -np.inf
    return math.log(v) - last / unit * log_beta


@njit(cache=True)
def _best_rows(val, last, known, key, dests, now, beta, unit):
    n = dests.shape[0]
    hops = np.full(n, -1, dtype=np.int64)
    best = np.zeros(n)
    for i in range(n):
        d = dests[i]
        top = -np.inf
        h_best = -1
        for h in range(val.shape[1]):
            if known[d, h] and (h_best < 0 or key[d, h] > top):
                top = key[d, h]
                h_best = h
        if h_best >= 0:
            hops[i] = h_best
            v = val[d, h_best]
            k = (now - last[d, h_best]) / unit
            if k > 0.0 and v != 0.0:
                v = v * beta ** k
            best[i] = v
    return hops, best


@njit(cache=True)
def _update_cells(val, last, known, key, dests, m, fuzz, max_q_m, reward, alpha, gamma, beta,
                  unit, now, owner):
    log_beta = math.log(beta)
    for i in range(dests.shape[0]):
        d = dests[i]
        if d == owner:
            continue
        old = 0.0
        if known[d, m]:
            old = val[d, m]
            k = (now - last[d, m]) / unit
            if k > 0.0 and old != 0.0:
                old = old * beta ** k
        new = min(alpha * (reward[i] + gamma * fuzz[i] * max_q_m[i]) + (1.0 - alpha) * old, 1.0)
        val[d, m] = new
        last[d, m] = now
        known[d, m] = True
        key[d, m] = _key(new, now, log_beta, unit)


@njit(cache=True)
def _set_cells(val, last, known, key, rows, col, values, now, log_beta, unit):
    for i in range(rows.shape[0]):
        r = rows[i]
        val[r, col] = values[i]
        last[r, col] = now
        known[r, col] = True
        key[r, col] = _key(values[i], now, log_beta, unit)


@njit(cache=True)
def _decay_column(val, last, known, key, col, now, beta, unit):
    log_beta = math.log(beta)
    for r in range(val.shape[0]):
        if known[r, col]:
            k = (now - last[r, col]) / unit
            if k > 0.0 and val[r, col] != 0.0:
                val[r, col] = val[r, col] * beta ** k
            if now > last[r, col]:
                last[r, col] = now
            key[r, col] = _key(val[r, col], last[r, col], log_beta, unit)


class QTable:
    """Q(destination, next hop) for one owner; absent cells read as 0."""

    def __init__(self, owner: int, size: int = 0, params: QParams | None = None):
        self.owner = owner
        self.params = params or QParams()
        n = max(size, owner + 1)
        self.val = np.zeros((n, n))
        self.last = np.zeros((n, n))
        self.known = np.zeros((n, n), dtype=bool)
        self.key = np.full((n, n), -np.inf)

    @property
    def size(self) -> int:
        return self.val.shape[0]

    def _ensure(self, k: int) -> None:
        n = self.size
        if k < n:
            return
        m = max(k + 1, 2 * n)
        for name in ("val", "last", "known", "key"):
            old = getattr(self, name)
            new = np.full((m, m), -np.inf) if name == "key" else np.zeros((m, m), dtype=old.dtype)
            new[:n, :n] = old
            setattr(self, name, new)

    def _use(self, p: QParams) -> None:
        """Rebuild ranking keys if queried with different aging parameters."""
        if p is self.params or (p.beta == self.params.beta
                                and p.aging_unit == self.params.aging_unit):
            return
        self.params = p
        lb = math.log(p.beta)
        with np.errstate(divide="ignore"):
            logv = np.where(self.val > 0.0, np.log(np.where(self.val > 0.0, self.val, 1.0)), -np.inf)
        self.key = logv - self.last / p.aging_unit * lb

    def _write(self, rows: np.ndarray, col: int, values: np.ndarray, now: float) -> None:
        p = self.params
        _set_cells(self.val, self.last, self.known, self.key, np.asarray(rows, dtype=np.int64),
                   col, np.asarray(values, dtype=float), float(now), math.log(p.beta),
                   p.aging_unit)

    def cell(self, dest: int, hop: int) -> QCell | None:
        if dest >= self.size or hop >= self.size or not self.known[dest, hop]:
            return None
        return QCell(float(self.val[dest, hop]), float(self.last[dest, hop]))

    def put(self, dest: int, hop: int, value: float, now: float) -> None:
        if dest == self.owner or hop == self.owner:
            return
        self._ensure(max(dest, hop))
        self._write(np.array([dest]), hop, np.array([float(value)]), now)

    def value(self, dest: int, hop: int, now: float, p: QParams) -> float:
        c = self.cell(dest, hop)
        return 0.0 if c is None else c.aged(now, p)

    def aged_rows(self, dests: np.ndarray, now: float, p: QParams) -> np.ndarray:
        """Aged values for the given destination rows; unknown cells are 0."""
        return self.val[dests] * _aging(self.last[dests], now, p)

    def best_many(self, dests: np.ndarray, now: float, p: QParams):
        """Per destination: ``(best hop or -1, best aged value or 0, any cell known)``.

        ``dests`` must be valid row indices (see ``_ensure``).
        """
        # strict ">" in the scan keeps the lowest id among equal values
        self._use(p)
        hops, best = _best_rows(self.val, self.last, self.known, self.key,
                                np.asarray(dests, dtype=np.int64), float(now), p.beta, p.aging_unit)
        return hops, best, hops >= 0

    def best(self, dest: int, now: float, p: QParams) -> tuple[int, float] | None:
        """Best ``(next hop, aged value)`` for ``dest`` over every known hop."""
        if dest >= self.size or not self.known[dest].any():
            return None
        hop, val, _ = self.best_many(np.array([dest]), now, p)
        return int(hop[0]), float(val[0])

    def best_value(self, dest: int, now: float, p: QParams) -> float:
        b = self.best(dest, now, p)
        return 0.0 if b is None else b[1]

    def destinations(self) -> list[int]:
        return np.flatnonzero(self.known.any(axis=1)).tolist()

    def rows(self, now: float, p: QParams):
        """Yield ``(dest, hop, aged value, age)`` in sorted order."""
        for d, h in zip(*np.nonzero(self.known)):
            d, h = int(d), int(h)
            c = self.cell(d, h)
            yield d, h, c.aged(now, p), now - c.last_connection_change

    def __eq__(self, other) -> bool:
        if not isinstance(other, QTable) or other.owner != self.owner:
            return NotImplemented
        n = max(self.size, other.size)
        self._ensure(n - 1)
        other._ensure(n - 1)
        return (np.array_equal(self.known, other.known)
                and np.array_equal(self.val[self.known], other.val[other.known])
                and np.array_equal(self.last[self.known], other.last[other.known]))

    __hash__ = None


def compute_reward(candidate: int, dest: int, candidate_peers: Iterable[int]) -> int:
    """1 when the candidate is the destination or has met it, else 0."""
    if candidate == dest:
        return 1
    return 1 if dest in candidate_peers else 0


def q_update_on_connect(table: QTable, dest: int, m: int, fuzz_topp: float, max_q_m: float,
                        reward: int, p: QParams, now: float = 0.0) -> QTable:
    """Q(d, m) <- alpha * (R + gamma * fuzz * maxQ_m(d)) + (1 - alpha) * Q(d, m), capped at 1."""
    if dest == table.owner or m == table.owner:
        return table
    old = table.value(dest, m, now, p)
    new = p.alpha * (reward + p.gamma * fuzz_topp * max_q_m) + (1.0 - p.alpha) * old
    table.put(dest, m, min(new, 1.0), now)
    return table


def q_update_many(table: QTable, dests: np.ndarray, m: int, fuzz_topp: np.ndarray,
                  max_q_m: np.ndarray, reward: np.ndarray, p: QParams, now: float) -> None:
    """``q_update_on_connect`` for many destinations through the same candidate."""
    dests = np.asarray(dests, dtype=np.int64)
    if m == table.owner or dests.size == 0:
        return
    table._ensure(max(int(dests.max()), m))
    table._use(p)
    _update_cells(table.val, table.last, table.known, table.key, dests, m,
                  np.asarray(fuzz_topp, dtype=float), np.asarray(max_q_m, dtype=float),
                  np.asarray(reward, dtype=float), p.alpha, p.gamma, p.beta, p.aging_unit,
                  float(now), table.owner)


def q_decay_on_disconnect(cell: QCell, now: float, p: QParams) -> QCell:
    return QCell(cell.aged(now, p), max(now, cell.last_connection_change))


def decay_hop(table: QTable, hop: int, now: float, p: QParams) -> None:
    """Materialise aging for every cell routed through ``hop`` (on link-down)."""
    if hop >= table.size:
        return
    table._use(p)
    _decay_column(table.val, table.last, table.known, table.key, hop, float(now), p.beta,
                  p.aging_unit)


def merge_q_tables(sender: QTable, receiver: QTable, now: float, p: QParams) -> tuple[QTable, QTable]:
    """Exchange best routes after a message transfer between the two owners.

    A destination known to one side only is adopted by the other with the
    donor as next hop.  When both know it, the side with the lower best
    value adopts the higher one, again via the donor.
    """
    n = max(sender.size, receiver.size, sender.owner + 1, receiver.owner + 1)
    sender._ensure(n - 1)
    receiver._ensure(n - 1)
    dests = np.arange(n)
    _, bs, has_s = sender.best_many(dests, now, p)
    _, br, has_r = receiver.best_many(dests, now, p)
    vs = np.where(has_s, bs, -1.0)
    vr = np.where(has_r, br, -1.0)
    to_s = np.flatnonzero((vs < vr) & (dests != sender.owner))
    to_r = np.flatnonzero((vr < vs) & (dests != receiver.owner))
    for table, rows, donor, vals in ((sender, to_s, receiver.owner, vr),
                                     (receiver, to_r, sender.owner, vs)):
        if rows.size:
            table._write(rows, donor, vals[rows], now)
    return sender, receiver


def best_next_hop(table: QTable, dest: int, candidates: Iterable[int], now: float,
                  p: QParams) -> tuple[int, float] | None:
    """Candidate with the highest aged Q-value toward ``dest``; ties go to the lowest id."""
    best: tuple[int, float] | None = None
    for c in sorted(candidates):
        cell = table.cell(dest, c)
        if cell is None:
            continue
        v = cell.aged(now, p)
        if best is None or v > best[1]:
            best = (c, v)
    return best
