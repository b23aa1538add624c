"""Context-adaptive Q-learning router with density-bounded replication."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from numba import njit

from ..fuzzy import (FLC1, FLC2, FLC3, FLC4, NORMAL_PRIORITY, DegenerateSet, flc1_kernel,
                     flc2_kernel, flc3_kernel, flc4_kernel)
from ..qlearn import QParams, _best_rows, _update_cells, decay_hop, merge_q_tables
from ..social import (SocialParams, _tie_kernel, exchange_ens, node_density, tie_strengths,
                      update_connection_duration)
from .base import Decision, Router, deliver, skip
from .message import Message


@dataclass(frozen=True)
class CarlParams:
    l_max: int = 8
    hop_cap: int = 10
    priority_threshold: float = NORMAL_PRIORITY
    q: QParams = QParams()
    social: SocialParams = SocialParams()
    acks: bool = True


def initial_copy_budget(density: float, l_max: int) -> int:
    """``ceil(density * l_max)`` clamped to ``[1, l_max]``."""
    raw = math.ceil(density * l_max - 1e-9)
    return min(max(raw, 1), l_max)


def message_priorities(msgs: list[Message], now: float, hop_cap: int) -> np.ndarray:
    if not msgs:
        return np.zeros(0)
    ttl = np.array([m.ttl_fraction(now) for m in msgs])
    hops = np.minimum(np.array([m.hop_count for m in msgs], dtype=float) / hop_cap, 1.0)
    return FLC3.crisp_batch(ttl, hops)


def social_values(node, dests, now: float, params: CarlParams) -> np.ndarray:
    """FLC2 output of ``node`` about itself toward each destination."""
    dests = np.asarray(dests, dtype=np.int64)
    if dests.size == 0:
        return np.zeros(0)
    pop = node.social.popularity.read(now, params.social)
    ties = tie_strengths(node.social.ens, dests, now, params.social.tie)
    return FLC2.crisp_batch(np.full(len(dests), pop), ties)


def transfer_opportunity(m, dests, now: float, params: CarlParams) -> np.ndarray:
    """FLC4 of candidate ``m`` for each destination (FLC1 ability x FLC2 social)."""
    dests = np.asarray(dests, dtype=np.int64)
    if dests.size == 0:
        return np.zeros(0)
    ability = FLC1.crisp(m.buffer.free_fraction, m.battery(now))
    pop = m.social.popularity.read(now, params.social)
    ties = tie_strengths(m.social.ens, dests, now, params.social.tie)
    ties[dests == m.id] = 1.0
    social = FLC2.crisp_batch(np.full(len(dests), pop), ties)
    return FLC4.crisp_batch(np.full(len(dests), ability), social)


@njit(cache=True)
def _decide_scores(dsts, created, ttl, hops, hop_cap, a_pop, a_last, a_count, a_dur, b_pop, b_last, b_count, b_dur,
                   aq_val, aq_last, aq_known, aq_key, bq_val, bq_last, bq_known, bq_key,
                   now, window, f_max, c_max, tau, beta, unit):
    n = dsts.shape[0]
    frac = np.empty(n)
    for i in range(n):
        if ttl[i] <= 0:
            frac[i] = 0.0
        else:
            frac[i] = min(max((ttl[i] - (now - created[i])) / ttl[i], 0.0), 1.0)
    prio = flc3_kernel(frac, np.minimum(hops / hop_cap, 1.0))
    ta = _tie_kernel(a_last, a_count, a_dur, dsts, now, window, f_max, c_max, tau)
    tb = _tie_kernel(b_last, b_count, b_dur, dsts, now, window, f_max, c_max, tau)
    sa = flc2_kernel(np.full(n, a_pop), ta)
    sb = flc2_kernel(np.full(n, b_pop), tb)
    _, qa = _best_rows(aq_val, aq_last, aq_known, aq_key, dsts, now, beta, unit)
    _, qb = _best_rows(bq_val, bq_last, bq_known, bq_key, dsts, now, beta, unit)
    return prio, sa, sb, qa, qb


def _q_args(t):
    return t.val, t.last, t.known, t.key


def _ens_args(node):
    e = node.social.ens
    return e._last, e._count, e._dur


def carl_on_link_up(a, b, now: float, params: CarlParams = CarlParams()) -> list[Decision]:
    """Forward/skip decision for every message in ``a``'s buffer toward peer ``b``.

    The list is in descending order of recomputed message priority.
    """
    msgs = [m for m in a.buffer if m.created_at + m.initial_ttl - now > 0.0]
    return _carl_decisions(a, b, msgs, now, params, False)


def carl_forwards(a, b, now: float, params: CarlParams = CarlParams()) -> list[Decision]:
    """The forwarding subset of ``carl_on_link_up``, same order."""
    held, incoming, consumed, acked = b.buffer.messages, b.incoming, b.delivered, b.acked
    msgs = [m for m in a.buffer.messages.values()
            if m.created_at + m.initial_ttl > now and m.id not in held
            and m.id not in incoming and m.id not in consumed and m.id not in acked]
    return _carl_decisions(a, b, msgs, now, params, True)


def _carl_decisions(a, b, msgs, now, params, forward_only):
    if not msgs:
        return []
    dsts = np.array([m.dst for m in msgs], dtype=np.int64)
    top = max(int(dsts.max()), a.id, b.id)
    sp, qp = params.social, params.q
    for t in (a.qtable, b.qtable):
        t._ensure(top)
        t._use(qp)
    prio, sa, sb, qa, qb = (x.tolist() for x in _decide_scores(
        dsts, np.array([m.created_at for m in msgs]), np.array([m.initial_ttl for m in msgs]),
        np.array([m.hop_count for m in msgs], dtype=float), float(params.hop_cap), a.social.popularity.read(now, sp), *_ens_args(a),
        b.social.popularity.read(now, sp), *_ens_args(b),
        *_q_args(a.qtable), *_q_args(b.qtable),
        float(now), a.social.ens.window, sp.tie.f_max, sp.tie.c_max, sp.tie.tau,
        qp.beta, qp.aging_unit))
    if any(p != p for p in prio):
        raise DegenerateSet("FLC3: no rule fired for some input")
    for m, p in zip(msgs, prio):
        m.priority = p
    order = sorted(range(len(msgs)), key=lambda i: -prio[i])
    # centroid sums carry ~1e-16 rounding; a priority exactly on the threshold passes
    thr = params.priority_threshold - 1e-9
    out = []
    no = None if forward_only else skip
    for i in order:
        m = msgs[i]
        if not forward_only and (b.holds(m.id) or m.id in b.acked):
            d = skip(m)
        elif m.dst == b.id:
            d = deliver(m)
        elif prio[i] < thr:
            d = no and no(m)
        elif m.copies > 1:
            if sb[i] > sa[i] or qb[i] > qa[i]:
                d = Decision(m.id, True, m.copies // 2, split=True)
            else:
                d = no and no(m)
        elif sb[i] > sa[i] and qb[i] > qa[i]:
            d = Decision(m.id, True, 1, keep=False)
        else:
            d = no and no(m)
        if d is not None:
            out.append(d)
    return out


@njit(cache=True)
def _learn_kernel(c_owner, m_id, extra, n_total, buf_free, battery, pop,
                  e_last, e_count, e_dur, now, window, f_max, c_max, tau,
                  mq_val, mq_last, mq_known, mq_key, cq_val, cq_last, cq_known, cq_key,
                  alpha, gamma, beta, unit):
    mask = np.zeros(n_total, dtype=np.bool_)
    met = np.zeros(n_total, dtype=np.bool_)
    for p in range(min(e_last.shape[0], n_total)):
        if e_count[p] > 0 and e_last[p] >= now - window:
            met[p] = True
            mask[p] = True
    mask[m_id] = True
    for x in extra:
        mask[x] = True
    mask[c_owner] = False
    dests = np.flatnonzero(mask)
    n = dests.shape[0]
    if n == 0:
        return dests
    ties = _tie_kernel(e_last, e_count, e_dur, dests, now, window, f_max, c_max, tau)
    reward = np.zeros(n)
    for i in range(n):
        d = dests[i]
        if d == m_id:
            ties[i] = 1.0
            reward[i] = 1.0
        elif met[d]:
            reward[i] = 1.0
    ability = flc1_kernel(np.array([buf_free]), np.array([battery]))[0]
    social = flc2_kernel(np.full(n, pop), ties)
    fuzz = flc4_kernel(np.full(n, ability), social)
    _, max_q_m = _best_rows(mq_val, mq_last, mq_known, mq_key, dests, now, beta, unit)
    _update_cells(cq_val, cq_last, cq_known, cq_key, dests, m_id, fuzz, max_q_m, reward,
                  alpha, gamma, beta, unit, now, c_owner)
    return dests


def carl_learn(c, m, now: float, params: CarlParams, n_total: int) -> np.ndarray:
    """Connection-up update of ``c``'s Q-values through candidate ``m``.

    Destinations: ``m`` itself, every peer in ``m``'s encounter set and the
    destinations of messages ``c`` carries.  Returns the destinations updated.
    """
    extra = np.array(sorted({msg.dst for msg in c.buffer}), dtype=np.int64)
    n = max(n_total, c.id + 1, m.id + 1, int(extra.max()) + 1 if extra.size else 0)
    sp, qp = params.social, params.q
    for t in (c.qtable, m.qtable):
        t._ensure(n - 1)
        t._use(qp)
    ens = m.social.ens
    return _learn_kernel(
        c.id, m.id, extra, n, m.buffer.free_fraction, m.battery(now),
        m.social.popularity.read(now, sp), ens._last, ens._count, ens._dur,
        float(now), ens.window, sp.tie.f_max, sp.tie.c_max, sp.tie.tau,
        *_q_args(m.qtable), *_q_args(c.qtable),
        qp.alpha, qp.gamma, qp.beta, qp.aging_unit)


def priority_victims(hop_cap: int, acked=frozenset()):
    """Eviction order: acknowledged messages, then highest recomputed priority first."""
    def order(buf, now):
        msgs = list(buf)
        prio = message_priorities(msgs, now, hop_cap)
        idx = sorted(range(len(msgs)), key=lambda i: (msgs[i].id not in acked, -prio[i]))
        return [msgs[i] for i in idx]
    return order


class CarlRouter(Router):
    name = "carl"
    limits_copies = True

    def __init__(self, params: CarlParams = CarlParams()):
        self.params = params
        self.uses_acks = params.acks

    def setup(self, sim):
        super().setup(sim)
        for node in sim.nodes:
            node.social.params = self.params.social
            node.social.ens.window = self.params.social.ens_window

    def initial_copies(self, node, now):
        density = node_density(node.social, now, self.sim.n_total)
        return initial_copy_budget(density, self.params.l_max)

    def on_link_up(self, a, b, now):
        exchange_ens(a.social, b.social, now,
                     (a.battery(now), a.buffer.free), (b.battery(now), b.buffer.free))
        self._learn(a, b, now)
        self._learn(b, a, now)

    def _learn(self, c, m, now):
        carl_learn(c, m, now, self.params, self.sim.n_total)

    def on_link_down(self, a, b, now, session):
        for x, y in ((a, b), (b, a)):
            if y.id in x.social.ens:
                update_connection_duration(x.social, y.id, session)
            decay_hop(x.qtable, y.id, now, self.params.q)

    def decide(self, a, b, now):
        return carl_on_link_up(a, b, now, self.params)

    def forwards(self, a, b, now):
        return carl_forwards(a, b, now, self.params)

    def on_transfer_done(self, sender, receiver, msg, now, first, link=None):
        if not first:
            return
        if link is not None:
            if link.merged:
                return
            link.merged = True
        merge_q_tables(sender.qtable, receiver.qtable, now, self.params.q)

    def victims(self, node):
        return priority_victims(self.params.hop_cap, node.acked)
