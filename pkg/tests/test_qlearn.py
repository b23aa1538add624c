import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from carldtn.qlearn import (QCell, QParams, QTable, best_next_hop, compute_reward, decay_hop,
                            merge_q_tables, q_decay_on_disconnect, q_update_many,
                            q_update_on_connect)

import oracles

P = QParams(alpha=0.3, gamma=0.9, beta=0.98, aging_unit=30.0)


# ---- reward -------------------------------------------------------------------------


def test_reward_is_one_for_the_destination():
    assert compute_reward(5, 5, set()) == 1


def test_reward_is_zero_without_contact():
    assert compute_reward(4, 5, {1, 2}) == 0


def test_reward_is_one_when_destination_was_met():
    assert compute_reward(4, 5, {1, 5}) == 1


# ---- connect update ------------------------------------------------------------------


def test_update_from_zero():
    t = QTable(0, 4)
    q_update_on_connect(t, 3, 1, 0.8, 0.0, 1, P, now=0.0)
    assert t.value(3, 1, 0.0, P) == pytest.approx(0.3, abs=1e-12)


def test_update_from_point_three():
    t = QTable(0, 4)
    t.put(3, 1, 0.3, 0.0)
    q_update_on_connect(t, 3, 1, 0.8, 0.3, 1, P, now=0.0)
    assert t.value(3, 1, 0.0, P) == pytest.approx(0.3 * (1 + 0.216) + 0.7 * 0.3, abs=1e-12)
    assert t.value(3, 1, 0.0, P) == pytest.approx(0.5748, abs=1e-12)


@given(q=st.floats(0, 1), max_q=st.floats(0, 1))
def test_zero_drive_contracts_by_one_minus_alpha(q, max_q):
    t = QTable(0, 4)
    t.put(3, 1, q, 0.0)
    q_update_on_connect(t, 3, 1, 0.0, max_q, 0, P, now=0.0)
    assert t.value(3, 1, 0.0, P) == pytest.approx(0.7 * q, abs=1e-15)


def test_update_stamps_refresh_time():
    t = QTable(0, 4)
    q_update_on_connect(t, 3, 1, 0.5, 0.5, 1, P, now=42.0)
    assert t.cell(3, 1).last_connection_change == 42.0


def test_no_cell_for_own_destination_or_hop():
    t = QTable(2, 4)
    q_update_on_connect(t, 2, 1, 1.0, 1.0, 1, P)
    q_update_on_connect(t, 1, 2, 1.0, 1.0, 1, P)
    assert t.destinations() == []


@pytest.mark.parametrize("reward,fuzz,max_q", [(1, 0.8, 0.3), (0, 0.5, 0.9), (1, 1.0, 1.0),
                                                (1, 0.0, 0.0)])
def test_fixed_point_convergence(reward, fuzz, max_q):
    t = QTable(0, 4)
    for _ in range(100):
        q_update_on_connect(t, 3, 1, fuzz, max_q, reward, P, now=0.0)
    target = min(reward + P.gamma * fuzz * max_q, 1.0)
    assert abs(t.value(3, 1, 0.0, P) - target) < 1e-6


def test_batched_update_equals_scalar_updates():
    rng = np.random.default_rng(3)
    a, b = QTable(0, 8), QTable(0, 8)
    for step in range(50):
        now = float(step * 7)
        dests = np.array(sorted(rng.choice(np.arange(1, 8), 3, replace=False)))
        m = int(rng.integers(1, 8))
        fuzz, mq = rng.random(3), rng.random(3)
        rew = rng.integers(0, 2, 3).astype(float)
        q_update_many(a, dests, m, fuzz, mq, rew, P, now)
        for i, d in enumerate(dests):
            q_update_on_connect(b, int(d), m, fuzz[i], mq[i], int(rew[i]), P, now)
    for d in range(8):
        for h in range(8):
            assert a.value(d, h, 400.0, P) == pytest.approx(b.value(d, h, 400.0, P), abs=1e-12)


# ---- aging -------------------------------------------------------------------------------


def test_no_elapsed_time_no_aging():
    assert QCell(0.5, 10.0).aged(10.0, P) == 0.5


def test_aging_ten_units():
    cell = q_decay_on_disconnect(QCell(0.5, 0.0), 300.0, P)
    assert cell.value == pytest.approx(0.5 * 0.98 ** 10, abs=1e-12)
    assert cell.value == pytest.approx(0.40854, abs=1e-5)
    assert cell.last_connection_change == 300.0


@given(k=st.floats(0, 1e4))
def test_zero_stays_zero(k):
    assert QCell(0.0, 0.0).aged(k, P) == 0.0


@given(v=st.floats(0, 1), t1=st.floats(0, 1e4), t2=st.floats(0, 1e4))
def test_aging_is_nonincreasing(v, t1, t2):
    lo, hi = sorted((t1, t2))
    c = QCell(v, 0.0)
    assert c.aged(hi, P) <= c.aged(lo, P) + 1e-15


def test_lazy_and_materialised_aging_agree():
    t = QTable(0, 4)
    t.put(3, 1, 0.6, 0.0)
    t.put(2, 1, 0.2, 0.0)
    before = t.value(3, 1, 90.0, P)
    decay_hop(t, 1, 90.0, P)
    assert t.cell(3, 1).last_connection_change == 90.0
    assert t.value(3, 1, 90.0, P) == pytest.approx(before, abs=1e-15)
    assert t.value(3, 1, 150.0, P) == pytest.approx(0.6 * 0.98 ** 5, abs=1e-12)


# ---- merge ----------------------------------------------------------------------------


def _table(owner, cells, now=0.0):
    t = QTable(owner, 6)
    for (d, h), v in cells.items():
        t.put(d, h, v, now)
    return t


def test_merge_adopts_unknown_destination():
    s = _table(0, {})
    r = _table(1, {(4, 2): 0.6})
    merge_q_tables(s, r, 0.0, P)
    assert s.best(4, 0.0, P) == (1, pytest.approx(0.6))


def test_merge_both_keep_higher_value():
    s = _table(0, {(4, 2): 0.3})
    r = _table(1, {(4, 3): 0.7})
    merge_q_tables(s, r, 0.0, P)
    assert s.best(4, 0.0, P) == (1, pytest.approx(0.7))
    assert r.best(4, 0.0, P) == (3, pytest.approx(0.7))


def test_merge_identical_tables_is_noop():
    cells = {(4, 2): 0.3, (5, 3): 0.5}
    s, r = _table(0, cells), _table(1, cells)
    s0, r0 = _table(0, cells), _table(1, cells)
    merge_q_tables(s, r, 0.0, P)
    assert s == s0 and r == r0


def test_merged_entry_is_stamped_now():
    s = _table(0, {})
    r = _table(1, {(4, 2): 0.6}, now=0.0)
    merge_q_tables(s, r, 60.0, P)
    cell = s.cell(4, 1)
    assert cell.last_connection_change == 60.0
    assert cell.value == pytest.approx(0.6 * 0.98 ** 2)


# ---- next-hop selection ------------------------------------------------------------------


def test_single_candidate():
    t = _table(0, {(4, 2): 0.1})
    assert best_next_hop(t, 4, {2}, 0.0, P) == (2, pytest.approx(0.1))


def test_argmax_candidate():
    t = _table(0, {(4, 2): 0.4, (4, 3): 0.9})
    assert best_next_hop(t, 4, {2, 3}, 0.0, P)[0] == 3


def test_equal_values_pick_lowest_id():
    t = _table(0, {(4, 5): 0.4, (4, 2): 0.4, (4, 3): 0.4})
    assert best_next_hop(t, 4, {5, 3, 2}, 0.0, P)[0] == 2


def test_no_cell_no_hop():
    assert best_next_hop(_table(0, {}), 4, {1, 2}, 0.0, P) is None


# ---- properties against the scalar oracle ---------------------------------------------------

N = 5
node = st.integers(0, N - 1)
op = st.one_of(
    st.tuples(st.just("update"), st.integers(0, 1), node, node, st.floats(0, 1),
              st.integers(0, 1), st.floats(0, 60)),
    st.tuples(st.just("decay"), st.integers(0, 1), node, st.floats(0, 60)),
    st.tuples(st.just("merge"), st.floats(0, 60)),
)


@given(ops=st.lists(op, max_size=40))
def test_tables_track_scalar_oracle_and_stay_bounded(ops):
    owners = (0, 1)
    ours = [QTable(o, N, P) for o in owners]
    ref = [oracles.DictQ(o) for o in owners]
    now = 0.0
    for o in ops:
        now += o[-1]
        if o[0] == "update":
            _, i, d, m, fuzz, rew, _ = o
            other = ref[1 - i]
            max_q = other.best(d, now)[1] if other.best(d, now) else 0.0
            q_update_on_connect(ours[i], d, m, fuzz, max_q, rew, P, now)
            ref[i].update(d, m, fuzz, max_q, rew, now)
        elif o[0] == "decay":
            _, i, h, _ = o
            decay_hop(ours[i], h, now, P)
            ref[i].decay_hop(h, now)
        else:
            merge_q_tables(ours[0], ours[1], now, P)
            oracles.dict_merge(ref[0], ref[1], now)
        for t, r in zip(ours, ref):
            assert (t.val >= 0).all() and (t.val <= 1).all()
            for d in range(N):
                best = r.best(d, now)
                got = t.best(d, now, P)
                if best is None:
                    assert got is None
                else:
                    assert got[1] == pytest.approx(best[1], rel=1e-9, abs=1e-12)
                for h in range(N):
                    assert t.value(d, h, now, P) == pytest.approx(r.aged(d, h, now),
                                                                 rel=1e-9, abs=1e-12)


@given(a=st.dictionaries(st.tuples(st.integers(2, 5), st.integers(2, 5)), st.floats(0, 1),
                         max_size=8),
       b=st.dictionaries(st.tuples(st.integers(2, 5), st.integers(2, 5)), st.floats(0, 1),
                         max_size=8))
def test_merge_is_commutative_on_best_values(a, b):
    s1, r1 = _table(0, a), _table(1, b)
    s2, r2 = _table(0, a), _table(1, b)
    merge_q_tables(s1, r1, 10.0, P)
    merge_q_tables(r2, s2, 10.0, P)
    for d in range(6):
        for x, y in ((s1, s2), (r1, r2)):
            assert x.best_value(d, 10.0, P) == pytest.approx(y.best_value(d, 10.0, P))


@given(vals=st.lists(st.floats(0, 1), min_size=1, max_size=5),
       ages=st.lists(st.floats(0, 3000), min_size=5, max_size=5))
def test_ranked_best_equals_exhaustive_scan(vals, ages):
    t = QTable(0, 6)
    for h, v in enumerate(vals, start=1):
        t.put(4, h, v, ages[h - 1])
    now = 3000.0
    cands = range(1, len(vals) + 1)
    ref = max(t.value(4, h, now, P) for h in cands)
    hop, val = t.best(4, now, P)
    assert val == pytest.approx(ref, rel=1e-12, abs=1e-300)
    assert t.value(4, hop, now, P) == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_params_are_validated():
    for bad in (dict(alpha=0.0), dict(gamma=1.0), dict(beta=1.0), dict(aging_unit=0.0)):
        with pytest.raises(ValueError):
            QParams(**bad)
