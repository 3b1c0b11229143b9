import math
import random
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modest import algorithms as al
from modest import kernels as K
from modest.algorithms import AlgorithmError, AlgorithmId as A
from modest.instance import build_instance, summarize
from modest.oracle import IdentityMode, Oracle
from modest.rng import new_streams
from modest.schedule import sr_round_lengths

BOX = build_instance([[4, 2, 0], [0, 0, 3]])
SEP = build_instance([[40, 0, 0, 0], [0, 30, 0, 0], [0, 0, 20, 0], [0, 0, 0, 10]])


def run(alg, inst, t, seed, sizes=True):
    mode = IdentityMode.IDENTITYLESS if alg is A.SFM else IdentityMode.IDENTITY
    box_sizes = summarize(inst).box_sizes if (sizes and alg in al.NEEDS_SIZES) else None
    return al.run(alg, Oracle(inst, seed, mode), t, box_sizes)


# ---------------------------------------------------------------- tie rule / argmax


def test_pick_strict_argmax_and_argmin():
    rngs = new_streams(1)
    vals = np.array([3.0, 1.0])
    cand = np.zeros(2, dtype=np.int64)
    mask = np.ones(2, dtype=np.bool_)
    assert K._pick(rngs, vals, 2, mask, True, cand) == 0
    assert K._pick(rngs, vals, 2, mask, False, cand) == 1
    mask[0] = False
    assert K._pick(rngs, vals, 2, mask, True, cand) == 1


def test_pick_ties_uniform():
    rngs = new_streams(2)
    vals = np.array([2.0, 5.0, 5.0, 5.0])
    cand = np.zeros(4, dtype=np.int64)
    mask = np.ones(4, dtype=np.bool_)
    c = Counter(int(K._pick(rngs, vals, 4, mask, True, cand)) for _ in range(30000))
    assert set(c) == {1, 2, 3}
    for k in (1, 2, 3):
        assert abs(c[k] - 10000) < 4 * math.sqrt(30000 * (1 / 3) * (2 / 3))


@pytest.mark.parametrize("alg", [A.SFM, A.DSM])
def test_zero_budget_is_uniform_guess(alg):
    inst = build_instance([[2, 1, 1]])
    c = Counter(run(alg, inst, 0, s).estimate for s in range(3000))
    assert set(c) == {0, 1, 2}
    assert all(abs(v - 1000) < 4 * math.sqrt(3000 * 2 / 9) for v in c.values())


def test_dsm_tally_example():
    # One box with a single individual per community: the tallies are exact.
    inst = build_instance([[1, 1]])
    res = run(A.DSM, inst, 50, 3)
    assert list(res.per_community_distinct[0]) == [1, 1]


def test_dsm_strict_winner():
    # Community 0 has 2 individuals, community 1 has 1: once both of 0's are seen DSM must pick 0.
    inst = build_instance([[2, 1]])
    for s in range(50):
        res = run(A.DSM, inst, 200, s)
        assert list(res.per_community_distinct[0]) == [2, 1] and res.estimate == 0


# ---------------------------------------------------------------- SR algorithms


def test_cc_sr_drops_always_colliding_box():
    inst = build_instance([[1, 0], [0, 1000]])
    for s in range(20):
        res = run(A.CC_SR, inst, 40, s)
        assert res.estimate == 1 and res.elimination_order == [0]


def test_cc_sr_no_collisions_random_elimination():
    big = 10**5
    inst = build_instance([[big, 0], [0, big - 1]])
    outcomes = Counter(run(A.CC_SR, inst, 40, s).estimate for s in range(400))
    assert set(outcomes) == {0, 1}
    assert 140 < outcomes[0] < 260


def test_cc_sr_budget_and_pairs():
    res = run(A.CC_SR, SEP, 401, 0)
    sched = sr_round_lengths(200, 4)
    assert res.queries_used == 2 * sched.consumption <= 401
    with pytest.raises(AlgorithmError):
        run(A.CC_SR, SEP, 9, 0)


def test_ds_sr_eliminates_fewest_distinct():
    inst = build_instance([[5, 0], [0, 2]])
    for s in range(30):
        res = run(A.DS_SR_SEP, inst, 200, s)
        assert res.elimination_order == [1] and res.estimate == 0


def test_ds_sr_equal_counts_random():
    big = 10**5
    inst = build_instance([[big, 0], [0, big]])
    # Tied mode: both answers are correct, but elimination must be a fair coin.
    c = Counter(run(A.DS_SR_SEP, inst, 3, s).elimination_order[0] for s in range(400))
    assert 140 < c[0] < 260


@pytest.mark.parametrize("alg", sorted(al.SR_FAMILY - {A.CC_SR}, key=lambda a: a.value))
@pytest.mark.parametrize("t", [5, 37, 100, 1001])
def test_sr_budget_accounting_and_shape(alg, t):
    inst = SEP if alg is A.DS_SR_SEP else build_instance([[4, 2, 0, 0], [0, 0, 3, 0], [0, 0, 0, 5]])
    b = inst.b
    res = run(alg, inst, t, 7)
    assert res.queries_used <= t
    if alg is not A.DS_PSR:
        assert res.queries_used == sr_round_lengths(t, b).consumption
    assert len(res.elimination_order) == b - 1
    assert len(set(res.elimination_order)) == b - 1


def test_ds_sr_box_final_argmax_within_box():
    inst = build_instance([[4, 9, 0], [0, 0, 2]])
    for s in range(20):
        res = run(A.DS_SR_BOX, inst, 400, s)
        assert res.elimination_order == [1] and res.estimate == 1


def test_ds_psr_allocates_by_size():
    inst = build_instance([[6, 0], [0, 3]])
    res = run(A.DS_PSR, inst, 11, 0)
    # b=2: K_1 = ceil(9/2) = 5, phase total 10, sizes (6,3) -> (7,3).
    assert res.queries_used == 10


def test_ds_psr_equal_sizes_matches_ds_sr_box():
    inst = build_instance([[3, 2, 0, 0], [0, 0, 4, 1]])
    for s in range(50):
        a = run(A.DS_PSR, inst, 60, s)
        b = run(A.DS_SR_BOX, inst, 60, s)
        assert (a.estimate, a.elimination_order, a.queries_used) == (b.estimate, b.elimination_order, b.queries_used)


def test_nds_statistic():
    ws = K.make_workspace(1, 2)
    ws[K.S][0] = [3, 2]
    ws[K.SBOX][0] = 5
    known = np.array([100])
    assert K._box_stat(ws, 0, K.STAT_NDS, known) == 60.0
    ws[K.S][0] = 0
    ws[K.SBOX][0] = 0
    assert K._box_stat(ws, 0, K.STAT_NDS, known) == 0.0


def test_nds_prefers_larger_box_on_equal_ratio():
    ws = K.make_workspace(2, 2)
    ws[K.S][0, 0] = 2
    ws[K.S][1, 1] = 2
    ws[K.SBOX][:] = 4
    known = np.array([10, 20])
    assert K._box_stat(ws, 1, K.STAT_NDS, known) > K._box_stat(ws, 0, K.STAT_NDS, known)


def test_ends_statistic_uses_expected_distinct():
    ws = K.make_workspace(1, 1)
    ws[K.S][0, 0] = 1
    ws[K.SBOX][0] = 1
    ws[K.PULLS][0] = 2
    assert K._box_stat(ws, 0, K.STAT_ENDS, np.array([2])) == pytest.approx(2 / 1.5)


def test_mle_statistic_uses_size_estimate():
    ws = K.make_workspace(1, 2)
    ws[K.S][0] = [1, 1]
    ws[K.SBOX][0] = 2
    ws[K.PULLS][0] = 3
    # estimate_box_size(2, 3) = 3 -> 1 * 3 / 2
    assert K._box_stat(ws, 0, K.STAT_MLE, np.zeros(1, dtype=np.int64)) == 1.5


# ---------------------------------------------------------------- single phase


def test_nds_ue_score_example():
    # One box, S = (2, 5), N = 10: scores 20/7 and 50/7.
    state_counts = build_instance([[1000, 1000]])
    o = Oracle(state_counts, 0)
    ws = K.make_workspace(1, 2)
    ws[K.S][0] = [2, 5]
    ws[K.SBOX][0] = 7
    known = np.array([10])
    est = K.run_single_phase(o.state, ws, 0, False, K.SCORE_NDS, known)
    assert est == 1
    assert ws[K.VALS][0] == pytest.approx(20 / 7) and ws[K.VALS][1] == pytest.approx(50 / 7)


def test_ue_less_budget_than_boxes_is_uniform_guess():
    inst = build_instance([[2, 0, 0], [0, 1, 0], [0, 0, 1]])
    c = Counter(run(A.DS_UE, inst, 2, s).estimate for s in range(900))
    assert set(c) == {0, 1, 2}
    assert run(A.DS_UE, inst, 2, 0).queries_used == 0


def test_ds_ue_aggregates_across_boxes():
    inst = build_instance([[2, 1], [2, 0]])  # community 0 spans both boxes
    res = run(A.DS_UE, inst, 400, 1)
    assert list(res.per_community_distinct.sum(axis=0)) == [4, 1]
    assert res.estimate == 0


@pytest.mark.parametrize("alg", [A.DS_UE, A.DS_PE])
def test_single_box_reduces_to_dsm(alg):
    inst = build_instance([[5, 3, 2]])
    for s in range(100):
        assert run(alg, inst, 7, s).estimate == run(A.DSM, inst, 7, s).estimate


def test_ds_pe_allocation():
    inst = build_instance([[6, 0], [0, 3]])
    assert run(A.DS_PE, inst, 10, 0).queries_used == 10
    assert run(A.DS_PE, inst, 9, 0).queries_used == 9


def test_ends_ue_large_budget_matches_ds_ue():
    inst = build_instance([[3, 2, 0], [0, 0, 4]])
    agree = sum(run(A.ENDS_UE, inst, 600, s).estimate == run(A.DS_UE, inst, 600, s).estimate for s in range(200))
    assert agree == 200


# ---------------------------------------------------------------- reductions and invariants


def test_ds_sr_box_equals_ds_sr_sep_on_separated():
    for s in range(200):
        a = run(A.DS_SR_BOX, SEP, 120, s)
        b = run(A.DS_SR_SEP, SEP, 120, s)
        assert (a.estimate, a.elimination_order) == (b.estimate, b.elimination_order)


def test_dsm_reads_only_first_time_flags():
    inst = build_instance([[6, 5, 2]])
    for s in range(30):
        o = Oracle(inst, s, trace=True)
        # Draw through the public API, then rebuild the tallies from relabelled tokens.
        obs = [o.sample(0) for _ in range(25)]
        perm = list(range(25))
        random.Random(s).shuffle(perm)
        seen = set()
        tally = [0, 0, 0]
        for x in obs:
            tok = perm[x.pseudo_id]
            if tok not in seen:
                seen.add(tok)
                tally[x.community] += 1
        res = run(A.DSM, inst, 25, s)
        assert list(res.per_community_distinct[0]) == tally


def test_nds_sr_mle_tracks_nds_sr():
    inst = build_instance([[30, 10, 0], [0, 0, 25]])
    agree = sum(run(A.NDS_SR_MLE, inst, 4000, s).estimate == run(A.NDS_SR, inst, 4000, s).estimate
                for s in range(200))
    assert agree >= 190


# ---------------------------------------------------------------- applicability


def test_applicability_matrix():
    mixed = build_instance([[3, 2]])
    general = build_instance([[4, 2], [1, 3]])
    with pytest.raises(AlgorithmError):
        run(A.SFM, BOX, 10, 0)
    with pytest.raises(AlgorithmError):
        run(A.DSM, SEP, 10, 0)
    with pytest.raises(AlgorithmError):
        run(A.CC_SR, BOX, 30, 0)
    with pytest.raises(AlgorithmError):
        run(A.DS_SR_SEP, mixed, 30, 0)
    for alg in (A.DS_SR_BOX, A.DS_PSR, A.NDS_SR, A.ENDS_SR, A.NDS_SR_MLE):
        with pytest.raises(AlgorithmError):
            run(alg, general, 30, 0)
        run(alg, SEP, 30, 0)  # Separated is narrower than DisjointBox
    for alg in (A.DS_UE, A.DS_PE, A.NDS_UE, A.ENDS_UE):
        run(alg, general, 30, 0)


def test_identity_and_size_requirements():
    with pytest.raises(AlgorithmError, match="identity"):
        al.run_dsm(Oracle(build_instance([[3, 2]]), 0, IdentityMode.IDENTITYLESS), 10)
    with pytest.raises(AlgorithmError, match="box sizes"):
        al.run(A.NDS_SR, Oracle(BOX, 0), 30)
    with pytest.raises(AlgorithmError, match="empty box"):
        run(A.DS_UE, build_instance([[3, 2], [0, 0]]), 10, 0)
    with pytest.raises(AlgorithmError):
        run(A.DS_SR_BOX, BOX, 2, 0)


def test_parse_names():
    assert A.parse("ds-sr-box") is A.DS_SR_BOX
    assert A("ends_ue") is A.ENDS_UE
    with pytest.raises(AlgorithmError):
        A.parse("nope")


@given(
    st.sampled_from(sorted(A, key=lambda a: a.value)),
    st.integers(0, 300),
    st.integers(0, 2**32),
)
@settings(max_examples=300, deadline=None)
def test_never_exceeds_budget(alg, t, seed):
    if alg in (A.SFM, A.DSM):
        inst = build_instance([[5, 4, 1]])
    elif alg in (A.CC_SR, A.DS_SR_SEP):
        inst = SEP
    else:
        inst = build_instance([[4, 2, 0, 0], [0, 0, 3, 0], [0, 0, 0, 5]])
    if t < al.min_budget(alg, inst.b):
        with pytest.raises(AlgorithmError):
            run(alg, inst, t, seed)
        return
    res = run(alg, inst, t, seed)
    assert res.queries_used <= t
    assert 0 <= res.estimate < inst.m


# ---------------------------------------------------------------- numeric helpers


def test_expected_distinct_values():
    assert al.expected_distinct(7, 0) == 0
    assert al.expected_distinct(1, 5) == 1
    assert al.expected_distinct(2, 2) == 1.5
    assert al.expected_distinct(10**6, 10**9) == pytest.approx(10**6)
    with pytest.raises(ValueError):
        al.expected_distinct(0, 1)


def test_expected_distinct_monotone_grid():
    for n in range(2, 60):
        for k in range(0, 80):
            e = al.expected_distinct(n, k)
            assert e <= min(n, k) + 1e-12
            nxt = al.expected_distinct(n, k + 1)
            # Strict until the value rounds to n in floating point.
            assert nxt > e or (nxt == e == n)
            if k >= 2:
                assert al.expected_distinct(n + 1, k) > e


def test_estimate_box_size_values():
    assert al.estimate_box_size(5, 5) == 25
    assert al.estimate_box_size(1, 10) == 1
    assert al.estimate_box_size(2, 3) == 3
    assert al.estimate_box_size(0, 4) == 0
    with pytest.raises(ValueError):
        al.estimate_box_size(4, 3)


@given(st.integers(3, 10_000), st.integers(2, 20_000))
@settings(max_examples=500, deadline=None)
def test_estimate_inverts_expectation(n, k):
    e = al.expected_distinct(n, k)
    s = round(e)
    if not (1 < e < k - 1) or s < 2:
        return
    est = al.estimate_box_size(s, k)
    # Defining bracket: the smallest size whose expectation reaches s.
    assert al.expected_distinct(est, k) >= s > al.expected_distinct(est - 1, k)
    # Rounding moves s by at most 1/2, so N is recovered to +-1 wherever the
    # expectation grows by at least 1/2 per unit of N.
    if al.expected_distinct(n + 1, k) - e >= 0.5:
        assert abs(est - n) <= 1
