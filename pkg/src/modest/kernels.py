"""Compiled inner loops for every estimator.

Each estimator is a kernel over the oracle state tuple (see
:mod:`modest.oracle`) and a workspace of tallies. Kernels only touch the
instance through :func:`modest.oracle.draw_tally`, plus the box sizes when the
caller grants them in ``known``. :func:`run_batch` runs many independent
trials back to back, reseeding and resetting between them, and is what the
Monte Carlo driver calls.
"""

import math

import numpy as np

from . import rng as _rng
from ._jit import njit
from .oracle import RNG, draw_tally, reset_state
from .schedule import allocate_lr

# Algorithm codes; also the ordinals mixed into per-trial seeds.
SFM, DSM, CC_SR, DS_SR_SEP, DS_SR_BOX, DS_PSR, NDS_SR, ENDS_SR, NDS_SR_MLE, DS_UE, DS_PE, NDS_UE, ENDS_UE = range(13)

# SR elimination statistics.
STAT_BOX_DISTINCT, STAT_MAX_DISTINCT, STAT_NDS, STAT_ENDS, STAT_MLE = range(5)
# Single-phase scores.
SCORE_DS, SCORE_NDS, SCORE_ENDS = range(3)

# Workspace slots.
S, SBOX, PULLS, RAW, COLL, ALIVE, ELIM, VALS, CAND, ALLOC = range(10)


def make_workspace(b, m):
    n = max(b, m)
    return (
        np.zeros((b, m), dtype=np.int64),
        np.zeros(b, dtype=np.int64),
        np.zeros(b, dtype=np.int64),
        np.zeros(m, dtype=np.int64),
        np.zeros(b, dtype=np.int64),
        np.zeros(b, dtype=np.bool_),
        np.full(b, -1, dtype=np.int64),
        np.zeros(n, dtype=np.float64),
        np.zeros(n, dtype=np.int64),
        np.zeros(b, dtype=np.int64),
    )


@njit
def reset_workspace(ws):
    ws[S][:, :] = 0
    ws[SBOX][:] = 0
    ws[PULLS][:] = 0
    ws[RAW][:] = 0
    ws[COLL][:] = 0
    ws[ALIVE][:] = False
    ws[ELIM][:] = -1


@njit
def expected_distinct(n, k):
    """``n (1 - (1 - 1/n)**k)``: mean distinct draws from ``n`` in ``k`` tries."""
    if k <= 0:
        return 0.0
    if n == 1:
        return 1.0
    v = -n * math.expm1(k * math.log1p(-1.0 / n))
    return min(v, float(n), float(k))


@njit
def estimate_box_size(s, k):
    """Smallest ``n >= s`` whose expected distinct count after ``k`` draws
    reaches ``s``; ``s`` itself when ``s <= 1`` and ``k**2`` when no draw
    repeated (``s == k >= 2``)."""
    if s > k or s < 0:
        raise ValueError("need 0 <= s <= k")
    if s <= 1:
        return s
    if s == k:
        return k * k
    if expected_distinct(s, k) >= s:
        return s
    lo = s
    hi = 2 * s
    while expected_distinct(hi, k) < s:
        lo = hi
        hi *= 2
    # invariant: E(lo) < s <= E(hi)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if expected_distinct(mid, k) >= s:
            hi = mid
        else:
            lo = mid
    return hi


@njit
def _sample(state, ws, box, k, paired=False):
    """``k`` queries on ``box`` with tallies; returns within-pair collisions."""
    if k <= 0:
        return 0
    ws[PULLS][box] += k
    return draw_tally(state, box, k, paired, ws[S], ws[SBOX], ws[RAW])


@njit
def _pick(rngs, vals, n, mask, maximize, cand):
    """Index of the extreme of ``vals[:n]`` among ``mask``; uniform tie-break."""
    count = 0
    best = 0.0
    for i in range(n):
        if not mask[i]:
            continue
        v = vals[i] if maximize else -vals[i]
        if count == 0 or v > best:
            best = v
            cand[0] = i
            count = 1
        elif v == best:
            cand[count] = i
            count += 1
    if count > 1:
        return cand[_rng.below(rngs, _rng.TIES, count)]
    return cand[0]


@njit
def _argmax_row(state, ws, box):
    m = ws[S].shape[1]
    vals = ws[VALS]
    row = ws[S][box]
    for j in range(m):
        vals[j] = row[j]
    mask = np.ones(m, dtype=np.bool_)
    return _pick(state[RNG], vals, m, mask, True, ws[CAND])


@njit
def _argmax_vals(state, ws, m):
    mask = np.ones(m, dtype=np.bool_)
    return _pick(state[RNG], ws[VALS], m, mask, True, ws[CAND])


@njit
def run_sfm(state, ws, t):
    _sample(state, ws, 0, t)
    m = ws[RAW].shape[0]
    for j in range(m):
        ws[VALS][j] = ws[RAW][j]
    return _argmax_vals(state, ws, m)


@njit
def run_dsm(state, ws, t):
    _sample(state, ws, 0, t)
    return _argmax_row(state, ws, 0)


@njit
def run_single_phase(state, ws, t, proportional, score, known):
    """DS-UE / DS-PE / NDS-UE / ENDS-UE."""
    S_ = ws[S]
    b, m = S_.shape
    alloc = ws[ALLOC]
    if proportional:
        allocate_lr(t, known, np.ones(b, dtype=np.bool_), alloc)
    else:
        alloc[:] = t // b
    for i in range(b):
        _sample(state, ws, i, alloc[i])
    vals = ws[VALS]
    vals[:m] = 0.0
    sbox = ws[SBOX]
    for i in range(b):
        if score == SCORE_DS:
            for j in range(m):
                vals[j] += S_[i, j]
        elif score == SCORE_NDS:
            if sbox[i] > 0:
                for j in range(m):
                    vals[j] += S_[i, j] * known[i] / sbox[i]
        else:
            e = expected_distinct(known[i], alloc[i])
            if e > 0.0:
                for j in range(m):
                    vals[j] += S_[i, j] * known[i] / e
    return _argmax_vals(state, ws, m)


@njit
def _box_stat(ws, i, stat, known):
    S_ = ws[S]
    si = ws[SBOX][i]
    if stat == STAT_BOX_DISTINCT:
        return float(si)
    top = 0
    for j in range(S_.shape[1]):
        if S_[i, j] > top:
            top = S_[i, j]
    if stat == STAT_MAX_DISTINCT:
        return float(top)
    if stat == STAT_NDS:
        if si == 0:
            return 0.0
        return top * known[i] / si
    if stat == STAT_ENDS:
        e = expected_distinct(known[i], ws[PULLS][i])
        if e <= 0.0:
            return 0.0
        return top * known[i] / e
    # STAT_MLE
    if si == 0:
        return 0.0
    return top * estimate_box_size(si, ws[PULLS][i]) / si


@njit
def run_sr(state, ws, t, K, stat, proportional, known):
    """Distinct-samples successive rejects over boxes.

    Phase ``r`` gives every surviving box ``K[r] - K[r-1]`` queries (or a
    size-proportional share of the phase total), then drops the surviving
    box with the smallest statistic. The answer is the community with the
    most distinct individuals in the last box standing.
    """
    S_ = ws[S]
    b = S_.shape[0]
    alive = ws[ALIVE]
    alive[:] = True
    if b == 1:
        _sample(state, ws, 0, t)
        return _argmax_row(state, ws, 0)
    alloc = ws[ALLOC]
    vals = ws[VALS]
    for r in range(1, b):
        step = K[r] - K[r - 1]
        if proportional:
            allocate_lr(step * (b - r + 1), known, alive, alloc)
        else:
            for i in range(b):
                alloc[i] = step if alive[i] else 0
        for i in range(b):
            _sample(state, ws, i, alloc[i])
        for i in range(b):
            if alive[i]:
                vals[i] = _box_stat(ws, i, stat, known)
        loser = _pick(state[RNG], vals, b, alive, False, ws[CAND])
        alive[loser] = False
        ws[ELIM][r - 1] = loser
    last = 0
    for i in range(b):
        if alive[i]:
            last = i
    return _argmax_row(state, ws, last)


@njit
def run_cc_sr(state, ws, K):
    """Successive rejects on within-pair collisions; ``K`` counts pairs."""
    S_ = ws[S]
    b = S_.shape[0]
    alive = ws[ALIVE]
    alive[:] = True
    coll = ws[COLL]
    vals = ws[VALS]
    for r in range(1, b):
        step = K[r] - K[r - 1]
        for i in range(b):
            if not alive[i]:
                continue
            coll[i] += _sample(state, ws, i, 2 * step, True)
        for i in range(b):
            vals[i] = coll[i]
        loser = _pick(state[RNG], vals, b, alive, True, ws[CAND])
        alive[loser] = False
        ws[ELIM][r - 1] = loser
    last = 0
    for i in range(b):
        if alive[i]:
            last = i
    return _argmax_row(state, ws, last)


@njit
def run_one(code, state, ws, t, K, known):
    if code == SFM:
        return run_sfm(state, ws, t)
    if code == DSM:
        return run_dsm(state, ws, t)
    if code == CC_SR:
        return run_cc_sr(state, ws, K)
    if code == DS_SR_SEP:
        return run_sr(state, ws, t, K, STAT_BOX_DISTINCT, False, known)
    if code == DS_SR_BOX:
        return run_sr(state, ws, t, K, STAT_MAX_DISTINCT, False, known)
    if code == DS_PSR:
        return run_sr(state, ws, t, K, STAT_MAX_DISTINCT, True, known)
    if code == NDS_SR:
        return run_sr(state, ws, t, K, STAT_NDS, False, known)
    if code == ENDS_SR:
        return run_sr(state, ws, t, K, STAT_ENDS, False, known)
    if code == NDS_SR_MLE:
        return run_sr(state, ws, t, K, STAT_MLE, False, known)
    if code == DS_UE:
        return run_single_phase(state, ws, t, False, SCORE_DS, known)
    if code == DS_PE:
        return run_single_phase(state, ws, t, True, SCORE_DS, known)
    if code == NDS_UE:
        return run_single_phase(state, ws, t, False, SCORE_NDS, known)
    if code == ENDS_UE:
        return run_single_phase(state, ws, t, False, SCORE_ENDS, known)
    raise ValueError("unknown algorithm code")


@njit
def run_batch(code, state, ws, t, K, known, seeds, is_mode, out):
    """``out[k] = 1`` when trial ``k`` (seeded by ``seeds[k]``) errs."""
    for k in range(seeds.shape[0]):
        reset_state(state, seeds[k])
        reset_workspace(ws)
        est = run_one(code, state, ws, t, K, known)
        out[k] = 0 if is_mode[est] else 1
