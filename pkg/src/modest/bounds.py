"""Hardness metrics, error upper bounds, lower-bound decay rates and the
alternate instances used by the lower-bound arguments.

Everything is evaluated in natural-log domain; binomial prefactors go through
``math.lgamma`` so large communities do not overflow. Communities and boxes
are sorted internally (largest first), callers never pre-sort. Bounds are
clamped at ``log 1 = 0``.
"""

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .instance import Setting, build_instance, classify_setting, is_disjoint, summarize
from .schedule import log_bar, sr_round_lengths


class BoundError(ValueError):
    """The bound or rate does not apply to this instance."""


class InfiniteHardness(BoundError):
    """The mode is tied, so the log gaps vanish and every metric is infinite."""


class BoundId(enum.Enum):
    SFM = "SFM"
    DSM_MCDIARMID = "DSM_MCDIARMID"
    DSM_COUPON = "DSM_COUPON"
    CCSR = "CCSR"
    DSSR_SEP = "DSSR_SEP"  # per-phase sum
    DSSR_SEP_CLOSED = "DSSR_SEP_CLOSED"  # single-exponent form
    DSSR_BOX = "DSSR_BOX"


class RateId(enum.Enum):
    MIXED_IDENTITYLESS = "MIXED_IDENTITYLESS"
    MIXED_IDENTITY = "MIXED_IDENTITY"
    SEPARATED = "SEPARATED"
    BOX_MIXED = "BOX_MIXED"
    BOX_GAMMA = "BOX_GAMMA"
    ENDS_SR = "ENDS_SR"  # achievable decay rate of ENDS-SR (an upper-bound rate)


def parse_id(name):
    """A :class:`BoundId` or :class:`RateId` from its name."""
    key = str(name).strip().upper().replace("-", "_")
    for cls in (BoundId, RateId):
        if key in cls.__members__:
            return cls[key]
    raise BoundError(f"unknown bound or rate id {name!r}")


@dataclass(frozen=True)
class HardnessSeparated:
    H: float
    H2: float
    Hc: float


@dataclass(frozen=True)
class HardnessBox:
    Hb: float
    Hb2: float
    Gamma: float
    # Gamma for every candidate box a, keyed by original box index.
    gamma_by_box: dict = field(default_factory=dict)


def log_binom(n, k):
    if k < 0 or k > n:
        return -math.inf
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _logsumexp(xs):
    return float(np.logaddexp.reduce(np.asarray(xs, dtype=float)))


def _clamp(v):
    return min(v, 0.0)


# ---------------------------------------------------------------- layouts


def _mixed_sizes(inst):
    if classify_setting(inst) is not Setting.MIXED:
        raise BoundError(f"needs a mixed instance, got {classify_setting(inst).value}")
    if inst.m < 2:
        raise BoundError("needs at least two communities")
    d = sorted((int(x) for x in inst.counts[0]), reverse=True)
    if d[0] == d[1]:
        raise InfiniteHardness("tied mode")
    return d, sum(d)


def _separated(inst):
    """Sorted community sizes with their original box indices."""
    if classify_setting(inst) is not Setting.SEPARATED:
        raise BoundError(f"needs a separated instance, got {classify_setting(inst).value}")
    sizes = inst.counts.sum(axis=1)
    rows = sorted(((int(s), i) for i, s in enumerate(sizes) if s > 0), key=lambda p: (-p[0], p[1]))
    if len(rows) < 2:
        raise BoundError("needs at least two non-empty boxes")
    if rows[0][0] == rows[1][0]:
        raise InfiniteHardness("tied mode")
    return [p[0] for p in rows], [p[1] for p in rows]


@dataclass(frozen=True)
class _Box:
    index: int  # original box index
    N: int
    g: int  # largest community in the box
    col: int  # column of that community
    second: int  # second-largest community (0 if none)


def _boxes(inst):
    """Non-empty boxes sorted by their largest community, descending."""
    if not is_disjoint(inst):
        raise BoundError(f"needs a community-disjoint instance, got {classify_setting(inst).value}")
    out = []
    for i, row in enumerate(inst.counts):
        n = int(row.sum())
        if n == 0:
            continue
        order = np.argsort(-row, kind="stable")
        second = int(row[order[1]]) if row.shape[0] > 1 else 0
        out.append(_Box(i, n, int(row[order[0]]), int(order[0]), second))
    out.sort(key=lambda x: (-x.g, x.index))
    if len(out) < 2:
        raise BoundError("needs at least two non-empty boxes")
    if out[0].g == out[1].g or out[0].g == out[0].second:
        raise InfiniteHardness("tied mode")
    return out


def _c(boxes):
    """``c_1`` is the runner-up inside the mode box, ``c_i = g_i`` elsewhere."""
    return [boxes[0].second] + [x.g for x in boxes[1:]]


# ---------------------------------------------------------------- hardness


def hardness_separated(inst):
    d, _ = _separated(inst)
    b = len(d)
    gaps = [math.log(d[0]) - math.log(d[i]) for i in range(1, b)]
    H = max((i + 2) / g for i, g in enumerate(gaps))
    H2 = sum(1.0 / g for g in gaps)
    Hc = 0.0
    for i in range(1, b):
        delta = 1.0 / d[i] - 1.0 / d[0]
        Hc = max(Hc, (i + 1) / (delta * delta) / d[i])
    return HardnessSeparated(H, H2, Hc)


def _box_gaps(boxes):
    N1, d11 = boxes[0].N, boxes[0].g
    c = _c(boxes)
    return [math.log(N1) - math.log(N1 - d11 + c[i]) for i in range(1, len(boxes))]


def _alt_box_size(boxes, k):
    """``N_a'`` for the box at sorted position ``k``, by the max-of-ceilings rule."""
    N1, d11 = boxes[0].N, boxes[0].g
    c = _c(boxes)
    Na, ca = boxes[k].N, c[k]
    best = -(-N1 * (Na - ca + d11) // (N1 - d11 + ca))
    for i in range(1, len(boxes)):
        best = max(best, -(-N1 * (Na - ca + c[i]) // (N1 - d11 + c[i])))
    return best


def _gamma(boxes, k):
    N1, d11 = boxes[0].N, boxes[0].g
    ca = _c(boxes)[k]
    Na = boxes[k].N
    return (math.log(_alt_box_size(boxes, k)) - math.log(Na)) / (math.log(N1) - math.log(N1 - d11 + ca))


def hardness_box(inst):
    """``Hb``, ``Hb2`` and ``Gamma``.

    ``Gamma`` depends on a box ``a`` that the lower-bound argument only shows
    to exist; every candidate is in ``gamma_by_box`` and ``Gamma`` is the
    largest of them.
    """
    boxes = _boxes(inst)
    gaps = _box_gaps(boxes)
    Hb = max((i + 2) / g for i, g in enumerate(gaps))
    Hb2 = sum(1.0 / g for g in gaps)
    gammas = {boxes[k].index: _gamma(boxes, k) for k in range(1, len(boxes))}
    return HardnessBox(Hb, Hb2, max(gammas.values()), gammas)


# ---------------------------------------------------------------- upper bounds


def _check_t(t):
    t = int(t)
    if t < 0:
        raise BoundError("budget must be non-negative")
    return t


def _log_geometric(base_num, base_den, t):
    """``t log(base_num / base_den)`` with ``0 * log 0 = 0``."""
    if t == 0:
        return 0.0
    if base_num <= 0:
        return -math.inf
    return t * (math.log(base_num) - math.log(base_den))


def upper_bound(bound_id, inst, t):
    """``(log bound, valid)`` for one budget."""
    bid = parse_id(bound_id) if not isinstance(bound_id, BoundId) else bound_id
    if not isinstance(bid, BoundId):
        raise BoundError(f"{bid.name} is a rate, not a bound")
    t = _check_t(t)
    fn = _UPPER[bid]
    value, valid = fn(inst, t)
    return _clamp(value), valid


def _ub_sfm(inst, t):
    d, N = _mixed_sizes(inst)
    gap = (math.sqrt(d[0]) - math.sqrt(d[1])) ** 2
    m = len(d)
    decay = 0.0 if t == 0 else t * math.log1p(-gap / N)
    return math.log(m - 1) + decay, True


def _ub_mcdiarmid(inst, t):
    d, N = _mixed_sizes(inst)
    m = len(d)
    d1, dm = d[0], d[-1]
    mean_rest = sum(d[1:]) / (m - 1)
    window = min((d1 + dm) * N / (2 * d1), 16 * N * d1 / (d1 - dm) ** 2)
    val = math.log(2 * (m - 1)) - t * (d1 - mean_rest) ** 2 / (32 * N * d1)
    return val, t <= window


def _ub_coupon(inst, t):
    d, N = _mixed_sizes(inst)
    return log_binom(d[0], d[1]) + _log_geometric(N - d[0] + d[1], N, t), True


def _ub_ccsr(inst, t):
    d, _ = _separated(inst)
    b = len(d)
    Hc = hardness_separated(inst).Hc
    val = math.log(b * (b - 1) / 2) - (t / 2 - b) / (4 * log_bar(b) * Hc)
    return val, t >= 2 * b + 2


def _ub_dssr_sep(inst, t):
    d, _ = _separated(inst)
    b = len(d)
    if t <= b:
        return 0.0, False
    K = sr_round_lengths(t, b).cumulative
    terms = []
    for r in range(1, b):
        dr = d[b - r]
        terms.append(log_binom(d[0], dr) - K[r] * (math.log(d[0]) - math.log(dr)))
    return _logsumexp(terms), True


def _ub_dssr_sep_closed(inst, t):
    d, _ = _separated(inst)
    b = len(d)
    H = hardness_separated(inst).H
    pre = _logsumexp([log_binom(d[0], d[b - r]) for r in range(1, b)])
    return pre - (t - b) / (log_bar(b) * H), t > b


def _ub_dssr_box(inst, t):
    boxes = _boxes(inst)
    b = len(boxes)
    N1, d11 = boxes[0].N, boxes[0].g
    c = _c(boxes)
    Hb = hardness_box(inst).Hb
    lb = log_bar(b)
    first = _logsumexp([log_binom(d11, c[i]) for i in range(1, b)]) - (t - b) / (lb * Hb)
    rest = N1 - d11 + c[0]
    if rest == 0:
        second = -math.inf
    else:
        second = log_binom(d11, c[0]) - (t - b) * (math.log(N1) - math.log(rest)) / (2 * lb)
    return _logsumexp([first, second]), t > b


_UPPER = {
    BoundId.SFM: _ub_sfm,
    BoundId.DSM_MCDIARMID: _ub_mcdiarmid,
    BoundId.DSM_COUPON: _ub_coupon,
    BoundId.CCSR: _ub_ccsr,
    BoundId.DSSR_SEP: _ub_dssr_sep,
    BoundId.DSSR_SEP_CLOSED: _ub_dssr_sep_closed,
    BoundId.DSSR_BOX: _ub_dssr_box,
}


# ---------------------------------------------------------------- rates


def _log_ratio(num, den):
    """``log(num / den)``; infinite when ``den <= 0``."""
    if den <= 0:
        return math.inf
    return math.log(num) - math.log(den)


def lower_bound_rate(rate_id, inst):
    """Per-query decay rate (positive; the error decays like ``exp(-rate t)``)."""
    rid = parse_id(rate_id) if not isinstance(rate_id, RateId) else rate_id
    if not isinstance(rid, RateId):
        raise BoundError(f"{rid.name} is a bound, not a rate")
    if rid is RateId.MIXED_IDENTITYLESS:
        d, N = _mixed_sizes(inst)
        return _log_ratio(N, N - (math.sqrt(d[0]) - math.sqrt(d[1])) ** 2)
    if rid is RateId.MIXED_IDENTITY:
        d, N = _mixed_sizes(inst)
        return _log_ratio(N, N - (d[0] - d[1] + 1))
    if rid is RateId.SEPARATED:
        return 3.0 / hardness_separated(inst).H2
    boxes = _boxes(inst)
    N1, d11, c1 = boxes[0].N, boxes[0].g, boxes[0].second
    if rid is RateId.BOX_MIXED:
        return _log_ratio(N1, N1 - (d11 - c1 + 1))
    hb = hardness_box(inst)
    if rid is RateId.BOX_GAMMA:
        return hb.Gamma / hb.Hb2
    # ENDS_SR
    lb = log_bar(len(boxes))
    return min(1.0 / hb.Hb, 0.5 * _log_ratio(N1, N1 - d11 + c1)) / lb


# ---------------------------------------------------------------- alternates


def _resolve_setting(inst, setting):
    if setting is None:
        setting = classify_setting(inst)
    setting = Setting(setting)
    if setting not in (Setting.SEPARATED, Setting.DISJOINT_BOX):
        raise BoundError(f"alternate instances exist for Separated and DisjointBox, got {setting.value}")
    return setting


def alternate_candidates(inst, setting=None):
    """Every ``(a, D')`` pair, ``a`` an original box index other than the mode's.

    Separated: community ``a`` grows to ``ceil(d_1^2 / d_a)``. DisjointBox:
    the largest community of box ``a`` grows by ``N_a' - N_a``.
    """
    setting = _resolve_setting(inst, setting)
    out = []
    if setting is Setting.SEPARATED:
        d, idx = _separated(inst)
        for k in range(1, len(d)):
            counts = inst.counts.copy()
            col = int(np.flatnonzero(counts[idx[k]])[0])
            counts[idx[k], col] = -(-d[0] * d[0] // d[k])
            out.append((idx[k], _with_counts(inst, counts)))
        return out
    boxes = _boxes(inst)
    for k in range(1, len(boxes)):
        x = boxes[k]
        counts = inst.counts.copy()
        counts[x.index, x.col] += _alt_box_size(boxes, k) - x.N
        out.append((x.index, _with_counts(inst, counts)))
    return out


def _with_counts(inst, counts):
    return build_instance(counts, list(inst.box_labels), list(inst.community_labels))


def alternate_instance(inst, setting=None, a=None):
    """``(a, D')``. Without ``a``, picks the candidate whose modified community is largest."""
    cands = alternate_candidates(inst, setting)
    if a is not None:
        for box, alt in cands:
            if box == a:
                return box, alt
        raise BoundError(f"box {a} is not an alternate-instance candidate")

    def grown(pair):
        box, alt = pair
        return int(alt.counts[box].max())

    return max(cands, key=grown)


def check_alternate(inst, alt, setting=None):
    """``(mode_flipped, hardness_not_increased)`` for an alternate instance."""
    setting = _resolve_setting(inst, setting)
    before = summarize(inst).mode_set
    after = summarize(alt).mode_set
    flipped = not (before & after)
    if setting is Setting.SEPARATED:
        ok = hardness_separated(alt).H2 <= hardness_separated(inst).H2 * (1 + 1e-12)
    else:
        ok = hardness_box(alt).Hb2 <= hardness_box(inst).Hb2 * (1 + 1e-12)
    return flipped, ok


# ---------------------------------------------------------------- curves


@dataclass(frozen=True)
class BoundCurve:
    bound_id: str
    budgets: tuple  # (None,) for rates
    log_values: tuple
    valid: tuple


def bound_curve(bound_id, inst, budgets):
    bid = parse_id(bound_id) if not isinstance(bound_id, (BoundId, RateId)) else bound_id
    if isinstance(bid, RateId):
        v = lower_bound_rate(bid, inst)
        return BoundCurve(bid.value, (None,), (v,), (math.isfinite(v),))
    vals, oks = [], []
    for t in budgets:
        v, ok = upper_bound(bid, inst, t)
        vals.append(v)
        oks.append(ok)
    return BoundCurve(bid.value, tuple(int(t) for t in budgets), tuple(vals), tuple(oks))


CURVE_COLUMNS = ["bound_id", "t", "log_value", "valid"]


def curves_csv(curves):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_COLUMNS)
    for c in curves:
        for t, v, ok in zip(c.budgets, c.log_values, c.valid):
            w.writerow([c.bound_id, "" if t is None else t, repr(float(v)), int(ok)])
    return buf.getvalue()

