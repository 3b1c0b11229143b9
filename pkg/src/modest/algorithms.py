"""Community-mode estimators.

Every ``run_*`` function takes an :class:`~modest.oracle.Oracle` and a query
budget ``t``, spends at most ``t`` queries and returns a :class:`RunResult`.
Box sizes are only available to the estimators that are handed them.
"""

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels as K
from ._jit import quiet_overflow
from .instance import Setting, classify_setting, is_disjoint
from .schedule import sr_round_lengths


class AlgorithmError(ValueError):
    """The algorithm cannot run on this oracle, instance or budget."""


class AlgorithmId(enum.Enum):
    SFM = K.SFM
    DSM = K.DSM
    CC_SR = K.CC_SR
    DS_SR_SEP = K.DS_SR_SEP
    DS_SR_BOX = K.DS_SR_BOX
    DS_PSR = K.DS_PSR
    NDS_SR = K.NDS_SR
    ENDS_SR = K.ENDS_SR
    NDS_SR_MLE = K.NDS_SR_MLE
    DS_UE = K.DS_UE
    DS_PE = K.DS_PE
    NDS_UE = K.NDS_UE
    ENDS_UE = K.ENDS_UE

    @classmethod
    def _missing_(cls, value):
        # Accept names such as "DS-SR-BOX" or "ds_sr_box".
        if isinstance(value, str):
            key = value.strip().upper().replace("-", "_")
            return cls.__members__.get(key)
        return None

    @classmethod
    def parse(cls, name):
        try:
            return cls(name)
        except ValueError:
            raise AlgorithmError(f"unknown algorithm {name!r}") from None


@dataclass(frozen=True)
class KnowledgeMode:
    box_sizes_known: bool = False


@dataclass
class RunResult:
    estimate: int
    queries_used: int
    elimination_order: Optional[list]
    per_community_distinct: np.ndarray


A = AlgorithmId
NEEDS_SIZES = frozenset({A.DS_PSR, A.NDS_SR, A.ENDS_SR, A.DS_PE, A.NDS_UE, A.ENDS_UE})
IDENTITYLESS_OK = frozenset({A.SFM})
SR_FAMILY = frozenset({A.CC_SR, A.DS_SR_SEP, A.DS_SR_BOX, A.DS_PSR, A.NDS_SR, A.ENDS_SR, A.NDS_SR_MLE})
_BOX_FAMILY = frozenset({A.DS_SR_BOX, A.DS_PSR, A.NDS_SR, A.ENDS_SR, A.NDS_SR_MLE})


def check_applicable(alg, instance):
    """Raise :class:`AlgorithmError` unless ``alg`` may run on ``instance``.

    SFM/DSM need a single box; CC-SR and DS-SR (separated) need one community
    per box; the box-SR family needs every community inside a single box;
    the single-phase algorithms take anything. Empty boxes are rejected.
    """
    alg = AlgorithmId(alg)
    setting = classify_setting(instance)
    if (instance.counts.sum(axis=1) == 0).any():
        raise AlgorithmError(f"{alg.name} samples every box, but the instance has an empty box")
    if alg in (A.SFM, A.DSM) and setting is not Setting.MIXED:
        raise AlgorithmError(f"{alg.name} needs a mixed (single-box) instance, got {setting.value}")
    if alg in (A.CC_SR, A.DS_SR_SEP) and setting is not Setting.SEPARATED:
        raise AlgorithmError(f"{alg.name} needs a separated instance, got {setting.value}")
    if alg in _BOX_FAMILY and not is_disjoint(instance):
        raise AlgorithmError(f"{alg.name} needs a community-disjoint instance, got {setting.value}")


def min_budget(alg, b):
    alg = AlgorithmId(alg)
    if alg is A.CC_SR:
        return 2 * b + 2
    if alg in SR_FAMILY and b >= 2:
        return b + 1
    return 0


def prepare(alg, b, t, box_sizes=None, identity=True):
    """Validate a run and build the kernel inputs ``(schedule, known_sizes)``."""
    alg = AlgorithmId(alg)
    t = int(t)
    if t < 0:
        raise AlgorithmError("budget must be non-negative")
    if not identity and alg not in IDENTITYLESS_OK:
        raise AlgorithmError(f"{alg.name} needs identity information")
    if alg in NEEDS_SIZES and box_sizes is None:
        raise AlgorithmError(f"{alg.name} needs the box sizes")
    if alg in (A.CC_SR, A.DS_SR_SEP) and b < 2:
        raise AlgorithmError(f"{alg.name} needs at least two boxes")
    if t < min_budget(alg, b):
        raise AlgorithmError(f"{alg.name} needs t >= {min_budget(alg, b)} with b={b}, got t={t}")
    if alg is A.CC_SR:
        sched = sr_round_lengths(t // 2, b).as_array()
    elif alg in SR_FAMILY and b >= 2:
        sched = sr_round_lengths(t, b).as_array()
    else:
        sched = np.zeros(1, dtype=np.int64)
    if box_sizes is None:
        known = np.zeros(b, dtype=np.int64)
    else:
        known = np.asarray(box_sizes, dtype=np.int64)
        if known.shape != (b,):
            raise AlgorithmError(f"expected {b} box sizes, got {known.shape}")
    return sched, known


def run(alg, oracle, t, box_sizes=None):
    """Run ``alg`` against ``oracle`` with budget ``t``."""
    alg = AlgorithmId(alg)
    check_applicable(alg, oracle.instance)
    sched, known = prepare(alg, oracle.b, t, box_sizes, oracle.identity)
    ws = K.make_workspace(oracle.b, oracle.m)
    before = oracle.query_count
    with quiet_overflow():
        est = K.run_one(alg.value, oracle.state, ws, int(t), sched, known)
    used = oracle.query_count - before
    elim = None
    if alg in SR_FAMILY and oracle.b >= 2:
        elim = [int(x) for x in ws[K.ELIM][: oracle.b - 1]]
    return RunResult(int(est), used, elim, ws[K.S].copy())


def run_sfm(oracle, t):
    """Most frequently sampled community (identity not used)."""
    return run(A.SFM, oracle, t)


def run_dsm(oracle, t):
    """Community with the most distinct individuals seen."""
    return run(A.DSM, oracle, t)


def run_cc_sr(oracle, t):
    return run(A.CC_SR, oracle, t)


def run_ds_sr_separated(oracle, t):
    return run(A.DS_SR_SEP, oracle, t)


def run_ds_sr_box(oracle, t):
    return run(A.DS_SR_BOX, oracle, t)


def run_ds_psr(oracle, t, box_sizes):
    return run(A.DS_PSR, oracle, t, box_sizes)


def run_nds_sr(oracle, t, box_sizes):
    return run(A.NDS_SR, oracle, t, box_sizes)


def run_ends_sr(oracle, t, box_sizes):
    return run(A.ENDS_SR, oracle, t, box_sizes)


def run_nds_sr_mle(oracle, t):
    """NDS-SR with each box size replaced by :func:`estimate_box_size`."""
    return run(A.NDS_SR_MLE, oracle, t)


def run_ds_ue(oracle, t):
    return run(A.DS_UE, oracle, t)


def run_ds_pe(oracle, t, box_sizes):
    return run(A.DS_PE, oracle, t, box_sizes)


def run_nds_ue(oracle, t, box_sizes):
    return run(A.NDS_UE, oracle, t, box_sizes)


def run_ends_ue(oracle, t, box_sizes):
    return run(A.ENDS_UE, oracle, t, box_sizes)


def expected_distinct(n, k):
    """Expected number of distinct individuals in ``k`` uniform draws
    with replacement from ``n``: ``n (1 - (1 - 1/n)**k)``."""
    if n < 1 or k < 0:
        raise ValueError("need n >= 1 and k >= 0")
    return float(K.expected_distinct(int(n), int(k)))


def estimate_box_size(s, k):
    """Moment estimate of a box size from ``s`` distinct out of ``k`` draws.

    Returns the smallest ``n`` with ``expected_distinct(n, k) >= s``; ``s``
    when ``s <= 1``; the cap ``k**2`` when all ``k >= 2`` draws were new.
    """
    if not 0 <= s <= k:
        raise ValueError(f"need 0 <= s <= k, got s={s}, k={k}")
    return int(K.estimate_box_size(int(s), int(k)))
