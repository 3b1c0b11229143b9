"""Successive-rejects phase schedule and integer budget splitting."""

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ._jit import njit


def _log_bar_exact(b):
    if b < 2:
        raise ValueError(f"log_bar needs b >= 2, got {b}")
    return Fraction(1, 2) + sum(Fraction(1, i) for i in range(2, b + 1))


def log_bar(b):
    """``1/2 + sum_{i=2..b} 1/i``."""
    return float(_log_bar_exact(b))


@dataclass(frozen=True)
class SrSchedule:
    budget: int
    arms: int
    cumulative: tuple  # K_0 = 0, K_1, ..., K_{b-1}

    @property
    def per_phase_pulls(self):
        k = self.cumulative
        return tuple(k[r] - k[r - 1] for r in range(1, len(k)))

    @property
    def consumption(self):
        """Total queries: phase r pulls each of the b - r + 1 survivors."""
        b = self.arms
        return sum((b - r + 1) * p for r, p in enumerate(self.per_phase_pulls, 1))

    def as_array(self):
        return np.array(self.cumulative, dtype=np.int64)


def sr_round_lengths(t, b):
    """``K_r = ceil((t - b) / (log_bar(b) (b - r + 1)))`` for ``r = 1..b-1``.

    Evaluated in exact rational arithmetic. Without ceilings the schedule
    consumes exactly ``t - b`` queries and the ceilings add at most ``b``, so
    consumption never exceeds ``t``; the final-phase clamp below is a guard.
    """
    t, b = int(t), int(b)
    if b < 2:
        raise ValueError(f"successive rejects needs b >= 2, got {b}")
    if t <= b:
        raise ValueError(f"budget t={t} must exceed the number of boxes b={b}")
    lb = _log_bar_exact(b)
    ks = [0]
    for r in range(1, b):
        ks.append(math.ceil(Fraction(t - b) / (lb * (b - r + 1))))
    sched = SrSchedule(t, b, tuple(ks))
    over = sched.consumption - t
    if over > 0:
        ks[-1] = max(ks[-2], ks[-1] - math.ceil(over / 2))
        sched = SrSchedule(t, b, tuple(ks))
    return sched


def largest_remainder(total, weights):
    """Split ``total`` in proportion to integer ``weights``.

    Floors of the exact quotas first; leftover units go to the largest
    fractional remainders, lower index first on ties.
    """
    w = np.asarray(weights, dtype=np.int64)
    if w.sum() <= 0 or (w < 0).any():
        raise ValueError("weights must be non-negative with a positive sum")
    out = np.zeros_like(w)
    allocate_lr(int(total), w, np.ones(w.shape[0], dtype=np.bool_), out)
    return [int(x) for x in out]


@njit
def allocate_lr(total, weights, active, out):
    """Kernel form of :func:`largest_remainder` restricted to ``active`` slots.

    Inactive slots receive 0. Returns the number of units handed out.
    """
    wsum = 0
    for i in range(weights.shape[0]):
        out[i] = 0
        if active[i]:
            wsum += weights[i]
    if wsum <= 0:
        return 0
    given = 0
    for i in range(weights.shape[0]):
        if active[i]:
            out[i] = (total * weights[i]) // wsum
            given += out[i]
    left = total - given
    bumped = np.zeros(weights.shape[0], dtype=np.bool_)
    for _ in range(left):
        best = -1
        best_rem = -1
        for i in range(weights.shape[0]):
            if active[i] and not bumped[i]:
                rem = (total * weights[i]) % wsum
                if rem > best_rem:
                    best_rem = rem
                    best = i
        bumped[best] = True
        out[best] += 1
    return total
