"""The sampling oracle: uniform draws with replacement from a chosen box.

Individuals of box ``i`` are indexed ``0 .. N_i - 1`` and laid out community
by community, so an individual's community is found by binary search over the
row's cumulative counts. The oracle keeps, per individual, the pseudo-identity
it handed out (``-1`` while unseen); tokens are assigned per box in
first-seen order.

The oracle state is a tuple of arrays so that compiled kernels can draw from
it directly (see :func:`draw`); :class:`Oracle` is the Python-facing wrapper.
"""

import csv
import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import rng as _rng
from ._jit import njit, quiet_overflow


class IdentityMode(enum.Enum):
    IDENTITY = "identity"
    IDENTITYLESS = "identityless"


@dataclass(frozen=True)
class Observation:
    box: int
    community: int
    pseudo_id: Optional[int] = None
    first_time: Optional[bool] = None


# Indices into the state tuple returned by make_state().
CUM, SIZES, OFFSETS, PID, NEXT_PID, RNG, CTR, TOUCHED = range(8)
# Slots of the CTR array.
QUERIES, NTOUCHED = 0, 1


def make_state(counts):
    counts = np.asarray(counts, dtype=np.int64)
    sizes = counts.sum(axis=1)
    offsets = np.zeros_like(sizes)
    offsets[1:] = np.cumsum(sizes)[:-1]
    total = int(sizes.sum())
    return (
        np.ascontiguousarray(np.cumsum(counts, axis=1)),
        sizes,
        offsets,
        np.full(total, -1, dtype=np.int64),
        np.zeros(counts.shape[0], dtype=np.int64),
        np.zeros(2, dtype=np.uint64),
        np.zeros(2, dtype=np.int64),
        np.zeros(total, dtype=np.int64),
    )


def copy_state(state):
    return tuple(a.copy() for a in state)


@njit
def reset_state(state, seed):
    """Forget all sampling history and reseed both streams."""
    pid = state[PID]
    touched = state[TOUCHED]
    ctr = state[CTR]
    for k in range(ctr[NTOUCHED]):
        pid[touched[k]] = -1
    ctr[QUERIES] = 0
    ctr[NTOUCHED] = 0
    state[NEXT_PID][:] = 0
    _rng.seed_streams(state[RNG], seed)


@njit
def draw(state, box):
    """One oracle query on ``box``.

    Returns ``(community, first_time, pseudo_id, individual)``; the last is
    the global individual index and is for the oracle's own bookkeeping.
    """
    cum = state[CUM]
    n = state[SIZES][box]
    if n <= 0:
        raise ValueError("cannot sample an empty box")
    idx = _rng.below(state[RNG], _rng.SAMPLE, n)
    comm = np.searchsorted(cum[box], idx, side="right")
    g = state[OFFSETS][box] + idx
    ctr = state[CTR]
    ctr[QUERIES] += 1
    pid = state[PID]
    token = pid[g]
    first = token < 0
    if first:
        nxt = state[NEXT_PID]
        token = nxt[box]
        nxt[box] = token + 1
        pid[g] = token
        state[TOUCHED][ctr[NTOUCHED]] = g
        ctr[NTOUCHED] += 1
    return comm, first, token, g


@njit
def draw_tally(state, box, k, paired, S, sbox, raw):
    """``k`` queries on ``box``, tallied in place.

    Same draws as ``k`` calls to :func:`draw`, fused into one loop so the
    state is unpacked once. ``raw[j]`` counts samples of community ``j``;
    ``S[box, j]`` and ``sbox[box]`` count first-time samples. With
    ``paired``, queries form consecutive pairs and the return value is the
    number of pairs whose two samples were the same individual.
    """
    cum, sizes, offsets, pid, nxt, rngs, ctr, touched = state
    n = sizes[box]
    if n <= 0:
        raise ValueError("cannot sample an empty box")
    off = offsets[box]
    width = cum.shape[1]
    hits = 0
    prev = -1
    for q in range(k):
        idx = _rng.below(rngs, _rng.SAMPLE, n)
        lo = 0
        hi = width
        while lo < hi:
            mid = (lo + hi) >> 1
            if cum[box, mid] <= idx:
                lo = mid + 1
            else:
                hi = mid
        g = off + idx
        token = pid[g]
        raw[lo] += 1
        if token < 0:
            token = nxt[box]
            nxt[box] = token + 1
            pid[g] = token
            touched[ctr[NTOUCHED]] = g
            ctr[NTOUCHED] += 1
            S[box, lo] += 1
            sbox[box] += 1
        if paired:
            if q & 1:
                if token == prev:
                    hits += 1
            else:
                prev = token
    ctr[QUERIES] += k
    return hits


class Oracle:
    """Query oracle for one trial.

    Identical ``(instance, seed, mode)`` give identical observation sequences
    for identical query sequences. In identityless mode observations carry
    only the community.
    """

    def __init__(self, instance, seed, mode=IdentityMode.IDENTITY, trace=False):
        self.instance = instance
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.mode = IdentityMode(mode)
        self.state = make_state(instance.counts)
        with quiet_overflow():
            reset_state(self.state, np.uint64(self.seed))
        self.trace = [] if trace else None

    @property
    def b(self):
        return self.instance.b

    @property
    def m(self):
        return self.instance.m

    @property
    def identity(self):
        return self.mode is IdentityMode.IDENTITY

    @property
    def query_count(self):
        return int(self.state[CTR][QUERIES])

    def seen_in_box(self, box):
        lo = self.state[OFFSETS][box]
        hi = lo + self.state[SIZES][box]
        return int((self.state[PID][lo:hi] >= 0).sum())

    def sample(self, box):
        box = int(box)
        if not 0 <= box < self.b:
            raise IndexError(f"box {box} out of range [0, {self.b})")
        if self.state[SIZES][box] == 0:
            raise ValueError(f"box {box} is empty")
        with quiet_overflow():
            comm, first, token, _ = draw(self.state, box)
        if self.identity:
            obs = Observation(box, int(comm), int(token), bool(first))
        else:
            obs = Observation(box, int(comm))
        if self.trace is not None:
            self.trace.append(obs)
        return obs

    def write_trace(self, path):
        """Dump recorded observations as CSV: step, box, community, first_time."""
        if self.trace is None:
            raise ValueError("oracle was created without trace=True")
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "box", "community", "first_time"])
            for step, obs in enumerate(self.trace, 1):
                ft = "" if obs.first_time is None else int(obs.first_time)
                w.writerow([step, obs.box, obs.community, ft])


def new_oracle(instance, seed, mode=IdentityMode.IDENTITY):
    return Oracle(instance, seed, mode)
