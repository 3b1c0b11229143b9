"""Deterministic, splittable random streams.

Every random decision in the package comes from SplitMix64 streams
(Steele, Lea & Flood 2014): the state advances by the golden-ratio constant
and each output is the state passed through the 64-bit finaliser ``mix64``.
The generator is fixed by this file, so results reproduce across machines
and across the compiled and interpreted kernel paths.

A trial owns two streams, seeded from its 64-bit trial seed:

* stream 0 (``SAMPLE``) drives the oracle's choice of individuals;
* stream 1 (``TIES``) breaks argmax/argmin ties.

Trial seeds are derived from a master seed and integer tags by
:func:`derive_seed` / :func:`derive_seeds`.
"""

import numpy as np

from ._jit import njit, quiet_overflow

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S32 = np.uint64(32)
_MASK32 = np.uint64(0xFFFFFFFF)
_TWO32 = np.uint64(1 << 32)

TAG_SAMPLE = np.uint64(0x5A4D504C45000001)
TAG_TIES = np.uint64(0x5449455300000002)

SAMPLE = 0
TIES = 1
MAX_RANGE = 1 << 32


def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


mix64 = njit(_mix)


@njit
def next_u64(rng, k):
    s = rng[k] + GOLDEN
    rng[k] = s
    return mix64(s)


@njit
def below(rng, k, n):
    """Uniform integer in ``[0, n)`` from stream ``k``; exact (Lemire 2019).

    ``n`` must lie in ``[1, 2**32]``.
    """
    nn = np.uint64(n)
    m = (next_u64(rng, k) >> _S32) * nn
    low = m & _MASK32
    if low < nn:
        thr = (_TWO32 - nn) % nn
        while low < thr:
            m = (next_u64(rng, k) >> _S32) * nn
            low = m & _MASK32
    return np.int64(m >> _S32)


@njit
def seed_streams(rng, seed):
    rng[SAMPLE] = mix64(seed ^ TAG_SAMPLE)
    rng[TIES] = mix64(seed ^ TAG_TIES)


def new_streams(seed):
    """Fresh two-stream state array for a 64-bit ``seed``."""
    rng = np.zeros(2, dtype=np.uint64)
    with quiet_overflow():
        seed_streams(rng, np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    return rng


def _fold(h, v):
    return _mix(h ^ _mix(v + GOLDEN))


def derive_seeds(master_seed, tags, indices):
    """Seeds for ``indices`` under ``master_seed`` and a tuple of int tags.

    ``seed = fold(...fold(fold(mix64(master + G), tag_0), tag_1)..., index)``
    with ``fold(h, v) = mix64(h ^ mix64(v + G))`` and ``G`` the golden
    constant. All arithmetic is modulo 2**64.
    """
    idx = np.asarray(indices, dtype=np.uint64)
    with quiet_overflow():
        h = _mix(np.uint64(master_seed & 0xFFFFFFFFFFFFFFFF) + GOLDEN)
        for tag in tags:
            h = _fold(h, np.uint64(int(tag) & 0xFFFFFFFFFFFFFFFF))
        return _fold(np.full(idx.shape, h, dtype=np.uint64), idx)


def derive_seed(master_seed, *tags):
    """Scalar form of :func:`derive_seeds`; the last tag plays the index."""
    if not tags:
        raise ValueError("need at least one tag")
    return int(derive_seeds(master_seed, tags[:-1], [tags[-1]])[0])
