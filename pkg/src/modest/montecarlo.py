"""Monte Carlo estimation of the probability of error.

Trial ``k`` of algorithm ``A`` at budget ``t`` uses the seed
``derive_seeds(master_seed, (ordinal(A), t), [k])``; with pairing the
ordinal is dropped, so every algorithm sees the same oracle stream at equal
``(t, k)``. Trials are independent and errors are summed, so results do not
depend on how trials are split across threads.
"""

import csv
import io
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import __version__
from . import kernels as K
from ._jit import BACKEND, quiet_overflow
from .algorithms import NEEDS_SIZES, AlgorithmId, KnowledgeMode, check_applicable, prepare, run
from .instance import summarize
from .oracle import IdentityMode, Oracle, make_state
from .rng import derive_seeds

Z95 = 1.96


@dataclass(frozen=True)
class ErrorEstimate:
    algorithm: AlgorithmId
    budget: int
    trials: int
    errors: int
    p_hat: float
    ci_low: float
    ci_high: float

    @property
    def log_p_hat(self):
        return math.log(self.p_hat) if self.errors > 0 else None


@dataclass
class ExperimentConfig:
    instance: object
    algorithms: list  # of (AlgorithmId, KnowledgeMode)
    budgets: list
    trials: int = 2000
    master_seed: int = 0
    pairing: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if any(b2 <= b1 for b1, b2 in zip(self.budgets, self.budgets[1:])):
            raise ValueError("budgets must be strictly increasing")
        if not self.budgets:
            raise ValueError("at least one budget is required")


def wilson_interval(errors, trials, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return 0.0, 1.0
    p = errors / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    centre = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return lo, hi


def trial_seeds(master_seed, alg, t, indices, pairing=False):
    tags = (int(t),) if pairing else (AlgorithmId(alg).value, int(t))
    return derive_seeds(master_seed, tags, indices)


def _oracle_mode(alg):
    return IdentityMode.IDENTITYLESS if alg is AlgorithmId.SFM else IdentityMode.IDENTITY


def _sizes(instance, knowledge):
    if knowledge.box_sizes_known:
        return summarize(instance).box_sizes
    return None


def run_trial(instance, alg, knowledge, t, trial_seed):
    """One trial through the Python API; True when the estimate misses the mode set."""
    alg = AlgorithmId(alg)
    oracle = Oracle(instance, trial_seed, _oracle_mode(alg))
    result = run(alg, oracle, t, _sizes(instance, knowledge))
    return result.estimate not in summarize(instance).mode_set


def trial_errors(instance, alg, knowledge, t, seeds, threads=1):
    """Per-trial error flags (uint8) for the given seeds, via the batch kernel."""
    alg = AlgorithmId(alg)
    check_applicable(alg, instance)
    sched, known = prepare(alg, instance.b, t, _sizes(instance, knowledge))
    summary = summarize(instance)
    is_mode = np.zeros(instance.m, dtype=np.bool_)
    is_mode[list(summary.mode_set)] = True
    seeds = np.asarray(seeds, dtype=np.uint64)
    out = np.zeros(seeds.shape[0], dtype=np.uint8)

    def work(lo, hi):
        state = make_state(instance.counts)
        ws = K.make_workspace(instance.b, instance.m)
        with quiet_overflow():
            K.run_batch(alg.value, state, ws, int(t), sched, known, seeds[lo:hi], is_mode, out[lo:hi])

    n = seeds.shape[0]
    threads = max(1, min(int(threads), n))
    if threads == 1:
        work(0, n)
    else:
        edges = np.linspace(0, n, threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(work, edges[:-1], edges[1:]))
    return out


def estimate_error(instance, alg, knowledge, t, trials, master_seed, pairing=False, threads=1):
    alg = AlgorithmId(alg)
    seeds = trial_seeds(master_seed, alg, t, np.arange(trials), pairing)
    errors = int(trial_errors(instance, alg, knowledge, t, seeds, threads).sum())
    lo, hi = wilson_interval(errors, trials)
    return ErrorEstimate(alg, int(t), int(trials), errors, errors / trials, lo, hi)


def sweep(config, threads=1):
    """Every (algorithm, budget) pair of ``config``, algorithm-major."""
    out = []
    for alg, knowledge in config.algorithms:
        for t in config.budgets:
            out.append(
                estimate_error(
                    config.instance, alg, knowledge, t, config.trials, config.master_seed, config.pairing, threads
                )
            )
    return out


def exact_error(instance, alg, t, max_sequences=10**6):
    """Exact error probability of SFM or DSM on a mixed instance.

    Enumerates all ``N**t`` equally likely individual sequences; a tie among
    ``k`` leaders of which ``h`` are modes counts ``1 - h/k``. Returns a
    :class:`~fractions.Fraction`.
    """
    alg = AlgorithmId(alg)
    if alg not in (AlgorithmId.SFM, AlgorithmId.DSM):
        raise ValueError("exact enumeration covers SFM and DSM only")
    check_applicable(alg, instance)
    row = [int(x) for x in instance.counts[0]]
    N = sum(row)
    if N ** t > max_sequences:
        raise ValueError(f"{N}**{t} sequences exceeds the limit {max_sequences}")
    comm = [j for j, d in enumerate(row) for _ in range(d)]
    modes = summarize(instance).mode_set
    m = len(row)
    total = Fraction(0)
    for seq in itertools.product(range(N), repeat=t):
        tally = [0] * m
        if alg is AlgorithmId.SFM:
            for g in seq:
                tally[comm[g]] += 1
        else:
            for g in set(seq):
                tally[comm[g]] += 1
        top = max(tally)
        leaders = [j for j in range(m) if tally[j] == top]
        hits = sum(1 for j in leaders if j in modes)
        total += 1 - Fraction(hits, len(leaders))
    return total / N ** t


CSV_COLUMNS = ["algorithm", "t", "trials", "errors", "p_hat", "ci_low", "ci_high", "log_p_hat"]


def results_csv(estimates):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for e in estimates:
        lp = e.log_p_hat
        w.writerow(
            [e.algorithm.name, e.budget, e.trials, e.errors, repr(e.p_hat), repr(e.ci_low), repr(e.ci_high),
             "" if lp is None else repr(lp)]
        )
    return buf.getvalue()


def write_results(estimates, prefix, config_echo=None, wall_time=None):
    """Write ``<prefix>.csv`` and the ``<prefix>.meta.json`` sidecar."""
    csv_path = f"{prefix}.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(results_csv(estimates))
    meta = {
        "config": config_echo,
        "wall_time_s": wall_time,
        "library_version": __version__,
        "backend": BACKEND,
        "written_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    with open(f"{prefix}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")
    return csv_path


def parse_algorithms(entries):
    """Config ``algorithms`` entries: names or ``{"id": ..., "box_sizes_known": ...}``."""
    out = []
    for e in entries:
        if isinstance(e, str):
            alg = AlgorithmId.parse(e)
            known = alg in NEEDS_SIZES
        else:
            alg = AlgorithmId.parse(e["id"])
            known = bool(e.get("box_sizes_known", alg in NEEDS_SIZES))
        out.append((alg, KnowledgeMode(known)))
    return out

