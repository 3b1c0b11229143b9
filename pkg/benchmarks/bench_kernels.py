"""Compiled vs interpreted kernel throughput.

Runs the same batch of trials in two subprocesses, one with numba and one
with MODEST_DISABLE_NUMBA=1, and checks that both return identical per-trial
error flags.

    python benchmarks/bench_kernels.py --trials 200 --t 320
"""

import argparse
import json
import os
import subprocess
import sys

CHILD = r"""
import hashlib, json, sys, time
import numpy as np
from modest._jit import BACKEND
from modest.algorithms import AlgorithmId, KnowledgeMode
from modest.instance import build_instance
from modest.montecarlo import trial_errors, trial_seeds

cfg = json.loads(sys.argv[1])
inst = build_instance(cfg["counts"])
alg = AlgorithmId.parse(cfg["alg"])
seeds = trial_seeds(cfg["seed"], alg, cfg["t"], np.arange(cfg["trials"]))
know = KnowledgeMode(False)
trial_errors(inst, alg, know, cfg["t"], seeds[:2])  # compile / warm up
t0 = time.perf_counter()
flags = trial_errors(inst, alg, know, cfg["t"], seeds)
dt = time.perf_counter() - t0
print(json.dumps({"backend": BACKEND, "seconds": dt, "errors": int(flags.sum()),
                  "digest": hashlib.sha256(flags.tobytes()).hexdigest()}))
"""


def run_child(cfg, disable):
    env = dict(os.environ)
    env["MODEST_DISABLE_NUMBA"] = "1" if disable else "0"
    out = subprocess.run([sys.executable, "-c", CHILD, json.dumps(cfg)], env=env, check=True,
                         capture_output=True, text=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alg", default="DSM")
    ap.add_argument("--counts", default="[[40,36,25,21,21,17]]", help="instance matrix as JSON")
    ap.add_argument("--t", type=int, default=320)
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    cfg = {"alg": args.alg, "counts": json.loads(args.counts), "t": args.t, "trials": args.trials, "seed": args.seed}

    rows = [run_child(cfg, disable=False), run_child(cfg, disable=True)]
    queries = args.trials * args.t
    print(f"{args.alg}, t={args.t}, {args.trials} trials ({queries} oracle queries)")
    for r in rows:
        print(f"  {r['backend']:6s} {r['seconds']:9.4f} s  {queries / r['seconds']:12.0f} queries/s  errors={r['errors']}")
    print(f"  speedup: {rows[1]['seconds'] / rows[0]['seconds']:.1f}x")
    same = rows[0]["digest"] == rows[1]["digest"]
    print(f"  identical error flags: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
