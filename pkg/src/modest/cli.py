"""Command-line front end.

    modest run --config exp.json --out results/exp [--threads N]
    modest bounds --instance inst.json --bound DSM_COUPON SFM --t-min 0 --t-max 200 --t-step 10 --out curves
    modest ingest --input rows.csv --box-col state --community-col city --normalize trim --out inst.json
    modest info --instance inst.json

Exit status: 0 success, 2 input or parse error. Status 3 means the request
does not apply to the instance, such as a tied mode or a too-small budget.
"""

import argparse
import json
import logging
import math
import os
import sys
import time

from . import __version__
from . import bounds as B
from .algorithms import AlgorithmError, check_applicable, prepare
from .ingest import IngestError, IngestSpec, Normalization, ingest_csv
from .instance import (
    InstanceError, Setting, build_instance, classify_setting, instance_from_json, read_instance, summarize,
    write_instance,
)
from .montecarlo import ExperimentConfig, parse_algorithms, sweep, write_results

EXIT_OK, EXIT_INPUT, EXIT_SEMANTIC = 0, 2, 3

log = logging.getLogger("modest")


class InputError(Exception):
    pass


class SemanticError(Exception):
    pass


# ---------------------------------------------------------------- config


def load_config(path):
    """Parse a run config into ``(ExperimentConfig, echo dict)``.

    Schema: ``instance`` (inline ``{"counts", "boxes"?, "communities"?}`` or a
    bare matrix) or ``instance_path`` (relative to the config file);
    ``algorithms`` (names or ``{"id", "box_sizes_known"}``); ``budgets``;
    ``trials`` (default 2000); ``master_seed`` (required); ``pairing``.
    """
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError("config must be a JSON object")
    try:
        if "instance" in doc:
            raw = doc["instance"]
            inst = instance_from_json(raw) if isinstance(raw, dict) and "boxes" in raw else build_instance(
                raw["counts"] if isinstance(raw, dict) else raw
            )
        elif "instance_path" in doc:
            ipath = os.path.join(os.path.dirname(os.path.abspath(path)), doc["instance_path"])
            inst = read_instance(ipath)
        else:
            raise InputError("config needs 'instance' or 'instance_path'")
        if "master_seed" not in doc:
            raise InputError("config needs an explicit 'master_seed'")
        algs = parse_algorithms(doc["algorithms"])
        cfg = ExperimentConfig(
            instance=inst,
            algorithms=algs,
            budgets=[int(t) for t in doc["budgets"]],
            trials=int(doc.get("trials", 2000)),
            master_seed=int(doc["master_seed"]),
            pairing=bool(doc.get("pairing", False)),
        )
    except InputError:
        raise
    except (KeyError, TypeError, ValueError, OSError) as exc:
        # AlgorithmError and InstanceError are ValueErrors too.
        raise InputError(f"bad config: {exc}") from exc
    return cfg, doc


def check_config(cfg):
    """Applicability of every (algorithm, budget) pair, before any trial runs."""
    sizes = summarize(cfg.instance).box_sizes
    for alg, know in cfg.algorithms:
        try:
            check_applicable(alg, cfg.instance)
            for t in cfg.budgets:
                prepare(alg, cfg.instance.b, t, sizes if know.box_sizes_known else None)
        except AlgorithmError as exc:
            raise SemanticError(str(exc)) from exc


def cmd_run(args):
    cfg, echo = load_config(args.config)
    check_config(cfg)
    t0 = time.perf_counter()
    est = sweep(cfg, threads=args.threads)
    wall = time.perf_counter() - t0
    out_dir = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(out_dir, exist_ok=True)
    path = write_results(est, args.out, echo, wall)
    log.info("wrote %s (%d rows, %.2fs)", path, len(est), wall)
    return EXIT_OK


# ---------------------------------------------------------------- bounds


def _load_instance(path):
    try:
        return read_instance(path)
    except (OSError, InstanceError) as exc:
        raise InputError(str(exc)) from exc


def cmd_bounds(args):
    inst = _load_instance(args.instance)
    if args.t_step < 1 or args.t_min < 0 or args.t_max < args.t_min:
        raise InputError("need 0 <= t-min <= t-max and t-step >= 1")
    try:
        ids = [B.parse_id(x) for x in args.bound]
    except B.BoundError as exc:
        raise InputError(str(exc)) from exc
    budgets = list(range(args.t_min, args.t_max + 1, args.t_step))
    try:
        curves = [B.bound_curve(i, inst, budgets) for i in ids]
    except B.BoundError as exc:
        raise SemanticError(str(exc)) from exc
    text = B.curves_csv(curves)
    if args.out:
        with open(f"{args.out}.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------- ingest


def _column(value):
    return int(value) if value.isdigit() else value


def cmd_ingest(args):
    try:
        spec = IngestSpec(
            path=args.input,
            box_column=_column(args.box_col),
            community_column=_column(args.community_col),
            delimiter=args.delimiter,
            has_header=not args.no_header,
            label_normalization=Normalization(args.normalize),
        )
        report = []
        inst = ingest_csv(spec, report)
    except IngestError as exc:
        raise InputError(str(exc)) from exc
    write_instance(inst, args.out)
    r = report[0]
    log.info("%d rows, %d malformed; %d boxes x %d communities -> %s", r.rows, r.malformed, inst.b, inst.m, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- info


def _num(x):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def instance_info(inst):
    s = summarize(inst)
    setting = classify_setting(inst)
    top = sorted(range(inst.m), key=lambda j: (-s.community_sizes[j], j))[:5]
    info = {
        "b": inst.b,
        "m": inst.m,
        "N": s.total,
        "box_sizes": list(s.box_sizes),
        "top_communities": [{"label": inst.community_labels[j], "size": s.community_sizes[j]} for j in top],
        "mode": sorted(inst.community_labels[j] for j in s.mode_set),
        "setting": setting.value,
    }
    try:
        if setting is Setting.MIXED:
            info["rates"] = {r.value: _num(B.lower_bound_rate(r, inst))
                             for r in (B.RateId.MIXED_IDENTITYLESS, B.RateId.MIXED_IDENTITY)}
        elif setting is Setting.SEPARATED:
            h = B.hardness_separated(inst)
            info["hardness"] = {"H": h.H, "H2": h.H2, "Hc": h.Hc}
            info["rates"] = {"SEPARATED": B.lower_bound_rate(B.RateId.SEPARATED, inst)}
        elif setting is Setting.DISJOINT_BOX:
            h = B.hardness_box(inst)
            info["hardness"] = {"Hb": h.Hb, "Hb2": h.Hb2, "Gamma": h.Gamma}
            info["rates"] = {r.value: _num(B.lower_bound_rate(r, inst))
                             for r in (B.RateId.BOX_MIXED, B.RateId.BOX_GAMMA, B.RateId.ENDS_SR)}
    except B.InfiniteHardness:
        info["hardness"] = "infinite-hardness"
    except B.BoundError as exc:
        info["hardness"] = f"unavailable: {exc}"
    return info


def cmd_info(args):
    inst = _load_instance(args.instance)
    json.dump(instance_info(inst), sys.stdout, indent=1)
    sys.stdout.write("\n")
    return EXIT_OK


# ---------------------------------------------------------------- main


def build_parser():
    p = argparse.ArgumentParser(prog="modest", description="Community mode estimation: simulation and bounds.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="Monte Carlo error estimates from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True, help="output prefix; writes PREFIX.csv and PREFIX.meta.json")
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bounds", help="analytical bound curves and decay rates")
    b.add_argument("--instance", required=True)
    b.add_argument("--bound", nargs="+", required=True, metavar="ID")
    b.add_argument("--t-min", type=int, default=0)
    b.add_argument("--t-max", type=int, default=100)
    b.add_argument("--t-step", type=int, default=1)
    b.add_argument("--out", help="output prefix (default: CSV to stdout)")
    b.set_defaults(func=cmd_bounds)

    g = sub.add_parser("ingest", help="build an instance JSON from a delimited file")
    g.add_argument("--input", required=True)
    g.add_argument("--box-col", required=True, help="column name, or 0-based index")
    g.add_argument("--community-col", required=True)
    g.add_argument("--normalize", choices=[n.value for n in Normalization], default="none")
    g.add_argument("--delimiter", default=",")
    g.add_argument("--no-header", action="store_true")
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_ingest)

    i = sub.add_parser("info", help="summary and hardness metrics of an instance")
    i.add_argument("--instance", required=True)
    i.set_defaults(func=cmd_info)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SemanticError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SEMANTIC


if __name__ == "__main__":
    sys.exit(main())
