"""Command line entry point: ``egvfl run|compare|selftest``.

The default output directory is ``$EGVFL_OUTDIR`` or ``./egvfl-out``.
"""

import argparse
import csv
import os
import sys

import numpy as np

from .config import load_config, solver_config
from .dataio import load_libsvm, partition_vertical, synth_regression
from .errors import DivergenceError, EgvflError, FormatError
from .metrics import CSV_HEADER, RunRecord, read_csv, solve_oracle
from .problem import apply_beta_trick, make_problem
from .solvers import resolve_gamma, run

ENV_OUTDIR = "EGVFL_OUTDIR"
THRESHOLD = 1e-4


def _dataset(cfg):
    if cfg.data == "libsvm":
        A, b = load_libsvm(cfg.path)
    else:
        A, b = synth_regression(cfg.s, cfg.d, cond=cfg.cond, noise=cfg.noise, seed=cfg.data_seed)
    return partition_vertical(A, b, cfg.n_clients, seed=cfg.data_seed, shuffle=cfg.shuffle)


def _outdir(args, cfg=None):
    if args.outdir:
        return args.outdir
    if cfg is not None and cfg.outdir:
        return cfg.outdir
    return os.environ.get(ENV_OUTDIR, "egvfl-out")


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        return "nan" if np.isnan(v) else f"{v:.3e}"
    return str(v)


def _table(header, rows, out):
    cells = [list(map(str, header))] + [[_fmt(v) for v in r] for r in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    for r in cells:
        out.write("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() + "\n")


def cmd_run(args, out=None):
    out = out or sys.stdout
    try:
        cfg = load_config(args.config)
        dataset = _dataset(cfg)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except EgvflError as exc:
        print(f"{args.config}: {exc}", file=sys.stderr)
        return 2

    outdir = _outdir(args, cfg)
    os.makedirs(outdir, exist_ok=True)
    seeds = [args.seed] if args.seed is not None else cfg.seeds

    base = make_problem(dataset, reg=cfg.reg, lam=cfg.lam, beta_trick=cfg.beta_trick,
                        lambda_max_mode=cfg.lambda_max_mode, lr_convention=cfg.lr_convention,
                        block_form=cfg.block_form)
    oracles = {False: solve_oracle(base)}
    scaled = None
    status = 0
    summary = []
    for entry in cfg.solvers:
        problem = base
        use_beta = entry.options.get("beta_trick", False) and not cfg.beta_trick
        if use_beta:
            if scaled is None:
                scaled = apply_beta_trick(base)
                # same x*, but z* and y* live in the rescaled variables
                oracles[True] = solve_oracle(scaled)
            problem = scaled
        oracle = oracles[bool(use_beta)]
        for seed in seeds:
            sc = solver_config(cfg, entry, seed)
            if "gamma_scale" in entry.options:
                sc.gamma = resolve_gamma(sc, problem) * entry.options["gamma_scale"]
            stem = os.path.join(outdir, f"{entry.name}-{seed}")
            try:
                rec = run(sc, problem, oracle)
            except DivergenceError as exc:
                rec = RunRecord(metadata={"config": sc.to_dict(), "seed": seed,
                                          "status": "failed", "error": str(exc),
                                          "iteration": exc.iteration})
                rec.failed = True
            except EgvflError as exc:
                print(f"{entry.name} (seed {seed}): {exc}", file=sys.stderr)
                status = 1
                continue
            rec.metadata["solver"] = entry.name
            rec.metadata["source"] = cfg.source
            try:
                rec.write(stem + ".csv", stem + ".meta.json")
            except OSError as exc:
                print(f"cannot write {stem}.csv: {exc}", file=sys.stderr)
                status = 1
                continue
            if rec.failed:
                status = 1
                summary.append((entry.name, seed, "diverged", None, None, None, None))
                continue
            last = rec.rows[-1]
            summary.append((entry.name, seed, "ok", last[0], last[4],
                            rec.iterations_to(THRESHOLD), last[1] + last[2], last[3]))
    if not args.quiet:
        _table(("solver", "seed", "status", "iters", "subopt", f"iters<={THRESHOLD:g}",
                "scalars", "flops"), summary, out)
    return status


def _summary(rec):
    last = rec.rows[-1]
    return {
        "iters": last[0], "subopt": last[4], "violation": last[5], "gapstar": last[6],
        "newgap": last[7], "scalars": last[1] + last[2], "flops": last[3],
        f"iters<={THRESHOLD:g}": rec.iterations_to(THRESHOLD),
    }


def cmd_compare(args, out=None):
    out = out or sys.stdout
    try:
        records = [read_csv(p) for p in args.csv]
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sums = [_summary(r) for r in records]
    keys = list(sums[0])
    _table(["file"] + keys, [[os.path.basename(p)] + [s[k] for k in keys]
                              for p, s in zip(args.csv, sums)], out)
    if len(records) == 1:
        return 0
    if all(r.rows == records[0].rows for r in records[1:]):
        out.write("tie: all records are identical\n")
    else:
        out.write("winners (lowest value):\n")
        for k in ("subopt", "violation", "newgap", "scalars", "flops", f"iters<={THRESHOLD:g}"):
            vals = [s[k] for s in sums]
            ok = [(v, i) for i, v in enumerate(vals) if v is not None and not np.isnan(v)]
            if k == "violation" or k == "newgap":
                ok = [(abs(v), i) for v, i in ok]
            if not ok:
                out.write(f"  {k}: none\n")
                continue
            best = min(v for v, _ in ok)
            win = [os.path.basename(args.csv[i]) for v, i in ok if v == best]
            out.write(f"  {k}: {'tie' if len(win) > 1 else win[0]}\n")
    if args.merge:
        with open(args.merge, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("file",) + CSV_HEADER)
            for p, r in zip(args.csv, records):
                for row in r.rows:
                    w.writerow((os.path.basename(p),) + tuple(repr(v) for v in row))
    return 0


def cmd_selftest(args, out=None):
    out = out or sys.stdout
    from .selftest import run_selftest

    failed = run_selftest(lambda_scale=args.inject_lambda_scale,
                          report=lambda m: None if args.quiet else print(m, file=out))
    if failed:
        print("selftest failed: " + ", ".join(failed), file=sys.stderr)
        return 1
    if not args.quiet:
        print("selftest passed", file=out)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="egvfl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--outdir", help=f"output directory (default ${ENV_OUTDIR} or ./egvfl-out)")
        sp.add_argument("--seed", type=int, help="run only this seed")
        sp.add_argument("--quiet", action="store_true", help="suppress the summary table")

    r = sub.add_parser("run", help="run the solver sweep described by a config file")
    r.add_argument("config")
    common(r)
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("compare", help="tabulate and rank record CSVs")
    c.add_argument("csv", nargs="+")
    c.add_argument("--merge", help="also write a long-format merged CSV here")
    common(c)
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("selftest", help="run the built-in invariant suite")
    s.add_argument("--inject-lambda-scale", type=float, default=1.0,
                   help=argparse.SUPPRESS)
    common(s)
    s.set_defaults(func=cmd_selftest)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
