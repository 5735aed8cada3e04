"""Command-line entry point: ``drscreen {sweep,cost,shift,screen,gram} ...``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .experiments import (
    DEFAULT_A_GRID, ExperimentConfig, ball_from_class_shift, experiment_cost,
    experiment_shift, kernel_kind, load_problem, sweep_screening_rate,
    write_outputs,
)
from .kernels import gram_linear, gram_rbf, save_gram
from .libsvm import parse_libsvm
from .screening import screen_dr, screen_per_weight
from .solver import ConvergenceError, SolverConfig, check_kkt, train

FULL_TRIALS = 10000
DESK_TRIALS = 1000


def _floats(text):
    try:
        vals = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _lambda_grid(text):
    return None if text == "auto" else _floats(text)


def _kernel(text):
    try:
        kernel_kind(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _common(p):
    p.add_argument("--data", required=True, help="LIBSVM-format training file")
    p.add_argument("--kernel", type=_kernel, default="linear",
                   help="linear | rbf | precomputed:<path> (default linear)")
    p.add_argument("--rbf-mode", choices=("squared", "unsquared"), default="squared")
    p.add_argument("--lambda-grid", type=_lambda_grid, default=None,
                   help="comma-separated lambdas, or 'auto' for n*10^k, k=0,-0.5,...,-3")
    p.add_argument("--a-grid", type=_floats, default=DEFAULT_A_GRID,
                   help="comma-separated class reweighting factors")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--tol", type=float, default=1e-9, help="relative duality-gap target")
    p.add_argument("--paper-scale", action="store_true",
                   help=f"use {FULL_TRIALS} random weights instead of {DESK_TRIALS}")
    icpt = p.add_mutually_exclusive_group()
    icpt.add_argument("--intercept", dest="intercept", action="store_true", default=None,
                      help="append a constant feature (default for the linear kernel)")
    icpt.add_argument("--no-intercept", dest="intercept", action="store_false")


def _config(args, trials=None):
    if trials is None:
        trials = FULL_TRIALS if args.paper_scale else DESK_TRIALS
    return ExperimentConfig(
        data=args.data, kernel=args.kernel, rbf_mode=args.rbf_mode,
        lambdas=args.lambda_grid, a_grid=tuple(args.a_grid), trials=trials,
        seed=args.seed, out=args.out, tol=args.tol, intercept=args.intercept,
    )


def _stem(cfg, problem, what):
    return Path(cfg.out) / f"{problem.name}_{what}_{problem.kernel_label}"


def cmd_sweep(args):
    cfg = _config(args)
    pb = load_problem(cfg)
    rows = sweep_screening_rate(cfg, pb)
    path = write_outputs(_stem(cfg, pb, "sweep"), rows, cfg,
                         {"warnings": pb.warnings, "problem": pb.meta})
    for r in rows:
        print(f"lam={r.lam:<10.4g} a={r.a:<5g} S={r.S:<8.4g} rate={r.rate:.4f} R={r.R:.4g}"
              + ("" if r.converged else "  [not converged]"))
    print(f"wrote {path}")
    return 0


def cmd_cost(args):
    cfg = _config(args)
    pb = load_problem(cfg)
    lams = args.lambda_grid or [None]
    rows = [experiment_cost(cfg, a=args.a, lam=lam, problem=pb) for lam in lams]
    path = write_outputs(_stem(cfg, pb, "cost"), rows, cfg, {"warnings": pb.warnings})
    for r in rows:
        print(f"lam={r['lam']:.4g} remained DRSSS={r['remained_drsss']:.3f} "
              f"ISSS={r['remained_isss']:.3f} time ISSS={r['time_isss']:.3f}s "
              f"DRSSS+ISSS={r['time_drsss_plus_isss']:.3f}s")
    print(f"wrote {path}")
    return 0


def cmd_shift(args):
    cfg = _config(args)
    pb = load_problem(cfg)
    lams = args.lambda_grid or [None]
    rows = [experiment_shift(cfg, a=args.a, lam=lam, trials=args.trials, problem=pb)
            for lam in lams]
    path = write_outputs(_stem(cfg, pb, "shift"), rows, cfg, {"warnings": pb.warnings})
    for r in rows:
        print(f"lam={r['lam']:.4g} shift DRSSS={r['drsss_mean']:.2e}+-{r['drsss_std']:.1e} "
              f"Random={r['random_mean']:.2e}+-{r['random_std']:.1e} "
              f"NaiveSS={r['naive_mean']:.2e}+-{r['naive_std']:.1e}")
    print(f"wrote {path}")
    return 0


def cmd_screen(args):
    cfg = _config(args, trials=1)
    pb = load_problem(cfg)
    ds = pb.ds
    lam = args.lambda_grid[0] if args.lambda_grid else ds.n
    try:
        m = train(ds, np.ones(ds.n), lam, SolverConfig(rel_gap_tol=cfg.tol))
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    kkt = check_kkt(ds, m)
    ball = ball_from_class_shift(ds.y, args.a)
    t0 = time.perf_counter()
    cert = screen_dr(ds, m, ball)
    dt = time.perf_counter() - t0
    base = screen_per_weight(ds, m)
    rows = [{"index": i, "removed": bool(cert.mask[i]), "removed_at_center": bool(base.mask[i]),
             "alpha": float(m.alpha[i]), "margin": float(m.margins[i])} for i in range(ds.n)]
    path = write_outputs(_stem(cfg, pb, f"screen_a{args.a:g}_lam{lam:g}"), rows, cfg)
    summary = {"dataset": pb.name, "kernel": pb.kernel_label, "lam": lam, "a": args.a,
               "S": ball.radius, "R": cert.radius, "r_center": base.radius,
               "rate": cert.rate, "rate_center": base.rate, "seconds": dt,
               "rel_gap": m.gap / max(1.0, abs(m.primal)), "kkt_violation": kkt.max_violation,
               "epochs": m.epochs}
    print(json.dumps(summary, indent=2))
    print(f"wrote {path}")
    return 0


def cmd_gram(args):
    raw = parse_libsvm(args.data)
    if args.kernel == "linear":
        gm = gram_linear(raw.X)
    elif args.kernel == "rbf":
        gm = gram_rbf(raw.X, "auto" if args.zeta is None else args.zeta, args.rbf_mode)
    else:
        print("error: gram export supports linear and rbf kernels", file=sys.stderr)
        return 2
    save_gram(args.output, gm, args.format)
    print(f"wrote {gm.n}x{gm.n} {gm.source} Gram matrix to {args.output}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="drscreen", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="DR screening rate over lambda and a grids")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("cost", help="ISSS versus DRSSS+ISSS remaining samples and time")
    _common(p)
    p.add_argument("--a", type=float, default=0.95)
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("shift", help="parameter shift after sample removal")
    _common(p)
    p.add_argument("--a", type=float, default=0.99)
    p.add_argument("--trials", type=int, default=100)
    p.set_defaults(func=cmd_shift)

    p = sub.add_parser("screen", help="single DR screening run, writes the mask")
    _common(p)
    p.add_argument("--a", type=float, default=0.98)
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("gram", help="compute and export a Gram matrix")
    p.add_argument("--data", required=True)
    p.add_argument("--kernel", choices=("linear", "rbf"), default="rbf")
    p.add_argument("--rbf-mode", choices=("squared", "unsquared"), default="squared")
    p.add_argument("--zeta", type=float, default=None)
    p.add_argument("--format", choices=("csv", "binary"), default=None)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_gram)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
