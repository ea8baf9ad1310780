"""``relu-lab`` command line: reproducible experiments writing CSV / JSON artifacts.

Every artifact starts with its resolved configuration (tool version, master
seed, all flags): CSV files carry it on a leading ``#`` comment line, JSON
files under ``"meta"``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .bdp import (Grid1D, RandomBall, bounds_table, estimate_bdp, is_born_dead, lower_bound_d1,
                  max_depth, upper_bound_sym)
from .initializers import RAI, SCHEMES, make_scheme
from .lengthmap import check_recursion, estimate_lengthmap, moment_bounds
from .net import Architecture, forward
from .rng import SeedStreams, master_seed_from_env
from .train import (Outcome, TargetFn, TrainConfig, adam_train, classify_outcome, eval_grid,
                    gen_data, sweep_train, verify_dead_limit)


class UsageError(Exception):
    pass


def parse_ints(text: str) -> list:
    """``"2,3,5"`` or ``"2..30"`` (inclusive) or a mix like ``"1..3,8"``."""
    out = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, b = part.split("..", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list: {text!r}")
    return out


def parse_floats(text: str) -> list:
    try:
        return [float(p) for p in str(text).split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a float list: {text!r}") from None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _meta(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    return {"tool": "relu-lab", "version": __version__, "config": cfg}


def _emit(args, text: str):
    if args.out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(args.out, "w", newline="") as fh:
            fh.write(text)


def _write_csv(args, header, rows):
    buf = io.StringIO()
    buf.write("# " + json.dumps(_meta(args), sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _emit(args, buf.getvalue())


def _write_json(args, payload: dict):
    doc = {"meta": _meta(args), **payload}
    _emit(args, json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _scheme(args):
    try:
        return make_scheme(args.init, bias=args.bias, half_width=args.half_width, std=args.std,
                           gain=args.gain, sigma_w=args.sigma_w)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _positive(name, values):
    if any(v < 1 for v in values):
        raise UsageError(f"{name} must be positive, got {values}")


# -- subcommands --------------------------------------------------------------

def cmd_bdp(args):
    _positive("--widths", args.widths)
    _positive("--depths", args.depths)
    _positive("--din", [args.din])
    _positive("--trials", [args.trials])
    scheme = _scheme(args)
    if args.din == 1:
        data = Grid1D(args.points, args.radius).materialize()
    else:
        data = RandomBall(args.points, args.radius, args.din, args.seed).materialize()
    rows = []
    for n in args.widths:
        for depth in args.depths:
            arch = Architecture.constant(args.din, n, depth)
            est = estimate_bdp(arch, scheme, data, args.trials, seed=args.seed, jobs=args.jobs)
            p_upper = upper_bound_sym(arch.hidden) if scheme.symmetric else None
            p_lower = None
            if args.din == 1 and scheme.symmetric and scheme.bias_free and depth >= 2:
                p_lower = lower_bound_d1(depth, n)
            rows.append((depth, n, args.init, est.trials, est.dead, est.p_hat, est.ci95[0],
                         est.ci95[1], p_lower, p_upper))
    _write_csv(args, ["L", "N", "init", "trials", "dead", "p_hat", "ci_low", "ci_high",
                      "p_lower", "p_upper"], rows)


def cmd_bounds(args):
    _positive("--widths", args.widths)
    rows = [(r.L, r.N, r.p_upper, r.p_lower, r.p_markov) for r in bounds_table(args.widths, args.depths)]
    _write_csv(args, ["L", "N", "p_upper", "p_lower", "p_markov"], rows)


def cmd_diagram(args):
    _positive("--widths", args.widths)
    if any(not 0 < d < 1 for d in args.deltas):
        raise UsageError(f"every delta must lie in (0, 1), got {args.deltas}")
    verify = args.verify_trials is not None
    scheme = _scheme(args) if verify else None
    data = Grid1D(args.points, args.radius).materialize()
    header = ["N", "delta", "max_depth"]
    if verify:
        header += ["p_hat", "ci_low", "ci_high", "confirmed"]
    rows = []
    for n in args.widths:
        for delta in args.deltas:
            depth = max_depth(n, delta)
            row = [n, delta, depth]
            if verify:
                if 2 <= depth <= args.verify_max_depth:
                    est = estimate_bdp(Architecture.constant(1, n, depth), scheme, data,
                                       args.verify_trials, seed=args.seed, jobs=args.jobs)
                    ok = est.p_hat <= delta + 3 * est.se
                    row += [est.p_hat, est.ci95[0], est.ci95[1], ok]
                else:
                    row += [None, None, None, None]
            rows.append(row)
    _write_csv(args, header, rows)


def _train_cfg(args) -> TrainConfig:
    return TrainConfig(epochs=args.epochs, batch_size=args.batch, lr=args.lr, loss=args.loss, m=args.m)


def _arch(args, target):
    depth = args.depth or target.default_arch().depth
    width = args.width or target.d_in + target.d_out
    return Architecture.constant(target.d_in, width, depth, target.d_out)


def _target(args):
    try:
        return TargetFn.parse(args.target)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_train(args):
    target = _target(args)
    scheme = _scheme(args)
    arch = _arch(args, target)
    cfg = _train_cfg(args)
    rng = SeedStreams(args.seed).stream(0)
    params = scheme.sample(arch, rng)
    data = gen_data(target, cfg.m, rng, cfg.r)
    born_dead = is_born_dead(params, data).dead
    report = adam_train(params, data, cfg, rng)
    grid = eval_grid(target, args.grid_points)
    report.predictions = forward(report.params, grid.inputs)
    report.outcome = classify_outcome(report.params, target, grid)
    report.born_dead = bool(born_dead)
    _write_json(args, {"report": report.to_dict(grid.inputs)})


def cmd_sweep(args):
    target = _target(args)
    arch = _arch(args, target)
    cfg = _train_cfg(args)
    _positive("--runs", [args.runs])
    inits = [s.strip() for s in args.init.split(",") if s.strip()]
    rows = []
    kinds = [Outcome.COLLAPSE, Outcome.HALF_TRAINED, Outcome.SUCCESS, Outcome.NOT_COLLAPSED]
    for name in inits:
        ns = argparse.Namespace(**{**vars(args), "init": name})
        scheme = _scheme(ns)
        res = sweep_train(target, arch, scheme, cfg, args.runs, seed=args.seed, jobs=args.jobs,
                          chunk=args.chunk, grid_points=args.grid_points)
        row = [target.value, name, args.runs] + [res.proportion(k) for k in kinds]
        for k in kinds:
            row += list(res.ci(k))
        row += [sum(res.born_dead) / args.runs, res.collapsed_after_training]
        rows.append(row)
    header = ["target", "init", "runs"] + [k.value for k in kinds]
    for k in kinds:
        header += [f"{k.value}_ci_low", f"{k.value}_ci_high"]
    header += ["born_dead", "collapsed_alive_at_init"]
    _write_csv(args, header, rows)


def cmd_lengthmap(args):
    _positive("--width", [args.width])
    _positive("--depth", [args.depth])
    scheme = _scheme(args)
    arch = Architecture((args.din,) + (args.width,) * args.depth)
    x = np.array(args.x) if args.x is not None else None
    if x is not None and x.shape != (args.din,):
        raise UsageError(f"--x needs {args.din} values")
    stats = estimate_lengthmap(arch, scheme, x, args.trials, seed=args.seed)
    verdicts = {}
    if isinstance(scheme, RAI) and args.depth >= 3:
        b = moment_bounds(args.width, scheme.dist.mu1, scheme.dist.mu2, scheme.sigma_w)
        verdicts = {v.layer: v for v in check_recursion(stats, b)}
    rows = []
    for s in stats.layers:
        v = verdicts.get(s.layer)
        rows.append((s.layer, s.mean_q, s.ci95[0], s.ci95[1],
                     v.pred_low if v else None, v.pred_high if v else None,
                     ("pass" if v.passed else "fail") if v else None))
    _write_csv(args, ["layer", "mean_q", "ci_low", "ci_high", "pred_low", "pred_high", "verdict"], rows)


def cmd_verify_dead(args):
    target = _target(args)
    arch = _arch(args, target)
    data = gen_data(target, args.m, args.seed)
    res = verify_dead_limit(arch, data, args.loss, steps=args.steps, lr=args.lr, seed=args.seed)
    _write_json(args, {"result": {
        "constant": res.constant.tolist(), "reference": res.reference.tolist(), "gap": res.gap,
        "first_layer_frozen": res.frozen, "still_dead": res.still_dead,
        "reference_kind": "mean" if args.loss == "L2" else "median",
    }})


# -- parser -------------------------------------------------------------------

def _common(p, jobs=True):
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (falls back to $RELU_LAB_SEED, then 0)")
    if jobs:
        p.add_argument("--jobs", type=int, default=os.cpu_count() or 1, help="parallel workers")
    p.add_argument("--out", default=None, help="output file (default: stdout)")


def _init_flags(p, default):
    p.add_argument("--init", default=default, help=f"one of: {', '.join(SCHEMES)}")
    p.add_argument("--bias", type=float, default=0.0, help="constant bias for --init he")
    p.add_argument("--std", type=float, default=1.0, help="weight std for bias-free-sym")
    p.add_argument("--half-width", type=float, default=None, help="sym-uniform half width")
    p.add_argument("--gain", type=float, default=math.sqrt(2.0), help="orthogonal gain")
    p.add_argument("--sigma-w", type=float, default=None, help="RAI Gaussian scale override")


def _train_flags(p):
    p.add_argument("--target", required=True, help="f1, f2, f3 or f4")
    p.add_argument("--epochs", type=int, default=1000)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--loss", choices=["L2", "L1"], default="L2")
    p.add_argument("--m", type=int, default=3000, help="training points")
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    p.add_argument("--grid-points", type=int, default=401)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="relu-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"relu-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bdp", help="Monte-Carlo born-dead probability sweep over (N, L)")
    p.add_argument("--widths", type=parse_ints, required=True)
    p.add_argument("--depths", type=parse_ints, required=True)
    p.add_argument("--din", type=int, default=1)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--points", type=int, default=101, help="data points")
    p.add_argument("--radius", type=float, default=1.0)
    _init_flags(p, "bias-free-sym")
    _common(p)
    p.set_defaults(func=cmd_bdp)

    p = sub.add_parser("bounds", help="closed-form BDP bounds and the Markov-chain oracle")
    p.add_argument("--widths", type=parse_ints, required=True)
    p.add_argument("--depths", type=parse_ints, required=True)
    _common(p, jobs=False)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("diagram", help="safe (width, depth) design table")
    p.add_argument("--widths", type=parse_ints, default=parse_ints("1..15"))
    p.add_argument("--deltas", type=parse_floats, default=[0.01, 0.1])
    p.add_argument("--verify-trials", type=int, default=None,
                   help="also estimate the BDP at each (N, max_depth) point")
    p.add_argument("--verify-max-depth", type=int, default=100)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--radius", type=float, default=1.0)
    _init_flags(p, "bias-free-sym")
    _common(p)
    p.set_defaults(func=cmd_diagram)

    p = sub.add_parser("train", help="train one network, emit a JSON report")
    _train_flags(p)
    _init_flags(p, "rai")
    _common(p, jobs=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="collapse-frequency table over independent runs")
    _train_flags(p)
    _init_flags(p, "he,rai")
    p.add_argument("--runs", type=int, default=200)
    p.add_argument("--chunk", type=int, default=100, help="runs trained together")
    _common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("lengthmap", help="per-layer second moments against the predicted bounds")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--din", type=int, default=1)
    p.add_argument("--x", type=parse_floats, default=None, help="input vector (default unit all-ones)")
    p.add_argument("--trials", type=int, default=10_000)
    _init_flags(p, "rai")
    _common(p, jobs=False)
    p.set_defaults(func=cmd_lengthmap)

    p = sub.add_parser("verify-dead", help="train a born-dead net and compare with the loss minimizer")
    p.add_argument("--target", default="f1")
    p.add_argument("--loss", choices=["L2", "L1"], default="L2")
    p.add_argument("--steps", type=int, default=10_000)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--m", type=int, default=256)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--width", type=int, default=None)
    _common(p, jobs=False)
    p.set_defaults(func=cmd_verify_dead)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.seed is None:
        args.seed = master_seed_from_env()
    try:
        args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    return 0


if __name__ == "__main__":
    sys.exit(main())
