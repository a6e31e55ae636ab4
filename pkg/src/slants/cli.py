"""Command-line interface.

Subcommands:
  gen    write a synthetic benchmark series as CSV
  fit    stream a CSV series through the online fitter and write reports
  graph  re-extract the causality DOT file from a saved snapshot
  scale  time full sequential passes at several stream lengths

All numeric output uses 12 significant digits with C-locale formatting,
so identical inputs and options reproduce byte-identical files.
"""

import argparse
import sys

import numpy as np

from . import _backend
from .bench import scaling_harness
from .generators import generate
from .pipeline import ArBaseline, FitConfig, StreamModel
from .tuning import WeightSchedule

# config-file keys: name -> parser (flag names match with dashes)
_CONFIG_KEYS = {
    "target": int,
    "all_targets": lambda s: s.lower() == "true",
    "lag": int,
    "basis_size": int,
    "degree": int,
    "schedule": str,
    "forgetting_factor": float,
    "q_lo": float,
    "q_hi": float,
    "warmup": int,
    "nu": float,
    "delta": float,
    "window": int,
    "window_mode": str,
    "em_iters": int,
    "em_tol": float,
    "lambda_scale": float,
    "tau_scale": float,
    "group_floor": float,
    "step2": lambda s: s.lower() == "true",
    "zeta": float,
    "split": int,
    "ar_order": int,
    "outputs": str,
    "backend": str,
}


def _fmt(x):
    return format(float(x), ".12g")


def _read_series(path):
    """Parse a numeric CSV (optional single header line) into an array.

    Malformed cells are reported with their 1-based line number.
    """
    rows = []
    width = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if lineno == 1:
                try:
                    rows.append([float(c) for c in cells])
                except ValueError:
                    continue  # header line
                width = len(cells)
                continue
            try:
                parsed = [float(c) for c in cells]
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
            if width is None:
                width = len(parsed)
            elif len(parsed) != width:
                raise ValueError(
                    f"{path}: line {lineno}: expected {width} columns, "
                    f"got {len(parsed)}"
                )
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return np.asarray(rows)


def _parse_config_file(path):
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected key=value")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _CONFIG_KEYS:
                raise ValueError(f"{path}: line {lineno}: unknown key {key!r}")
            try:
                out[key] = _CONFIG_KEYS[key](value)
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}: bad value for {key!r}: {value!r}"
                ) from None
    return out


def _add_model_flags(p):
    p.add_argument("--lag", type=int, default=8, help="lag order L")
    p.add_argument("--basis-size", type=int, default=10,
                   help="spline basis functions per covariate")
    p.add_argument("--degree", type=int, default=2)
    p.add_argument("--schedule", choices=["harmonic", "forgetting"],
                   default="harmonic")
    p.add_argument("--forgetting-factor", type=float, default=0.99,
                   help="past-data multiplier f of the forgetting schedule; "
                        "the per-step gain is 1 - f")
    p.add_argument("--q-lo", type=float, default=0.01)
    p.add_argument("--q-hi", type=float, default=0.99)
    p.add_argument("--warmup", type=int, default=None)
    p.add_argument("--nu", type=float, default=1.05)
    p.add_argument("--delta", type=float, default=1.5)
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--window-mode", choices=["tumbling", "sliding"],
                   default="tumbling")
    p.add_argument("--em-iters", type=int, default=5)
    p.add_argument("--em-tol", type=float, default=1e-7)
    p.add_argument("--lambda-scale", type=float, default=0.1)
    p.add_argument("--tau-scale", type=float, default=0.5)
    p.add_argument("--group-floor", type=float, default=1e-8)
    p.add_argument("--step2", action="store_true",
                   help="run the backward-elimination refinement stage")
    p.add_argument("--zeta", type=float, default=0.4)
    p.add_argument("--split", type=int, default=None,
                   help="refinement split time T1 (default: half the stream)")
    p.add_argument("--backend", choices=["auto", "python", "compiled"],
                   default="auto")


def _config_from_args(args):
    if args.schedule == "harmonic":
        schedule = WeightSchedule()
    else:
        c = 1.0 - args.forgetting_factor
        schedule = WeightSchedule(kind="constant", c=c)
    return FitConfig(
        lag=args.lag,
        basis_size=args.basis_size,
        degree=args.degree,
        schedule=schedule,
        q_lo=args.q_lo,
        q_hi=args.q_hi,
        warmup=args.warmup,
        nu=args.nu,
        delta=args.delta,
        window=args.window,
        window_mode=args.window_mode,
        em_iters=args.em_iters,
        em_tol=args.em_tol,
        lambda_scale=args.lambda_scale,
        tau_scale=args.tau_scale,
        group_floor=args.group_floor,
        step2=args.step2,
        zeta=args.zeta,
        split=args.split,
    )


def cmd_gen(args):
    data = generate(args.experiment, args.length, args.seed)
    lines = ["," .join(f"x{d + 1}" for d in range(data.shape[1]))]
    for row in data:
        lines.append(",".join(_fmt(v) for v in row))
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {args.out} ({data.shape[0]} rows, {data.shape[1]} dims)")
    return 0


def _write(path, lines):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_fit(args):
    _backend.use(args.backend)
    data = _read_series(args.input)
    dim = data.shape[1]
    if args.all_targets:
        targets = list(range(dim))
    else:
        if not 1 <= args.target <= dim:
            raise ValueError(
                f"--target {args.target} outside 1..{dim} (series has {dim} "
                "columns)"
            )
        targets = [args.target - 1]
    config = _config_from_args(args)
    min_len = config.lag + config.warmup_length
    if data.shape[0] <= min_len:
        raise ValueError(
            f"series too short: {data.shape[0]} observations, need more than "
            f"{min_len} for lag {config.lag} plus {config.warmup_length} "
            "warm-up samples"
        )

    outputs = set((args.outputs or "auto").split(","))
    if "auto" in outputs:
        outputs = {"errors", "components", "tuning"}
        if args.all_targets:
            outputs.add("graph")
        if config.step2:
            outputs.add("selection")
    multi = len(targets) > 1

    model = StreamModel(dim, targets, config)
    ar = {j: ArBaseline(args.ar_order, config.schedule)
          for j in targets} if args.ar_order else None
    records = {j: [] for j in targets}
    ar_errs = {j: [] for j in targets}
    for x in data:
        ar_now = {}
        if ar is not None:
            for j in targets:
                ar_now[j] = ar[j].push(x[j])
        for rec in model.push(x):
            records[rec.target].append(rec)
            if ar is not None:
                ar_errs[rec.target].append(ar_now[rec.target])
    if model.phase != "run":
        raise ValueError("series too short: warm-up never completed")

    import os

    os.makedirs(args.outdir, exist_ok=True)
    written = []

    if "errors" in outputs:
        cols = ["t", "y", "yhat", "err", "cum_avg_err"]
        if ar is not None:
            cols += ["ar_err", "ar_cum_avg"]
        lines = [",".join((["target"] if multi else []) + cols)]
        for j in targets:
            ar_sum = 0.0
            for k, rec in enumerate(records[j]):
                vals = [str(rec.t), _fmt(rec.y), _fmt(rec.yhat),
                        _fmt(rec.err), _fmt(rec.cum_avg)]
                if ar is not None:
                    e = ar_errs[j][k]
                    e = float("nan") if e is None else e
                    ar_sum += e
                    vals += [_fmt(e), _fmt(ar_sum / (k + 1))]
                if multi:
                    vals.insert(0, str(j + 1))
                lines.append(",".join(vals))
        path = os.path.join(args.outdir, "errors.csv")
        _write(path, lines)
        written.append(path)

    if "components" in outputs:
        cols = ["covariate", "lag", "x", "f_hat"]
        lines = [",".join((["target"] if multi else []) + cols)]
        for j in targets:
            for cov in model.active_set(j):
                d0, l = model.covariate_dim_lag(cov)
                xs, vals = model.component_curve(j, cov)
                for xval, fval in zip(xs, vals):
                    row = [str(d0 + 1), str(l), _fmt(xval), _fmt(fval)]
                    if multi:
                        row.insert(0, str(j + 1))
                    lines.append(",".join(row))
        path = os.path.join(args.outdir, "components.csv")
        _write(path, lines)
        written.append(path)

    if "tuning" in outputs:
        cols = ["t", "lambda", "tau", "err_lo", "err_mid", "err_hi"]
        lines = [",".join((["target"] if multi else []) + cols)]
        for j in targets:
            for rec in records[j]:
                vals = [str(rec.t), _fmt(rec.lam), _fmt(rec.tau),
                        _fmt(rec.win_lo), _fmt(rec.win_mid), _fmt(rec.win_hi)]
                if multi:
                    vals.insert(0, str(j + 1))
                lines.append(",".join(vals))
        path = os.path.join(args.outdir, "tuning.csv")
        _write(path, lines)
        written.append(path)

    if "graph" in outputs:
        path = os.path.join(args.outdir, "graph.dot")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(model.graph().to_dot())
        written.append(path)

    if "selection" in outputs:
        results = model.refine()
        lines = ["target,dim,lag"]
        for j in targets:
            for cov in results[j].selected:
                d0, l = model.covariate_dim_lag(cov)
                lines.append(f"{j + 1},{d0 + 1},{l}")
        path = os.path.join(args.outdir, "selection.txt")
        _write(path, lines)
        written.append(path)

    if args.save_snapshot:
        model.save(args.save_snapshot)
        written.append(args.save_snapshot)

    for j in targets:
        final = records[j][-1]
        active = [
            "x%d@%d" % (model.covariate_dim_lag(c)[0] + 1,
                        model.covariate_dim_lag(c)[1])
            for c in model.active_set(j)
        ]
        print(f"target {j + 1}: {len(records[j])} scored steps, final "
              f"cumulative error {_fmt(final.cum_avg)}, active "
              f"[{' '.join(active)}]")
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_graph(args):
    model = StreamModel.load(args.snapshot)
    dot = model.graph(floor=args.floor).to_dot()
    if args.out == "-":
        sys.stdout.write(dot)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(dot)
        print(f"wrote {args.out}")
    return 0


def cmd_scale(args):
    _backend.use(args.backend)
    t_values = [int(s) for s in args.t_values.split(",") if s]
    methods = (
        ["streaming", "rerun_batch"] if args.method == "both" else [args.method]
    )
    config = _config_from_args(args)
    rows = []
    for method in methods:
        rows.extend(
            scaling_harness(
                t_values, repeats=args.repeats, method=method,
                seed=args.seed, config=config, target=args.target - 1,
            )
        )
    lines = ["T,mean_seconds,stderr_seconds,method"]
    for r in rows:
        lines.append(
            f"{r['T']},{_fmt(r['mean_seconds'])},"
            f"{_fmt(r['stderr_seconds'])},{r['method']}"
        )
    text = "\n".join(lines) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(f"wrote {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="slants",
        description="Streaming sparse additive modeling of vector time "
                    "series.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic series CSV")
    g.add_argument("--experiment", required=True,
                   choices=["1", "2", "3", "scaling"])
    g.add_argument("--length", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", default="-")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("fit", help="fit a series from CSV")
    f.add_argument("--input", required=True)
    f.add_argument("--outdir", required=True)
    f.add_argument("--target", type=int, default=1,
                   help="1-based target column")
    f.add_argument("--all-targets", action="store_true",
                   help="fit every column (causality mode)")
    f.add_argument("--ar-order", type=int, default=0,
                   help="emit a streaming AR(p) baseline alongside")
    f.add_argument("--outputs", default="auto",
                   help="comma list from errors,components,tuning,graph,"
                        "selection (default auto)")
    f.add_argument("--save-snapshot", default=None)
    f.add_argument("--config", default=None, help="key=value config file")
    _add_model_flags(f)
    f.set_defaults(func=cmd_fit)

    gr = sub.add_parser("graph", help="extract DOT from a snapshot")
    gr.add_argument("--snapshot", required=True)
    gr.add_argument("--out", default="-")
    gr.add_argument("--floor", type=float, default=None)
    gr.set_defaults(func=cmd_graph)

    s = sub.add_parser("scale", help="scaling benchmark")
    s.add_argument("--t-values", default="1000,2000,3000")
    s.add_argument("--repeats", type=int, default=3)
    s.add_argument("--method", choices=["streaming", "rerun_batch", "both"],
                   default="streaming")
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--target", type=int, default=2)
    s.add_argument("--out", default="-")
    _add_model_flags(s)
    s.set_defaults(func=cmd_scale)

    return parser


def main(argv=None):
    parser = build_parser()
    args, remaining = parser.parse_known_args(argv)
    try:
        if getattr(args, "config", None):
            defaults = _parse_config_file(args.config)
            sub_actions = [
                a for a in parser._actions
                if isinstance(a, argparse._SubParsersAction)
            ]
            for sp in sub_actions[0].choices.values():
                sp.set_defaults(**{
                    k: v for k, v in defaults.items()
                    if any(k == a.dest for a in sp._actions)
                })
            args = parser.parse_args(argv)
        elif remaining:
            parser.error(f"unrecognized arguments: {' '.join(remaining)}")
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
