"""Command-line entry point.

Subcommands:
  generate      emit a labeled snapshot sequence to a directory
  run           one seeded experiment with full reports
  sweep         multi-seed aggregate of the same experiment
  theory-curve  closed-form error curve vs realized error (CSV)
  distortion    distortion lower bound vs Monte-Carlo estimate (CSV)
  eval          recompute metrics from a stored trace.csv
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import load_config
from .errors import ConfigError, EvodriftError
from .graphs import EvolvingGraph, save_sequence
from .harness import SUMMARY_HEADER, _fmt, _load_structure, \
    multi_seed, run_experiment, theory_curve, distortion_curve
from .metrics import LossTrace, mae, mape, rmse
from .rng import RngStream
from .theory import CONVENTION_NOTES


def _seeded(cfg, seed):
    return cfg.seed if seed is None else seed


def _cmd_generate(args) -> int:
    cfg = load_config(args.config)
    if cfg.data.kind == "directory":
        raise ConfigError("generate needs a growth-model data section")
    seed = _seeded(cfg, args.seed)
    frames, getter = _load_structure(cfg, RngStream(seed, "run"))
    labeled = tuple(s.replace(labels=getter(k))
                    for k, s in enumerate(frames))
    save_sequence(EvolvingGraph(labeled), args.out)
    print(f"wrote {len(labeled)} snapshots to {args.out}")
    return 0


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    report = run_experiment(cfg, seed=args.seed, out_dir=args.out)
    for line in report.summary_rows():
        print(line)
    print(f"reports written to {report.out_dir}")
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    base = _seeded(cfg, args.seed)
    seeds = [base + i for i in range(args.seeds)]
    rows, _ = multi_seed(cfg, seeds, out_dir=args.out)
    print(SUMMARY_HEADER)
    for row in rows:
        print(",".join([row["method"], _fmt(row["mape"]), _fmt(row["rmse"]),
                        _fmt(row["mae"]), _fmt(row["se"]),
                        str(row["seeds"])]))
    return 0


def _curve_csv(rows) -> str:
    lines = ["tau,bound,estimate,se"]
    for tau, bound, estimate, se in rows:
        lines.append(",".join([str(tau), _fmt(bound), _fmt(estimate),
                               _fmt(se)]))
    return "\n".join(lines) + "\n"


def _cmd_theory_curve(args) -> int:
    cfg = load_config(args.config)
    rows = theory_curve(cfg, seed=args.seed)
    with open(args.out, "w", newline="\n") as fh:
        fh.write(_curve_csv(rows))
    print(CONVENTION_NOTES, file=sys.stderr)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_distortion(args) -> int:
    cfg = load_config(args.config)
    rows = distortion_curve(cfg, seed=args.seed)
    with open(args.out, "w", newline="\n") as fh:
        fh.write(_curve_csv(rows))
    print(CONVENTION_NOTES, file=sys.stderr)
    print(f"wrote {len(rows)} rows to {args.out}")
    return 0


def _cmd_eval(args) -> int:
    with open(args.trace) as fh:
        lines = [ln for ln in fh.read().split("\n") if ln]
    header = lines[0].split(",")
    expected = ["tau", "actual", "smart", "linear", "doc", "supervised",
                "theorem2"]
    if header != expected:
        raise ConfigError(
            f"unexpected trace header {lines[0]!r}; expected "
            + ",".join(expected))
    columns = {name: [] for name in header}
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != len(header):
            raise ConfigError(f"malformed trace row {ln!r}")
        for name, cell in zip(header, cells):
            columns[name].append(float(cell))
    actual = np.asarray(columns["actual"])
    print(SUMMARY_HEADER)
    for method in ("smart", "linear", "doc", "supervised"):
        values = np.asarray(columns[method])
        if np.isnan(values).all():
            continue
        trace = LossTrace(predicted=values, actual=actual)
        print(",".join([method, _fmt(mape(trace)), _fmt(rmse(trace)),
                        _fmt(mae(trace)), "nan", "1"]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evodrift",
        description="Temporal generalization experiments on evolving graphs")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="emit a labeled snapshot sequence")
    gen.add_argument("--config", required=True)
    gen.add_argument("--out", required=True)
    gen.add_argument("--seed", type=int, default=None)
    gen.set_defaults(func=_cmd_generate)

    run = sub.add_parser("run", help="one seeded experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", required=True)
    run.set_defaults(func=_cmd_run)

    sweep = sub.add_parser("sweep", help="multi-seed aggregate")
    sweep.add_argument("--config", required=True)
    sweep.add_argument("--seeds", type=int, required=True,
                       help="number of consecutive seeds starting at the "
                            "config seed")
    sweep.add_argument("--seed", type=int, default=None,
                       help="override the starting seed")
    sweep.add_argument("--out", required=True)
    sweep.set_defaults(func=_cmd_sweep)

    curve = sub.add_parser("theory-curve",
                           help="closed-form error curve vs realized error")
    curve.add_argument("--config", required=True)
    curve.add_argument("--seed", type=int, default=None)
    curve.add_argument("--out", required=True)
    curve.set_defaults(func=_cmd_theory_curve)

    dist = sub.add_parser("distortion",
                          help="distortion bound vs Monte-Carlo estimate")
    dist.add_argument("--config", required=True)
    dist.add_argument("--seed", type=int, default=None)
    dist.add_argument("--out", required=True)
    dist.set_defaults(func=_cmd_distortion)

    ev = sub.add_parser("eval", help="recompute metrics from a trace")
    ev.add_argument("--trace", required=True)
    ev.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except EvodriftError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
