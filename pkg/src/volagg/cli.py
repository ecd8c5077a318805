"""Command-line entry point: ``volagg simulate|evaluate|corr-test|report``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness
from .errors import VolAggError

EXIT_FAILURE = 1


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--steps", type=int, help="normalized observations per replication")
    p.add_argument("--out-sample", type=int)
    p.add_argument("--out-dir")
    p.add_argument("--lambda", dest="lambda_", type=float, metavar="LAMBDA")
    p.add_argument("--n", type=int, help="time-domain window")
    p.add_argument("--window", type=int, help="state-domain window")
    bw = p.add_mutually_exclusive_group()
    bw.add_argument("--bandwidth", type=float)
    bw.add_argument("--gcv", action="store_true", help="choose the bandwidth by GCV (default)")
    p.add_argument("--kernel", choices=["epanechnikov", "gaussian"])
    p.add_argument("--ape-k", help="comma-separated APE half-widths, e.g. 0,1,2")
    p.add_argument("--density-bw", type=float)
    p.add_argument("--portfolio", help="comma-separated weights for the correlation diagnostic")
    p.add_argument("--jobs", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    epilog = "config keys:\n" + "\n".join(f"  {k:<12} {v}" for k, v in harness.CONFIG_KEYS.items())
    parser = argparse.ArgumentParser(
        prog="volagg",
        description="Aggregated time/state-domain volatility matrix estimation.",
        epilog=epilog,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulation study on the affine yield model",
                         epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(sim)
    sim.add_argument("--emit-panels", action="store_true", help="also write simulated panels and truth CSVs")

    ev = sub.add_parser("evaluate", help="rolling PE/APE on a CSV panel",
                        epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(ev)
    ev.add_argument("--input", help="CSV of levels (optional leading date column)")
    ev.add_argument("--factor-col", help="factor column name or index")
    ev.add_argument("--delta", help="sampling interval in years, e.g. 1/52")

    corr = sub.add_parser("corr-test", help="time/state independence diagnostic",
                          epilog=epilog, formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(corr)

    rep = sub.add_parser("report", help="print a summary written by an earlier run")
    rep.add_argument("path", help="a *_summary.json file or a directory of them")
    return parser


_FLAG_TO_KEY = {
    "seed": "seed",
    "reps": "reps",
    "steps": "steps",
    "out_sample": "out_sample",
    "out_dir": "out_dir",
    "lambda_": "lambda",
    "n": "n",
    "window": "window",
    "bandwidth": "bandwidth",
    "kernel": "kernel",
    "ape_k": "ape_k",
    "density_bw": "density_bw",
    "portfolio": "portfolio",
    "jobs": "jobs",
    "input": "input",
    "factor_col": "factor_col",
    "delta": "delta",
}


def config_from_args(args: argparse.Namespace) -> harness.RunConfig:
    values = harness.read_config_file(args.config) if args.config else {}
    values["mode"] = args.command
    for flag, key in _FLAG_TO_KEY.items():
        v = getattr(args, flag, None)
        if v is not None:
            values[key] = v
    if getattr(args, "gcv", False):
        values["bandwidth"] = "gcv"
    if getattr(args, "emit_panels", False):
        values["emit_panels"] = True
    return harness.config_from_mapping(values)


def _print_summary(summary: dict, out=None) -> None:
    out = out or sys.stdout
    table = summary.get("ape_table", {})
    names = harness.ESTIMATORS
    print(f"{'':>10}" + "".join(f"{n:>14}" for n in names), file=out)
    for k in sorted(table, key=int):
        label = "PE" if k == "0" else f"APE k={k}"
        print(f"{label:>10}" + "".join(f"{table[k][n]:>14.4e}" for n in names), file=out)
    for loss in ("entropy", "quadratic"):
        if loss in summary:
            print(f"{loss:>10}" + "".join(f"{summary[loss][n]['mean']:>14.4e}" for n in names), file=out)
    corr = summary.get("correlation")
    if corr:
        print(f"correlation: mean |r| = {corr['mean_abs_r']:.3f}, "
              f"accepted at 5% = {corr['accept_fraction']:.1%} (band +/-{corr['band']:.3f})", file=out)


def _report(path: str) -> int:
    p = Path(path)
    files = sorted(p.glob("*_summary.json")) if p.is_dir() else [p]
    if not files:
        raise FileNotFoundError(f"no *_summary.json under {p}")
    for f in files:
        print(f"== {f.name}")
        _print_summary(json.loads(f.read_text(encoding="utf-8")))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "report":
            return _report(args.path)
        cfg = config_from_args(args)
        if args.command == "evaluate":
            if cfg.input_path is None:
                parser.error("evaluate needs --input (or 'input' in the config file)")
            summary = harness.run_real_evaluation(cfg)
        elif args.command == "corr-test":
            summary = harness.run_corr_test(cfg)
        else:
            summary = harness.run_simulation_study(cfg)
        _print_summary(summary)
        if cfg.out_dir:
            print(f"outputs written to {cfg.out_dir} ({cfg.tag}_*)")
        return 0
    except (VolAggError, ValueError, OSError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("line", "column", "required", "rep", "seed"):
            if getattr(exc, attr, None) is not None:
                err[attr] = getattr(exc, attr)
        print(json.dumps(err), file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
