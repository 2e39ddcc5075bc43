"""Command line entry point: ``repronum estimate | simulate | compare``."""
from __future__ import annotations

import argparse
import datetime
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import epidata, gentime, pipeline, simoracle
from .errors import ReproNumError


def _add_gt_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--gt-mean", type=float, default=gentime.DEFAULT_MEAN, help="generation time mean (days)")
    p.add_argument("--gt-sd", type=float, default=gentime.DEFAULT_SD, help="generation time sd (days)")
    p.add_argument("--gt-max-lag", type=int, default=gentime.DEFAULT_MAX_LAG, help="longest lag kept (days)")
    p.add_argument("--gt-json", help='JSON object or file, e.g. {"mean": 5.2, "sd": 2.8, "max_lag": 20}')


def _gt_params(args) -> tuple[float, float, int]:
    if not args.gt_json:
        return args.gt_mean, args.gt_sd, args.gt_max_lag
    text = args.gt_json
    if Path(text).is_file():
        text = Path(text).read_text(encoding="utf-8")
    params = json.loads(text)
    return (
        float(params.get("mean", gentime.DEFAULT_MEAN)),
        float(params.get("sd", gentime.DEFAULT_SD)),
        int(params.get("max_lag", gentime.DEFAULT_MAX_LAG)),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="repronum", description="Reproduction-number estimation from incidence data")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="estimate R0/R(t) for one region")
    est.add_argument("--input", required=True, type=Path, help="long-format cumulative CSV")
    est.add_argument("--region", required=True)
    est.add_argument("--methods", default="sir,eg,ml,sb,td", help="comma-separated subset of sir,eg,ml,sb,td")
    _add_gt_args(est)
    est.add_argument("--begin", type=int, help="first day index of the estimation window")
    est.add_argument("--end", type=int, help="last day index of the estimation window (inclusive)")
    est.add_argument("--grid-max", type=float, default=10.0)
    est.add_argument("--grid-step", type=float, default=0.01)
    est.add_argument("--sb-mapping", choices=("mgf", "linear"), default="mgf")
    est.add_argument("--resamples", type=int, default=1000)
    est.add_argument("--out-dir", type=Path, default=Path("."))
    est.add_argument("--format", default="json,csv", help="comma-separated subset of json,csv")
    est.add_argument("--rng-seed", type=int, default=0)
    est.add_argument("--metadata", type=Path, help="region,population,tests_per_million CSV")
    est.add_argument("--population", type=int)
    est.add_argument("--horizon", type=int, default=365, help="minimum SIR forecast horizon (days)")
    est.add_argument("--sir-use-recovered", action="store_true",
                     help="also fit the SIR removed compartment to recovered + deaths")

    sim = sub.add_parser("simulate", help="branching-process incidence with known R")
    sim.add_argument("--r", type=float, required=True, dest="true_r")
    sim.add_argument("--seed-cases", type=int, default=10)
    sim.add_argument("--horizon", type=int, default=120)
    sim.add_argument("--rng-seed", type=int, default=0)
    sim.add_argument("--max-total", type=int, default=1_000_000)
    sim.add_argument("--start-date", type=datetime.date.fromisoformat, default=datetime.date(2020, 1, 1))
    sim.add_argument("--region", help="region label written to the CSV")
    sim.add_argument("--output", type=Path, help="CSV path (default: stdout)")
    _add_gt_args(sim)

    cmp_ = sub.add_parser("compare", help="tabulate several reports")
    cmp_.add_argument("reports", nargs="+", type=Path)
    cmp_.add_argument("--csv", type=Path, help="also write the table as CSV")
    return parser


def _cmd_estimate(args) -> int:
    mean, sd, max_lag = _gt_params(args)
    cfg = pipeline.RunConfig(
        input_path=args.input,
        region=args.region,
        methods=tuple(m.strip() for m in args.methods.split(",") if m.strip()),
        gt_mean=mean,
        gt_sd=sd,
        gt_max_lag=max_lag,
        begin=args.begin,
        end=args.end,
        out_dir=args.out_dir,
        formats=tuple(f.strip() for f in args.format.split(",") if f.strip()),
        rng_seed=pipeline.seed_from_env(args.rng_seed),
        metadata_path=args.metadata,
        population=args.population,
        grid_max=args.grid_max,
        grid_step=args.grid_step,
        sb_mapping=args.sb_mapping,
        resamples=args.resamples,
        horizon_days=args.horizon,
        sir_use_recovered=args.sir_use_recovered,
    )
    report = pipeline.run(cfg)
    sys.stdout.write(report.to_json())
    return 2 if report.failed else 0


def _cmd_simulate(args) -> int:
    mean, sd, max_lag = _gt_params(args)
    g = gentime.discretize_gamma(mean, sd, max_lag)
    cfg = simoracle.SimConfig(
        true_r=args.true_r,
        gt=g,
        seed_cases=args.seed_cases,
        horizon_days=args.horizon,
        rng_seed=pipeline.seed_from_env(args.rng_seed),
        max_total_cases=args.max_total,
        start_date=args.start_date,
    )
    series = simoracle.simulate_branching(cfg)
    region = args.region or series.region
    if series.stop_day is not None:
        logging.getLogger(__name__).warning("case cap reached on day %d", series.stop_day)
    dest = args.output if args.output is not None else sys.stdout
    epidata.write_cumulative_csv(dest, region, series.start_date, np.cumsum(series.counts))
    return 0


def _cmd_compare(args) -> int:
    reports = [pipeline.load_report(p) for p in args.reports]
    rows = pipeline.compare(reports)
    sys.stdout.write(pipeline.table_to_text(rows))
    if args.csv:
        args.csv.write_text(pipeline.table_to_csv(rows), encoding="utf-8")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handlers = {"estimate": _cmd_estimate, "simulate": _cmd_simulate, "compare": _cmd_compare}
    try:
        return handlers[args.command](args)
    except (ReproNumError, OSError, ValueError) as exc:
        code = getattr(exc, "code", type(exc).__name__)
        print(f"repronum: {code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
