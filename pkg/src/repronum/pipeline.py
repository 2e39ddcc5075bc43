"""Run configured estimators on one region and assemble a report.

A report is written as ``<region>_report.json`` plus one CSV per
trajectory method (``<region>_<method>.csv``) and, when the SIR method runs,
``<region>_sir_trajectory.csv``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import epidata, gentime, restimators, sir
from .errors import BadWindowError, ReproNumError

log = logging.getLogger(__name__)

ALL_METHODS = ("SIR", "EG", "ML", "SB", "TD")
SCALAR_METHODS = ("SIR", "EG", "ML")
TRAJECTORY_METHODS = ("SB", "TD")
MISSING = "—"


@dataclass
class RunConfig:
    input_path: Path
    region: str
    methods: tuple = ALL_METHODS
    gt_mean: float = gentime.DEFAULT_MEAN
    gt_sd: float = gentime.DEFAULT_SD
    gt_max_lag: int = gentime.DEFAULT_MAX_LAG
    begin: Optional[int] = None
    end: Optional[int] = None
    out_dir: Optional[Path] = None
    formats: tuple = ("json", "csv")
    rng_seed: int = 0
    metadata_path: Optional[Path] = None
    population: Optional[int] = None
    grid_max: float = 10.0
    grid_step: float = 0.01
    sb_mapping: str = "mgf"
    resamples: int = 1000
    horizon_days: int = 365
    sir_use_recovered: bool = False

    def __post_init__(self):
        self.methods = tuple(m.upper() for m in self.methods)
        if not self.methods:
            raise ValueError("select at least one method")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        self.formats = tuple(f.lower() for f in self.formats)
        if set(self.formats) - {"json", "csv"}:
            raise ValueError(f"formats must be json and/or csv, got {self.formats}")


@dataclass
class Report:
    region: str
    data: dict
    estimates: dict = field(default_factory=dict)  # method -> REstimate dict
    trajectories: dict = field(default_factory=dict)  # method -> summary dict
    forecast: Optional[dict] = None
    warnings: list = field(default_factory=list)
    failed: list = field(default_factory=list)

    def add_warning(self, code: str, message: str) -> None:
        entry = {"code": code, "message": message}
        if entry not in self.warnings:
            self.warnings.append(entry)

    def to_dict(self) -> dict:
        return {
            "region": self.region,
            "data": self.data,
            "estimates": self.estimates,
            "trajectories": self.trajectories,
            "forecast": self.forecast,
            "warnings": self.warnings,
            "failed_methods": self.failed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        return cls(
            region=d["region"],
            data=d.get("data", {}),
            estimates=d.get("estimates", {}),
            trajectories=d.get("trajectories", {}),
            forecast=d.get("forecast"),
            warnings=list(d.get("warnings", [])),
            failed=list(d.get("failed_methods", [])),
        )


def load_report(path) -> Report:
    with open(path, encoding="utf-8") as fh:
        return Report.from_dict(json.load(fh))


def _split_warning(text: str) -> tuple[str, str]:
    code, sep, rest = text.partition(": ")
    return (code, rest) if sep and code.isidentifier() else ("Warning", text)


def _safe_name(region: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in region)


def _round(x: float, nd: int = 6) -> float:
    return float(round(float(x), nd))


def run(cfg: RunConfig) -> Report:
    """Run every requested method; method failures are recorded, not raised."""
    cum = epidata.load_cumulative_csv(cfg.input_path, cfg.region, cfg.metadata_path)
    population = cfg.population or cum.population
    series = epidata.to_daily_incidence(cum)
    data = cum.summary()
    data["population"] = population
    data["total_incidence"] = series.total()
    data["days"] = len(series)
    report = Report(region=cfg.region, data=data)
    for text in series.warnings:
        report.add_warning(*_split_warning(text))

    g = gentime.discretize_gamma(cfg.gt_mean, cfg.gt_sd, cfg.gt_max_lag)
    begin = 0 if cfg.begin is None else cfg.begin
    end = series.last_index if cfg.end is None else cfg.end
    if not (0 <= begin < end <= series.last_index):
        raise BadWindowError(f"window [{begin}, {end}] invalid for {len(series)} days")
    report.data["window"] = [begin, end]
    report.data["generation_time"] = {
        "mean": _round(g.mean_days), "sd": _round(g.sd_days), "max_lag": g.support,
    }

    out_dir = Path(cfg.out_dir) if cfg.out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    stem = _safe_name(cfg.region)
    rng = np.random.default_rng(cfg.rng_seed)

    for method in ALL_METHODS:
        if method not in cfg.methods:
            continue
        try:
            if method == "SIR":
                _run_sir(cfg, cum, series, population, begin, end, report, out_dir, stem)
            elif method == "EG":
                report.estimates["EG"] = _est_dict(restimators.estimate_eg(series, g, begin, end))
            elif method == "ML":
                report.estimates["ML"] = _est_dict(restimators.estimate_ml(series, g, begin, end))
            elif method == "SB":
                traj = restimators.estimate_sb(series, g, cfg.grid_max, cfg.grid_step,
                                               mapping=cfg.sb_mapping, begin=begin, end=end)
                _store_trajectory(report, traj, traj.summary(), out_dir, stem, cfg)
            elif method == "TD":
                traj = restimators.estimate_td(series, g, cfg.resamples, rng)
                counts = series.counts
                summ = traj.summary(weights=counts, begin=begin, end=end)
                for text in traj.warnings:
                    report.add_warning(*_split_warning(text))
                _store_trajectory(report, traj, summ, out_dir, stem, cfg)
        except (ReproNumError, ValueError, FloatingPointError) as exc:
            code = getattr(exc, "code", type(exc).__name__)
            report.failed.append(method)
            report.add_warning(code, f"{method}: {exc}")
            log.warning("%s failed for %s: %s", method, cfg.region, exc)

    if out_dir is not None and "json" in cfg.formats:
        (out_dir / f"{stem}_report.json").write_text(report.to_json(), encoding="utf-8")
    return report


def _est_dict(est: restimators.REstimate) -> dict:
    d = est.to_dict()
    d["r"] = _round(d["r"])
    d["ci"] = [_round(v) for v in d["ci"]]
    return d


def _store_trajectory(report, traj, summ, out_dir, stem, cfg) -> None:
    entry = {
        "method": traj.method,
        "start_date": traj.start_date.isoformat(),
        "days": len(traj),
        "censored_days": int(traj.censored.sum()),
        "r_mean": _round(summ["r_mean"]),
        "r_low": _round(summ["r_low"]),
        "r_high": _round(summ["r_high"]),
    }
    if out_dir is not None and "csv" in cfg.formats:
        name = f"{stem}_{traj.method}.csv"
        traj.to_csv(out_dir / name)
        entry["csv"] = name
    report.trajectories[traj.method] = entry


def _run_sir(cfg, cum, series, population, begin, end, report, out_dir, stem) -> None:
    if not population:
        raise ValueError("SIR needs a population (region metadata or --population)")
    confirmed = cum.confirmed
    counts = np.concatenate(([confirmed[begin]], series.counts[begin + 1 : end + 1]))
    start = cum.dates[begin]
    sub = epidata.IncidenceSeries(cfg.region, start, counts)
    removed = None
    if cfg.sir_use_recovered:
        removed = (cum.recovered + cum.deaths)[begin : end + 1]
    params = sir.fit(sub, population, recovered=removed)
    if params.no_growth:
        report.add_warning("NoGrowth", f"SIR: fitted beta {params.beta:.3g} <= 1e-6, no epidemic growth")
    rr = sir.r0(params)
    report.estimates["SIR"] = _est_dict(restimators.REstimate("SIR", rr, rr, rr, (begin, end)))
    init = sir.SirState.from_initial_cases(float(confirmed[begin]), population)
    fc = sir.forecast(params, init, population, start, cfg.horizon_days)
    fdict = fc.to_dict()
    for k in ("infection_rate_beta", "recovery_rate_gamma", "r0", "herd_immunity_threshold_pct"):
        fdict[k] = _round(fdict[k])
    report.forecast = fdict
    if out_dir is not None and "csv" in cfg.formats:
        days = (fc.peak_date - start).days + sir.DECLINE_DAYS
        traj = sir.integrate(params, init, max(days, end - begin), dt=sir.FORECAST_DT,
                             start_date=start, population=population).daily()
        traj.to_csv(out_dir / f"{stem}_sir_trajectory.csv")


# ---------------------------------------------------------------- compare

def _cell(report: Report, method: str) -> str:
    if method in report.estimates:
        e = report.estimates[method]
        if method == "SIR":
            return f"{e['r']:.3f}"
        return f"{e['r']:.3f} [{e['ci'][0]:.3f}, {e['ci'][1]:.3f}]"
    if method in report.trajectories:
        t = report.trajectories[method]
        return f"{t['r_mean']:.3f} [{t['r_low']:.3f}, {t['r_high']:.3f}]"
    return MISSING


def compare(reports: Sequence[Report], methods: Sequence[str] = ALL_METHODS) -> list[list[str]]:
    """One row per region, one column per method; missing results are shown as a dash."""
    if not reports:
        raise ValueError("compare needs at least one report")
    rows = [["region", *methods]]
    for rep in reports:
        rows.append([rep.region, *(_cell(rep, m) for m in methods)])
    return rows


def table_to_csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def table_to_text(rows) -> str:
    widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
    lines = []
    for n, r in enumerate(rows):
        lines.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
        if n == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def seed_from_env(default: int) -> int:
    """``REPRONUM_SEED`` wins over the command-line seed when set."""
    value = os.environ.get("REPRONUM_SEED")
    return int(value) if value not in (None, "") else default
