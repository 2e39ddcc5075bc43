"""Loading cumulative case files and turning them into daily incidence.

Input files are long-format CSV with the header
``date,region,confirmed,recovered,deaths``. Population and testing figures
live in a separate metadata CSV with header
``region,population,tests_per_million``.
"""
from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import (
    BadWindowError,
    MalformedRowError,
    MissingRegionError,
    NonMonotonicDatesError,
    TooShortError,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("date", "region", "confirmed", "recovered", "deaths")
METADATA_COLUMNS = ("region", "population", "tests_per_million")
ONE_DAY = dt.timedelta(days=1)


def _frozen_int_array(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int64).copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class CumulativeSeries:
    """Cumulative confirmed/recovered/death counts on contiguous days."""

    region: str
    dates: tuple
    confirmed: np.ndarray
    recovered: np.ndarray
    deaths: np.ndarray
    population: Optional[int] = None
    tests_per_million: Optional[float] = None
    warnings: tuple = ()

    def __post_init__(self):
        n = len(self.dates)
        object.__setattr__(self, "dates", tuple(self.dates))
        for name in ("confirmed", "recovered", "deaths"):
            arr = _frozen_int_array(getattr(self, name))
            if arr.shape != (n,):
                raise MalformedRowError(f"{name} has {arr.size} entries for {n} dates")
            if np.any(arr < 0):
                raise MalformedRowError(f"{name} contains negative counts")
            object.__setattr__(self, name, arr)
        for prev, cur in zip(self.dates, self.dates[1:]):
            if cur - prev != ONE_DAY:
                raise NonMonotonicDatesError(f"dates {prev} -> {cur} are not consecutive days")
        if self.population is not None and self.population <= 0:
            raise ValueError("population must be positive")
        if self.tests_per_million is not None and self.tests_per_million < 0:
            raise ValueError("tests_per_million must be non-negative")

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def start_date(self) -> dt.date:
        return self.dates[0]

    @property
    def end_date(self) -> dt.date:
        return self.dates[-1]

    def summary(self) -> dict:
        """Totals in the layout of a per-country dataset table."""
        return {
            "region": self.region,
            "first_date": self.start_date.isoformat(),
            "end_date": self.end_date.isoformat(),
            "total_confirmed": int(self.confirmed[-1]),
            "total_deaths": int(self.deaths[-1]),
            "total_recovered": int(self.recovered[-1]),
            "population": self.population,
            "tests_per_million": self.tests_per_million,
        }


@dataclass(frozen=True, eq=False)
class IncidenceSeries:
    """New cases per day, ``counts[t]`` being day ``start_date + t``."""

    region: str
    start_date: dt.date
    counts: np.ndarray
    warnings: tuple = field(default=())

    def __post_init__(self):
        arr = np.asarray(self.counts)
        if arr.ndim != 1 or arr.size < 1:
            raise TooShortError("an incidence series needs at least one day")
        if np.any(arr < 0):
            raise ValueError("incidence counts must be non-negative")
        if not np.all(np.equal(np.mod(arr, 1), 0)):
            raise ValueError("incidence counts must be whole numbers")
        object.__setattr__(self, "counts", _frozen_int_array(arr))
        object.__setattr__(self, "warnings", tuple(self.warnings))

    def __len__(self) -> int:
        return int(self.counts.size)

    @property
    def last_index(self) -> int:
        return len(self) - 1

    @property
    def end_date(self) -> dt.date:
        return self.start_date + self.last_index * ONE_DAY

    def dates(self) -> list[dt.date]:
        return [self.start_date + t * ONE_DAY for t in range(len(self))]

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.counts)

    def total(self) -> int:
        return int(self.counts.sum())


def _parse_date(text: str, lineno: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError as exc:
        raise MalformedRowError(f"line {lineno}: unparseable date {text!r}") from exc


def _parse_count(text: str, column: str, lineno: int) -> int:
    text = text.strip()
    try:
        value = int(text, 10)
    except ValueError as exc:
        raise MalformedRowError(f"line {lineno}: non-numeric {column} {text!r}") from exc
    if value < 0:
        raise MalformedRowError(f"line {lineno}: negative cumulative {column} {value}")
    return value


def read_region_metadata(path) -> dict[str, dict]:
    """Read ``region,population,tests_per_million`` rows keyed by region."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(METADATA_COLUMNS[:2]) - set(reader.fieldnames or ())
        if missing:
            raise MalformedRowError(f"{path}: metadata header lacks {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                pop = int(row["population"])
                tpm = row.get("tests_per_million")
                tpm = float(tpm) if tpm not in (None, "") else None
            except ValueError as exc:
                raise MalformedRowError(f"{path} line {lineno}: {exc}") from exc
            out[row["region"].strip()] = {"population": pop, "tests_per_million": tpm}
    return out


def bundled_metadata_path() -> Path:
    """Population/testing table shipped with the package (Bangladesh, India, Pakistan)."""
    return Path(__file__).with_name("data") / "regions.csv"


def load_cumulative_csv(path, region: str, metadata_path=None) -> CumulativeSeries:
    """Load one region's cumulative counts from a long-format CSV.

    Rows may appear in any order. Missing interior dates are filled by
    carrying the previous cumulative values forward, and each fill is noted
    in the series' ``warnings``.

    Population and tests-per-million come from ``metadata_path`` when given,
    otherwise from the bundled table if it knows the region.
    """
    path = Path(path)
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_COLUMNS:
            raise MalformedRowError(f"{path}: header must be {','.join(CSV_COLUMNS)}, got {header}")
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not cell.strip() for cell in rec):
                continue
            if len(rec) != len(CSV_COLUMNS):
                raise MalformedRowError(f"line {lineno}: expected {len(CSV_COLUMNS)} fields, got {len(rec)}")
            if rec[1].strip() != region:
                continue
            rows.append(
                (
                    _parse_date(rec[0], lineno),
                    _parse_count(rec[2], "confirmed", lineno),
                    _parse_count(rec[3], "recovered", lineno),
                    _parse_count(rec[4], "deaths", lineno),
                )
            )
    if not rows:
        raise MissingRegionError(f"region {region!r} not found in {path}")

    rows.sort(key=lambda r: r[0])
    for a, b in zip(rows, rows[1:]):
        if a[0] == b[0]:
            raise NonMonotonicDatesError(f"duplicate date {a[0]} for {region}")

    warnings = []
    dates, conf, rec_, dead = [], [], [], []
    for day, c, r, d in rows:
        while dates and day - dates[-1] > ONE_DAY:
            gap = dates[-1] + ONE_DAY
            warnings.append(f"GapFilled: {region} {gap.isoformat()} carried forward")
            dates.append(gap)
            conf.append(conf[-1])
            rec_.append(rec_[-1])
            dead.append(dead[-1])
        dates.append(day)
        conf.append(c)
        rec_.append(r)
        dead.append(d)

    meta = {}
    meta_file = Path(metadata_path) if metadata_path is not None else bundled_metadata_path()
    if meta_file.exists():
        meta = read_region_metadata(meta_file).get(region, {})
    elif metadata_path is not None:
        raise FileNotFoundError(meta_file)

    return CumulativeSeries(
        region=region,
        dates=dates,
        confirmed=conf,
        recovered=rec_,
        deaths=dead,
        population=meta.get("population"),
        tests_per_million=meta.get("tests_per_million"),
        warnings=tuple(warnings),
    )


def to_daily_incidence(c: CumulativeSeries) -> IncidenceSeries:
    """First differences of cumulative confirmed cases.

    Day 0 keeps the first cumulative value. Negative differences (reporting
    corrections) become 0 and are listed in ``warnings``.
    """
    if len(c) < 2:
        raise TooShortError(f"{c.region}: need at least 2 days of cumulative data, got {len(c)}")
    diffs = np.diff(c.confirmed)
    warnings = list(c.warnings)
    for t in np.flatnonzero(diffs < 0):
        day = c.dates[t + 1]
        warnings.append(f"Clamped: {c.region} {day.isoformat()} daily change {int(diffs[t])} set to 0")
    counts = np.concatenate(([c.confirmed[0]], np.clip(diffs, 0, None)))
    return IncidenceSeries(c.region, c.start_date, counts, tuple(warnings))


def window(s: IncidenceSeries, begin: int, end: int) -> IncidenceSeries:
    """Sub-series of days ``begin..end`` inclusive, re-dated to start at ``begin``."""
    if not (0 <= begin < end <= s.last_index):
        raise BadWindowError(f"window [{begin}, {end}] invalid for series of length {len(s)}")
    return IncidenceSeries(
        s.region,
        s.start_date + begin * ONE_DAY,
        s.counts[begin : end + 1],
        s.warnings,
    )


def write_cumulative_csv(dest, region: str, start_date: dt.date, confirmed: Sequence[int],
                         recovered: Optional[Sequence[int]] = None,
                         deaths: Optional[Sequence[int]] = None) -> None:
    """Write one region in the long input schema (the inverse of :func:`load_cumulative_csv`).

    ``dest`` is a path or an open text stream.
    """
    n = len(confirmed)
    recovered = [0] * n if recovered is None else recovered
    deaths = [0] * n if deaths is None else deaths
    rows = [CSV_COLUMNS]
    for t in range(n):
        day = start_date + t * ONE_DAY
        rows.append((day.isoformat(), region, int(confirmed[t]), int(recovered[t]), int(deaths[t])))
    if hasattr(dest, "write"):
        csv.writer(dest, lineterminator="\n").writerows(rows)
        return
    with open(dest, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def convert_jhu_timeseries(confirmed_path, recovered_path, deaths_path, out_path,
                           regions: Sequence[str], through: Optional[dt.date] = None) -> None:
    """Convert JHU CSSE global time-series files into the long input schema.

    The JHU files are wide (one column per ``m/d/yy`` date, one row per
    province/country). Provinces are summed per country. Leading all-zero
    days are dropped so each series starts on the first reported case.
    """
    def read_wide(path):
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            date_cols = [dt.datetime.strptime(h, "%m/%d/%y").date() for h in header[4:]]
            totals: dict[str, np.ndarray] = {}
            for rec in reader:
                country = rec[1].strip()
                vals = np.array([int(float(v or 0)) for v in rec[4:]], dtype=np.int64)
                totals[country] = totals.get(country, 0) + vals
        return date_cols, totals

    dates, conf = read_wide(confirmed_path)
    _, reco = read_wide(recovered_path)
    _, dead = read_wide(deaths_path)
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for region in regions:
            if region not in conf:
                raise MissingRegionError(f"{region!r} not in {confirmed_path}")
            c = conf[region]
            nz = np.flatnonzero(c > 0)
            if nz.size == 0:
                continue
            for t in range(nz[0], len(dates)):
                if through is not None and dates[t] > through:
                    break
                w.writerow([dates[t].isoformat(), region, int(c[t]),
                            int(reco.get(region, np.zeros_like(c))[t]),
                            int(dead.get(region, np.zeros_like(c))[t])])
