"""Shared fixtures and the acceptance summary printed at the end of a run."""
from __future__ import annotations

import datetime
import os
from pathlib import Path

import numpy as np
import pytest

from repronum import epidata, gentime

FIXTURE_REGIONS = ("Bangladesh", "India", "Pakistan")


def pytest_configure(config):
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when not in ("setup", "call"):
        return
    if rep.when == "setup" and rep.passed:
        return
    number, title = mark.args
    results = item.config._acceptance.setdefault(number, {"title": title, "items": []})
    results["items"].append((item.name, rep.outcome))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance", {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        entry = results[number]
        ok = all(o == "passed" for _, o in entry["items"])
        terminalreporter.write_line(f"criterion {number} [{'PASS' if ok else 'FAIL'}] {entry['title']}")
        for name, o in entry["items"]:
            if o != "passed":
                terminalreporter.write_line(f"    {o}: {name}")


@pytest.fixture
def gamma_gt():
    return gentime.discretize_gamma(5.2, 2.8, 20)


def incidence(counts, region="test", start=datetime.date(2020, 1, 1)):
    return epidata.IncidenceSeries(region, start, np.asarray(counts, dtype=np.int64))


def fixture_dir() -> Path | None:
    """Directory holding ``<region>.csv`` snapshot files, or None."""
    env = os.environ.get("REPRONUM_FIXTURE_DIR")
    candidates = [Path(env)] if env else []
    candidates.append(Path(__file__).parent / "fixtures")
    for d in candidates:
        if all((d / f"{r.lower()}.csv").is_file() for r in FIXTURE_REGIONS):
            return d
    return None
