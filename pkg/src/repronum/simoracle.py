"""Synthetic incidence from a discrete-day Poisson branching process.

Day 0 holds the seed cases. Every later day draws
``N_t ~ Poisson(R * sum_j w_j N_{t-j})``. There is no susceptible
depletion, so the true reproduction number is constant.
"""
from __future__ import annotations

import datetime
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .epidata import IncidenceSeries
from .errors import ExplodedError
from .gentime import GenTimeDist


@dataclass(frozen=True)
class SimConfig:
    true_r: float
    gt: GenTimeDist
    seed_cases: int = 10
    horizon_days: int = 120
    rng_seed: int = 0
    max_total_cases: int = 1_000_000
    start_date: datetime.date = datetime.date(2020, 1, 1)

    def __post_init__(self):
        if not self.true_r > 0:
            raise ValueError(f"true_r must be positive, got {self.true_r}")
        if self.seed_cases < 1:
            raise ValueError("seed_cases must be >= 1")
        if self.horizon_days < 0:
            raise ValueError("horizon_days must be >= 0")
        if self.max_total_cases < self.seed_cases:
            raise ValueError("max_total_cases must be at least seed_cases")
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be unsigned")


@dataclass(frozen=True, eq=False)
class SimulatedIncidence(IncidenceSeries):
    """Incidence plus the day the case cap stopped the run (None if it never did)."""

    stop_day: Optional[int] = None
    true_r: float = float("nan")


def expected_next(history, true_r: float, gt: GenTimeDist) -> float:
    """Conditional mean of the next day's count: ``true_r * sum_j w_j N_{t-j}``."""
    past = np.asarray(history, dtype=float)[::-1][: gt.support]
    return float(true_r * np.dot(past, gt.weights[: past.size]))


def draw_next(history, true_r: float, gt: GenTimeDist, rng: np.random.Generator) -> int:
    """One Poisson draw of the next day's count given the counts so far."""
    return int(rng.poisson(expected_next(history, true_r, gt)))


def simulate_branching(c: SimConfig) -> SimulatedIncidence:
    """Run the branching process up to ``horizon_days`` or the case cap.

    The run ends after the first day on which the cumulative count reaches
    ``max_total_cases``. If that happens before ``2 * k`` days (k = the
    generation-time support) there is no usable window and
    :class:`ExplodedError` is raised.
    """
    rng = np.random.default_rng(c.rng_seed)
    counts = np.zeros(c.horizon_days + 1, dtype=np.int64)
    counts[0] = c.seed_cases
    total = c.seed_cases
    stop = None
    if total >= c.max_total_cases and c.horizon_days > 0:
        stop = 0
    else:
        for t in range(1, c.horizon_days + 1):
            counts[t] = draw_next(counts[:t], c.true_r, c.gt, rng)
            total += counts[t]
            if total >= c.max_total_cases:
                stop = t
                break
    if stop is not None:
        if stop < 2 * c.gt.support:
            raise ExplodedError(
                f"case cap {c.max_total_cases} reached on day {stop}, before {2 * c.gt.support} days"
            )
        counts = counts[: stop + 1]
    return SimulatedIncidence(
        region=f"sim-R{c.true_r:g}",
        start_date=c.start_date,
        counts=counts,
        stop_day=stop,
        true_r=c.true_r,
    )
