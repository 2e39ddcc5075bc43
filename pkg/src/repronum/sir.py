"""SIR compartmental model: integration, fitting and forecasts.

State is kept as population fractions ``(s, i, r)`` with

    ds/dt = -beta s i
    di/dt =  beta s i - gamma i
    dr/dt =  gamma i
"""
from __future__ import annotations

import csv
import datetime
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from .epidata import IncidenceSeries
from .errors import (
    BadHorizonError,
    BadStepError,
    FitDivergedError,
    NoPeakError,
    TooShortError,
)

log = logging.getLogger(__name__)

FIT_DT = 0.1
FORECAST_DT = 0.05
SEVERE_FRACTION = 0.20
ICU_FRACTION = 0.06
FATALITY_FRACTION = 0.035
NO_GROWTH_BETA = 1e-6
DECLINE_DAYS = 30
MAX_FORECAST_DAYS = 5 * 365


@dataclass(frozen=True)
class SirParams:
    beta: float
    gamma: float

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be > 0, got {self.gamma}")

    @property
    def no_growth(self) -> bool:
        """True when the fitted transmission rate collapsed to (numerically) zero."""
        return self.beta <= NO_GROWTH_BETA


@dataclass(frozen=True)
class SirState:
    s: float
    i: float
    r: float

    def __post_init__(self):
        for name in ("s", "i", "r"):
            v = getattr(self, name)
            if not (-1e-12 <= v <= 1 + 1e-12):
                raise ValueError(f"{name}={v} is not a fraction")
        if abs(self.s + self.i + self.r - 1.0) > 1e-9:
            raise ValueError(f"s+i+r = {self.s + self.i + self.r}, expected 1")

    @classmethod
    def from_initial_cases(cls, cases: float, population: int) -> "SirState":
        """Everyone susceptible except ``cases`` infectious individuals."""
        i0 = cases / population
        return cls(1.0 - i0, i0, 0.0)


@dataclass(frozen=True, eq=False)
class SirTrajectory:
    start_date: Optional[datetime.date]
    dt_days: float
    states: np.ndarray  # shape (n, 3): columns s, i, r
    population: int

    def __len__(self) -> int:
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self.states)) * self.dt_days

    def state(self, k: int) -> SirState:
        s, i, r = self.states[k]
        return SirState(float(s), float(i), float(r))

    def cumulative_infected(self) -> np.ndarray:
        return self.population * (1.0 - self.states[:, 0])

    def daily(self) -> "SirTrajectory":
        """Subsample to whole days (requires ``1/dt_days`` to be an integer)."""
        stride = round(1.0 / self.dt_days)
        if not math.isclose(stride * self.dt_days, 1.0):
            raise ValueError(f"dt={self.dt_days} does not divide one day")
        return SirTrajectory(self.start_date, 1.0, self.states[::stride], self.population)

    def to_csv(self, path) -> None:
        """Write ``day,s,i,r,cumulative_infected`` rows."""
        cum = self.cumulative_infected()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["day", "s", "i", "r", "cumulative_infected"])
            for t, (row, c) in enumerate(zip(self.states, cum)):
                w.writerow([f"{t * self.dt_days:.6g}", f"{row[0]:.10g}", f"{row[1]:.10g}",
                            f"{row[2]:.10g}", f"{c:.1f}"])


@dataclass(frozen=True)
class SirForecast:
    beta: float
    gamma: float
    r0: float
    herd_immunity_pct: float
    peak_date: datetime.date
    max_infected: int
    severe: int
    icu: int
    deaths: int

    def to_dict(self) -> dict:
        return {
            "infection_rate_beta": self.beta,
            "recovery_rate_gamma": self.gamma,
            "r0": self.r0,
            "herd_immunity_threshold_pct": self.herd_immunity_pct,
            "peak_of_pandemic": self.peak_date.isoformat(),
            "maximum_infected": self.max_infected,
            "severe_cases": self.severe,
            "patients_need_intensive_care": self.icu,
            "deaths": self.deaths,
        }


def _rk4_path(beta, gamma, s, i, r, n_steps, dt_):
    """Classical RK4 over ``n_steps``; returns a list of ``(s, i, r)`` tuples."""
    out = [(s, i, r)]
    h2 = dt_ / 2.0
    h6 = dt_ / 6.0
    for _ in range(n_steps):
        f1 = beta * s * i
        g1 = gamma * i
        s2, i2 = s - h2 * f1, i + h2 * (f1 - g1)
        f2 = beta * s2 * i2
        g2 = gamma * i2
        s3, i3 = s - h2 * f2, i + h2 * (f2 - g2)
        f3 = beta * s3 * i3
        g3 = gamma * i3
        s4, i4 = s - dt_ * f3, i + dt_ * (f3 - g3)
        f4 = beta * s4 * i4
        g4 = gamma * i4
        inf = h6 * (f1 + 2 * f2 + 2 * f3 + f4)
        rec = h6 * (g1 + 2 * g2 + 2 * g3 + g4)
        s, i, r = s - inf, i + inf - rec, r + rec
        out.append((s, i, r))
    return out


def _check_step(dt_: float) -> None:
    if not (0 < dt_ <= 0.5):
        raise BadStepError(f"dt must be in (0, 0.5], got {dt_}")


def integrate(p: SirParams, init: SirState, days: float, dt: float = FORECAST_DT,
              start_date: Optional[datetime.date] = None, population: int = 1) -> SirTrajectory:
    """Integrate the SIR equations for ``days`` with fixed step ``dt``.

    The trajectory holds ``floor(days / dt) + 1`` states including ``init``.
    """
    _check_step(dt)
    if not days > 0:
        raise BadHorizonError(f"days must be positive, got {days}")
    n_steps = int(math.floor(days / dt + 1e-9))
    path = _rk4_path(p.beta, p.gamma, init.s, init.i, init.r, n_steps, dt)
    return SirTrajectory(start_date, dt, np.array(path), population)


def r0(p: SirParams) -> float:
    return p.beta / p.gamma


def herd_immunity_threshold(r0_value: float) -> float:
    """Percent of the population that must be immune, ``(1 - 1/R0) * 100``, floored at 0."""
    if not r0_value > 0:
        raise ValueError(f"R0 must be positive, got {r0_value}")
    return max(0.0, (1.0 - 1.0 / r0_value) * 100.0)


def _model_cumulative(log_params, s0, i0, n_days, stride, dt_, population):
    beta, gamma = math.exp(log_params[0]), math.exp(log_params[1])
    path = _rk4_path(beta, gamma, s0, i0, 0.0, (n_days - 1) * stride, dt_)
    s = np.fromiter((p[0] for p in path[::stride]), dtype=float, count=n_days)
    return population * (1.0 - s), np.fromiter((p[2] for p in path[::stride]), dtype=float, count=n_days)


def fit(incidence: IncidenceSeries, population: int,
        recovered: Optional[Sequence[float]] = None,
        initial: tuple[float, float] = (0.5, 0.4),
        dt: float = FIT_DT) -> SirParams:
    """Fit ``beta`` and ``gamma`` to cumulative confirmed cases.

    The model starts from ``i(0) = first cumulative count / N`` with nobody
    removed, and the loss is the RMSE between observed cumulative cases and
    ``N (1 - s(t))`` on each observation day. When ``recovered`` (cumulative
    removals, aligned with ``incidence``) is supplied its RMSE against
    ``N r(t)`` is added to the loss.

    Nelder-Mead runs on ``(log beta, log gamma)`` from ``initial`` and stops
    once the simplex is smaller than 1e-7 or after 5000 evaluations. A
    result with ``beta <= 1e-6`` is a no-growth fit (see ``SirParams.no_growth``).
    If no cases arrive after day 0 every ``gamma`` fits equally well with
    ``beta = 0``, so that fit is returned directly with ``gamma = initial[1]``.
    """
    counts = incidence.counts
    n_days = len(counts)
    if n_days < 10:
        raise TooShortError(f"SIR fit needs at least 10 days, got {n_days}")
    observed = np.cumsum(counts).astype(float)
    if not population > observed[-1]:
        raise ValueError(f"population {population} must exceed the cumulative count {observed[-1]:.0f}")
    if observed[0] <= 0:
        raise FitDivergedError("first day has no cases; the SIR model cannot start from i(0) = 0")
    stride = round(1.0 / dt)
    if not math.isclose(stride * dt, 1.0):
        raise BadStepError(f"fit step {dt} must divide one day")
    _check_step(dt)
    if not counts[1:].any():
        log.info("no new cases after day 0; returning the no-growth fit beta = 0")
        return SirParams(0.0, float(initial[1]))
    i0 = float(observed[0] / population)
    s0 = 1.0 - i0
    rec_obs = None if recovered is None else np.asarray(recovered, dtype=float)
    if rec_obs is not None and rec_obs.shape != observed.shape:
        raise ValueError("recovered must align with the incidence series")

    def loss(x):
        if not np.all(np.isfinite(x)) or max(x) > 5:
            return math.inf
        cum, removed = _model_cumulative(x, s0, i0, n_days, stride, dt, population)
        val = math.sqrt(float(np.mean((cum - observed) ** 2)))
        if rec_obs is not None:
            val += math.sqrt(float(np.mean((population * removed - rec_obs) ** 2)))
        return val if math.isfinite(val) else math.inf

    res = minimize(
        loss,
        x0=np.log(np.asarray(initial, dtype=float)),
        method="Nelder-Mead",
        options={"xatol": 1e-7, "fatol": math.inf, "maxfev": 5000, "maxiter": 5000},
    )
    if not math.isfinite(res.fun):
        raise FitDivergedError(f"SIR objective is not finite at the optimum ({res.message})")
    if not res.success:
        log.info("SIR fit stopped early: %s", res.message)
    beta, gamma = (float(v) for v in np.exp(res.x))
    return SirParams(beta, gamma)


def forecast(p: SirParams, init: SirState, population: int, start_date: datetime.date,
             horizon_days: int = 365, dt: float = FORECAST_DT) -> SirForecast:
    """Project the epidemic forward and summarize it.

    ``max_infected`` is the largest number of people simultaneously
    infectious, ``round(N * max_t i(t))``; severe, ICU and death counts are
    20%, 6% and 3.5% of it. The run extends past ``horizon_days`` until
    ``i(t)`` has fallen for 30 consecutive days after its peak, up to five
    years.
    """
    _check_step(dt)
    if horizon_days < 1:
        raise BadHorizonError(f"horizon must be at least one day, got {horizon_days}")
    stride = round(1.0 / dt)
    s, i, r = init.s, init.i, init.r
    daily_i = [i]
    peak_day, peak_i = 0, i
    day = 0
    while True:
        s, i, r = _rk4_path(p.beta, p.gamma, s, i, r, stride, dt)[-1]
        day += 1
        daily_i.append(i)
        if i > peak_i:
            peak_day, peak_i = day, i
        if day >= horizon_days and day - peak_day >= DECLINE_DAYS:
            break
        if day >= MAX_FORECAST_DAYS:
            raise NoPeakError(f"i(t) still rising after {MAX_FORECAST_DAYS} days")
    max_infected = int(round(population * peak_i))
    rr = r0(p)
    return SirForecast(
        beta=p.beta,
        gamma=p.gamma,
        r0=rr,
        herd_immunity_pct=herd_immunity_threshold(rr),
        peak_date=start_date + datetime.timedelta(days=peak_day),
        max_infected=max_infected,
        **burden(max_infected),
    )


def burden(max_infected: int) -> dict:
    """Severe, ICU and death counts as fixed fractions of ``max_infected``."""
    return {
        "severe": int(round(SEVERE_FRACTION * max_infected)),
        "icu": int(round(ICU_FRACTION * max_infected)),
        "deaths": int(round(FATALITY_FRACTION * max_infected)),
    }
