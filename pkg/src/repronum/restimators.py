"""Reproduction-number estimators working on daily incidence.

* EG: exponential growth rate from Poisson regression, mapped to R through
  the generation-time moment-generating function.
* ML: Poisson likelihood of new cases given earlier incidence weighted by
  the generation time.
* SB: sequential Bayesian update of a gridded posterior, day by day.
* TD: time-dependent estimate from the relative likelihood of every
  possible infector day.
"""
from __future__ import annotations

import csv
import datetime
import functools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import optimize, special

from .epidata import IncidenceSeries
from .errors import (
    BadGridError,
    BadWindowError,
    DegenerateError,
    NoAncestorsError,
    NoConvergeError,
    NoSecondaryMassError,
    TooShortError,
)
from .gentime import GenTimeDist, mgf_at

METHODS = ("SIR", "EG", "ML", "SB", "TD")
Z95 = 1.959963984540054
CHI2_95 = 3.841458820694124
SB_EPSILON = 0.1


@dataclass(frozen=True)
class REstimate:
    method: str
    r: float
    ci_low: float
    ci_high: float
    window: tuple[int, int]

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.r >= 0 and math.isfinite(self.r)):
            raise ValueError(f"R must be finite and non-negative, got {self.r}")
        if not self.ci_low <= self.r <= self.ci_high:
            raise ValueError(f"interval [{self.ci_low}, {self.ci_high}] does not contain {self.r}")

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "r": self.r,
            "ci": [self.ci_low, self.ci_high],
            "window": list(self.window),
        }


@dataclass(frozen=True, eq=False)
class RTrajectory:
    """Per-day R estimates with an interval band.

    ``censored[t]`` marks days whose estimate is known to be biased because
    later infectees fall outside the data.
    """

    method: str
    start_date: datetime.date
    r_mean: np.ndarray
    r_low: np.ndarray
    r_high: np.ndarray
    censored: Optional[np.ndarray] = None
    warnings: tuple = field(default=())

    def __post_init__(self):
        arrays = {}
        for name in ("r_mean", "r_low", "r_high"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.flags.writeable = False
            arrays[name] = arr
            object.__setattr__(self, name, arr)
        n = arrays["r_mean"].size
        if any(a.shape != (n,) for a in arrays.values()):
            raise ValueError("trajectory arrays must have equal length")
        cens = np.zeros(n, dtype=bool) if self.censored is None else np.asarray(self.censored, dtype=bool).copy()
        cens.flags.writeable = False
        object.__setattr__(self, "censored", cens)
        object.__setattr__(self, "warnings", tuple(self.warnings))
        lo, mid, hi = arrays["r_low"], arrays["r_mean"], arrays["r_high"]
        if np.any(lo < 0) or np.any(lo > mid + 1e-12) or np.any(mid > hi + 1e-12):
            raise ValueError("trajectory violates 0 <= r_low <= r_mean <= r_high")

    def __len__(self) -> int:
        return int(self.r_mean.size)

    def dates(self) -> list[datetime.date]:
        return [self.start_date + datetime.timedelta(days=t) for t in range(len(self))]

    def summary(self, weights=None, begin: int = 0, end: Optional[int] = None,
                include_censored: bool = False) -> dict:
        """Average of the band over days ``begin..end`` (inclusive).

        With ``weights`` (e.g. daily case counts aligned with the
        trajectory) the average is weighted; otherwise each day counts once.
        Censored days are skipped unless ``include_censored``.
        """
        end = len(self) - 1 if end is None else end
        keep = np.zeros(len(self), dtype=bool)
        keep[begin : end + 1] = True
        if not include_censored:
            keep &= ~self.censored
        w = np.ones(len(self)) if weights is None else np.asarray(weights, dtype=float)
        w = np.where(keep, w, 0.0)
        if w.sum() <= 0:
            raise DegenerateError(f"{self.method}: no days with positive weight to summarize")
        avg = lambda a: float(np.dot(w, a) / w.sum())
        return {"r_mean": avg(self.r_mean), "r_low": avg(self.r_low), "r_high": avg(self.r_high)}

    def to_csv(self, path) -> None:
        """Write ``date,r_mean,r_low,r_high,censored`` rows."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["date", "r_mean", "r_low", "r_high", "censored"])
            for d, m, lo, hi, c in zip(self.dates(), self.r_mean, self.r_low, self.r_high, self.censored):
                w.writerow([d.isoformat(), f"{m:.6f}", f"{lo:.6f}", f"{hi:.6f}", str(bool(c)).lower()])


@dataclass(frozen=True)
class GrowthRate:
    r: float
    stderr: float
    intercept: float = 0.0
    iterations: int = 0


def _resolve_window(s: IncidenceSeries, begin: Optional[int], end: Optional[int]) -> tuple[int, int]:
    begin = 0 if begin is None else int(begin)
    end = s.last_index if end is None else int(end)
    if not (0 <= begin < end <= s.last_index):
        raise BadWindowError(f"window [{begin}, {end}] invalid for series of length {len(s)}")
    return begin, end


# ---------------------------------------------------------------- EG

def fit_growth_rate(s: IncidenceSeries, max_iter: int = 100, tol: float = 1e-10) -> GrowthRate:
    """Poisson log-linear regression ``log E[N_t] = a + r t`` by IRLS.

    The slope's standard error comes from the inverse Fisher information.
    """
    y = s.counts.astype(float)
    if y.size < 5:
        raise TooShortError(f"growth-rate fit needs at least 5 days, got {y.size}")
    if np.count_nonzero(y) < 3:
        raise DegenerateError("growth-rate fit needs at least 3 days with cases")
    t = np.arange(y.size, dtype=float)
    tc = t - t.mean()
    X = np.column_stack([np.ones_like(tc), tc])
    beta = np.array([math.log(y.mean()), 0.0])
    for it in range(1, max_iter + 1):
        eta = X @ beta
        mu = np.exp(eta)
        z = eta + (y - mu) / mu
        XtW = X.T * mu
        new = np.linalg.solve(XtW @ X, XtW @ z)
        if not np.all(np.isfinite(new)):
            raise NoConvergeError("IRLS produced non-finite coefficients")
        delta = np.max(np.abs(new - beta))
        beta = new
        if delta < tol:
            break
    else:
        raise NoConvergeError(f"IRLS did not converge in {max_iter} iterations")
    mu = np.exp(X @ beta)
    cov = np.linalg.inv((X.T * mu) @ X)
    intercept = beta[0] - beta[1] * t.mean()
    return GrowthRate(float(beta[1]), float(math.sqrt(cov[1, 1])), float(intercept), it)


def growth_to_r(r: float, g: GenTimeDist) -> float:
    """Reproduction number implied by growth rate ``r``: ``1 / M(-r)``."""
    m = mgf_at(g, -r)
    return 0.0 if math.isinf(m) else 1.0 / m


def r_to_growth(R: float, g: GenTimeDist) -> float:
    """Inverse of :func:`growth_to_r`; ``-inf`` for ``R = 0``."""
    if R <= 0:
        return -math.inf
    if R == 1:
        return 0.0
    target = math.log(R)
    # log M(-r) is convex and decreasing in r with slope between -k and -1
    lo, hi = sorted((target / g.support, target))
    f = lambda r: -math.log(mgf_at(g, -r)) - target
    return optimize.brentq(f, lo - 1e-12, hi + 1e-12, xtol=1e-14)


def estimate_eg(s: IncidenceSeries, g: GenTimeDist, begin: Optional[int] = None,
                end: Optional[int] = None) -> REstimate:
    """R from the exponential growth rate over ``begin..end``.

    For a constant generation time ``T`` this is ``exp(r T)``.
    """
    b, e = _resolve_window(s, begin, end)
    sub = IncidenceSeries(s.region, s.start_date, s.counts[b : e + 1])
    gr = fit_growth_rate(sub)
    half = Z95 * gr.stderr
    r_hat = growth_to_r(gr.r, g)
    lo, hi = growth_to_r(gr.r - half, g), growth_to_r(gr.r + half, g)
    return REstimate("EG", r_hat, min(lo, r_hat), max(hi, r_hat), (b, e))


# ---------------------------------------------------------------- ML

def infection_pressure(counts: np.ndarray, g: GenTimeDist) -> np.ndarray:
    """``Lambda_t = sum_{j=1..min(k,t)} w_j N_{t-j}``; ``Lambda_0 = 0``."""
    counts = np.asarray(counts, dtype=float)
    full = np.convolve(counts, g.as_kernel())[: counts.size]
    return full


def _ml_loglik(R, n, lam):
    # Poisson log-likelihood up to the log(N_t!) constant
    return float(np.sum(special.xlogy(n, R * lam)) - R * lam.sum())


def estimate_ml(s: IncidenceSeries, g: GenTimeDist, begin: Optional[int] = None,
                end: Optional[int] = None) -> REstimate:
    """Maximum-likelihood R with a profile-likelihood 95% interval.

    Cases on days ``begin..end`` (day 0 excluded) are Poisson with mean
    ``R * Lambda_t``, where ``Lambda_t`` uses the whole history before day
    ``t``, including days before ``begin``. Days with ``Lambda_t = 0`` have
    no possible infector and carry no information about R, so they are left
    out. The estimate is ``sum N_t / sum Lambda_t`` over the remaining days.
    """
    if len(s) < 2:
        raise TooShortError("ML estimation needs at least 2 days")
    b, e = _resolve_window(s, begin, end)
    lam_all = infection_pressure(s.counts, g)
    t = np.arange(max(b, 1), e + 1)
    lam = lam_all[t]
    n = s.counts[t].astype(float)
    keep = lam > 0
    n, lam = n[keep], lam[keep]
    if lam.sum() <= 0:
        raise NoSecondaryMassError("no day in the window has earlier cases within the generation-time support")
    r_hat = n.sum() / lam.sum()
    peak = _ml_loglik(r_hat, n, lam)
    dev = lambda R: 2.0 * (peak - _ml_loglik(R, n, lam)) - CHI2_95

    if r_hat <= 0:
        lo = 0.0
    elif dev(0.0) <= 0:
        lo = 0.0
    else:
        lo = optimize.bisect(dev, 0.0, r_hat, xtol=1e-6)
    hi_bracket = max(r_hat, 1e-3) * 2.0
    while dev(hi_bracket) < 0:
        hi_bracket *= 2.0
    hi = optimize.bisect(dev, r_hat, hi_bracket, xtol=1e-6)
    return REstimate("ML", float(r_hat), float(min(lo, r_hat)), float(max(hi, r_hat)), (b, e))


# ---------------------------------------------------------------- SB

def _grid(grid_max: float, grid_step: float) -> np.ndarray:
    if not (grid_max > 1 and 0 < grid_step <= 0.05):
        raise BadGridError(f"need grid_max > 1 and 0 < grid_step <= 0.05, got {grid_max}, {grid_step}")
    n = int(math.floor(grid_max / grid_step + 1e-9))
    return np.arange(n + 1) * grid_step


def sb_growth(grid: np.ndarray, g: GenTimeDist, mapping: str = "mgf") -> np.ndarray:
    """Daily log growth implied by each grid value of R.

    ``"mgf"`` inverts ``R = 1 / M(-r)`` for the full generation-time
    distribution; ``"linear"`` uses ``(R - 1) / T_g`` with ``T_g`` the mean
    generation time.
    """
    if mapping == "linear":
        return (grid - 1.0) / g.mean_days
    if mapping == "mgf":
        return _mgf_growth(tuple(float(x) for x in grid), tuple(g.weights.tolist())).copy()
    raise ValueError(f"unknown SB growth mapping {mapping!r}")


@functools.lru_cache(maxsize=32)
def _mgf_growth(grid: tuple, weights: tuple) -> np.ndarray:
    g = GenTimeDist(np.array(weights))
    return np.array([r_to_growth(R, g) for R in grid])


def sb_posteriors(s: IncidenceSeries, g: GenTimeDist, grid_max: float = 10.0,
                  grid_step: float = 0.01, mapping: str = "mgf",
                  epsilon: float = SB_EPSILON) -> tuple[np.ndarray, np.ndarray]:
    """Grid and the posterior after each day ``t = 1..T`` (one row per day)."""
    if len(s) < 2:
        raise TooShortError("sequential Bayesian estimation needs at least 2 days")
    grid = _grid(grid_max, grid_step)
    growth = sb_growth(grid, g, mapping)
    counts = s.counts.astype(float)
    log_post = np.full(grid.size, -math.log(grid.size))
    out = np.empty((counts.size - 1, grid.size))
    with np.errstate(over="ignore"):
        factor = np.exp(growth)
    for t in range(1, counts.size):
        lam = max(counts[t - 1], epsilon) * factor
        loglik = special.xlogy(counts[t], lam) - lam - special.gammaln(counts[t] + 1)
        log_post = log_post + loglik
        log_post -= special.logsumexp(log_post)
        out[t - 1] = np.exp(log_post)
    return grid, out


def estimate_sb(s: IncidenceSeries, g: GenTimeDist, grid_max: float = 10.0,
                grid_step: float = 0.01, mapping: str = "mgf",
                epsilon: float = SB_EPSILON, begin: Optional[int] = None,
                end: Optional[int] = None) -> RTrajectory:
    """Sequential Bayesian R(t).

    Starting from a uniform prior on ``{0, step, ..., grid_max}`` at day 1,
    each day multiplies in the Poisson likelihood of ``N_t`` with mean
    ``max(N_{t-1}, epsilon) * exp(growth(R))`` and renormalizes, so the
    posterior of day ``t`` is the prior of day ``t + 1``. The trajectory
    starts the day after ``begin`` and reports the posterior mean and the
    central 95% credible interval.

    ``mapping`` selects how R translates into daily growth (see
    :func:`sb_growth`).
    """
    b, e = _resolve_window(s, begin, end)
    s = IncidenceSeries(s.region, s.start_date + datetime.timedelta(days=b), s.counts[b : e + 1])
    grid, post = sb_posteriors(s, g, grid_max, grid_step, mapping, epsilon)
    mean = post @ grid
    cdf = np.cumsum(post, axis=1)
    lo = grid[np.argmax(cdf >= 0.025, axis=1)]
    hi = grid[np.argmax(cdf >= 0.975 - 1e-12, axis=1)]
    # a posterior sitting on one or two grid points can put the mean outside the quantiles
    lo = np.minimum(lo, mean)
    hi = np.maximum(hi, mean)
    return RTrajectory("SB", s.start_date + datetime.timedelta(days=1), mean, lo, hi)


# ---------------------------------------------------------------- TD

def _td_matrix(counts: np.ndarray, g: GenTimeDist):
    """Infector probabilities ``P[s, u] = N_u w(s-u) / D_s`` and the denominators ``D_s``."""
    n = counts.size
    kern = g.as_kernel()
    lag = np.arange(n)[:, None] - np.arange(n)[None, :]
    w = np.where((lag >= 1) & (lag < kern.size), kern[np.clip(lag, 0, kern.size - 1)], 0.0)
    contrib = w * counts[None, :]
    denom = contrib.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        p = np.where(denom[:, None] > 0, contrib / denom[:, None], 0.0)
    return w, p, denom


def td_point(counts, g: GenTimeDist) -> tuple[np.ndarray, np.ndarray]:
    """Point R_t for every day and the denominators ``D_s``.

    ``R_t = sum_{s>t} N_s w(s-t) / D_s``, skipping infectee days with
    ``D_s = 0``. Days without cases get the same formula: the expected
    offspring of a hypothetical case on that day.
    """
    counts = np.asarray(counts, dtype=float)
    w, _, denom = _td_matrix(counts, g)
    ratio = np.divide(counts, denom, out=np.zeros_like(counts), where=denom > 0)
    return w.T @ ratio, denom


def estimate_td(s: IncidenceSeries, g: GenTimeDist, n_resamples: int = 1000,
                rng: Optional[np.random.Generator] = None) -> RTrajectory:
    """Time-dependent R_t with an infector-resampling interval.

    Each replicate assigns every case on day ``s`` to an infector day
    ``u < s`` with probability ``N_u w(s-u) / D_s`` and sets ``R_t`` to the
    number of infectees credited to day ``t`` divided by ``N_t``. The band
    is the 2.5/97.5 percentiles over replicates. The last ``k`` days (the
    generation-time support) are flagged as censored.
    """
    if len(s) <= g.support:
        raise TooShortError(f"TD needs more than {g.support} days, got {len(s)}")
    if n_resamples < 100:
        raise ValueError("n_resamples must be at least 100")
    rng = np.random.default_rng(0) if rng is None else rng
    counts = s.counts.astype(float)
    n = counts.size
    r_point, denom = td_point(counts, g)
    orphan_days = [t for t in range(1, n) if counts[t] > 0 and denom[t] <= 0]
    if not np.any((counts > 0) & (denom > 0)):
        raise NoAncestorsError("no case has a possible infector within the generation-time support")
    warnings = [
        f"NoAncestors: {s.region} {(s.start_date + datetime.timedelta(days=int(t))).isoformat()} "
        f"has {int(counts[t])} cases with no possible infector"
        for t in orphan_days
    ]

    _, p, _ = _td_matrix(counts, g)
    offspring = np.zeros((n_resamples, n))
    for day in range(1, n):
        k = int(s.counts[day])
        if k == 0 or denom[day] <= 0:
            continue
        src = np.flatnonzero(p[day] > 0)
        probs = p[day, src]
        draws = rng.multinomial(k, probs / probs.sum(), size=n_resamples)
        offspring[:, src] += draws
    has_cases = counts > 0
    reps = np.where(has_cases, offspring / np.where(has_cases, counts, 1.0), r_point)
    lo = np.percentile(reps, 2.5, axis=0)
    hi = np.percentile(reps, 97.5, axis=0)
    lo = np.minimum(lo, r_point)
    hi = np.maximum(hi, r_point)
    censored = np.arange(n) >= n - g.support
    return RTrajectory("TD", s.start_date, r_point, lo, hi, censored, tuple(warnings))
