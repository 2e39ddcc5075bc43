"""Discrete generation-time distributions.

A :class:`GenTimeDist` holds probabilities ``w_1..w_k`` for the delay, in
whole days, between an infector's and an infectee's onset. Lag 0 carries no
mass.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import InvalidLagError, InvalidMomentError, TruncationLossError

DEFAULT_MEAN = 5.2
DEFAULT_SD = 2.8
DEFAULT_MAX_LAG = 20
MAX_LOST_MASS = 0.01


@dataclass(frozen=True, eq=False)
class GenTimeDist:
    """Generation-time weights indexed by lag; ``weights[0]`` is lag 1."""

    weights: np.ndarray
    mean_days: float = field(default=0.0)
    sd_days: float = field(default=0.0)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise InvalidLagError("generation-time support must contain at least one lag")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidMomentError("generation-time weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > 1e-9:
            raise InvalidMomentError(f"weights sum to {w.sum()!r}, expected 1")
        w = w.copy()
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        lags = self.lags
        mean = float(np.dot(lags, w))
        var = max(float(np.dot((lags - mean) ** 2, w)), 0.0)
        object.__setattr__(self, "mean_days", mean)
        object.__setattr__(self, "sd_days", math.sqrt(var))

    @property
    def lags(self) -> np.ndarray:
        return np.arange(1, self.weights.size + 1, dtype=float)

    @property
    def support(self) -> int:
        """Largest lag with a stored weight (k)."""
        return int(self.weights.size)

    def weight(self, lag: int) -> float:
        """Probability of a delay of exactly ``lag`` days (0 outside 1..k)."""
        if 1 <= lag <= self.weights.size:
            return float(self.weights[lag - 1])
        return 0.0

    def as_kernel(self) -> np.ndarray:
        """Weights padded with a leading zero so ``kernel[lag]`` is the mass at ``lag``."""
        return np.concatenate(([0.0], self.weights))

    def to_dict(self) -> dict:
        return {
            "mean": self.mean_days,
            "sd": self.sd_days,
            "max_lag": self.support,
            "weights": [float(x) for x in self.weights],
        }


def gamma_shape_scale(mean_days: float, sd_days: float) -> tuple[float, float]:
    """Moment-matched gamma parameters: shape (mean/sd)^2 and scale sd^2/mean."""
    return (mean_days / sd_days) ** 2, sd_days**2 / mean_days


def discretize_gamma(
    mean_days: float = DEFAULT_MEAN,
    sd_days: float = DEFAULT_SD,
    max_lag: int = DEFAULT_MAX_LAG,
) -> GenTimeDist:
    """Discretize a gamma generation time onto lags ``1..max_lag``.

    Lag ``j`` receives the continuous mass on ``[j - 0.5, j + 0.5)``. Mass
    below 0.5 days and above ``max_lag + 0.5`` is dropped and the remaining
    weights are renormalized. The stored mean and sd are those of the
    resulting discrete distribution, not the continuous inputs.

    Raises
    ------
    InvalidMomentError
        If ``mean_days`` or ``sd_days`` is not strictly positive.
    TruncationLossError
        If more than 1% of the continuous mass falls outside the retained lags.
    """
    if not (mean_days > 0 and sd_days > 0) or not (math.isfinite(mean_days) and math.isfinite(sd_days)):
        raise InvalidMomentError(f"mean and sd must be positive, got mean={mean_days}, sd={sd_days}")
    if int(max_lag) != max_lag or max_lag < 1:
        raise InvalidLagError(f"max_lag must be an integer >= 1, got {max_lag}")
    max_lag = int(max_lag)
    shape, scale = gamma_shape_scale(mean_days, sd_days)
    edges = np.arange(max_lag + 1) + 0.5
    raw = np.clip(np.diff(stats.gamma.cdf(edges, a=shape, scale=scale)), 0.0, None)
    lost = 1.0 - raw.sum()
    if not np.isfinite(lost) or lost > MAX_LOST_MASS or raw.sum() <= 0:
        raise TruncationLossError(
            f"{lost:.4%} of the gamma({mean_days}, {sd_days}) mass lies outside lags 1..{max_lag}"
        )
    return GenTimeDist(raw / raw.sum())


def point_mass(lag: int) -> GenTimeDist:
    """Constant generation time: all mass on a single lag."""
    if int(lag) != lag or lag < 1:
        raise InvalidLagError(f"point-mass lag must be an integer >= 1, got {lag}")
    w = np.zeros(int(lag))
    w[-1] = 1.0
    return GenTimeDist(w)


def mgf_at(g: GenTimeDist, x: float) -> float:
    """Moment-generating function ``sum_j w_j exp(x j)``; +inf on overflow."""
    if x == 0:
        return 1.0
    with np.errstate(over="ignore"):
        terms = g.weights * np.exp(x * g.lags)
        value = float(terms.sum())
    if math.isnan(value):
        return math.inf
    return value


def from_json(text_or_mapping) -> GenTimeDist:
    """Build a gamma distribution from ``{"mean": .., "sd": .., "max_lag": ..}``."""
    params = json.loads(text_or_mapping) if isinstance(text_or_mapping, str) else dict(text_or_mapping)
    return discretize_gamma(
        float(params.get("mean", DEFAULT_MEAN)),
        float(params.get("sd", DEFAULT_SD)),
        int(params.get("max_lag", DEFAULT_MAX_LAG)),
    )
