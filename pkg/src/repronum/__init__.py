"""Reproduction-number estimation (SIR, EG, ML, SB, TD) from daily incidence."""

from .epidata import (
    CumulativeSeries,
    IncidenceSeries,
    load_cumulative_csv,
    to_daily_incidence,
    window,
)
from .gentime import GenTimeDist, discretize_gamma, mgf_at, point_mass
from .restimators import (
    GrowthRate,
    REstimate,
    RTrajectory,
    estimate_eg,
    estimate_ml,
    estimate_sb,
    estimate_td,
    fit_growth_rate,
)
from .simoracle import SimConfig, simulate_branching
from .sir import SirForecast, SirParams, SirState, SirTrajectory

__version__ = "0.1.0"
