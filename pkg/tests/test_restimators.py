import datetime
import math

import numpy as np
import pytest
import statsmodels.api as sm
from hypothesis import given, settings, strategies as st
from scipy import special

from repronum import gentime, restimators as re_
from repronum.errors import (
    BadGridError,
    BadWindowError,
    DegenerateError,
    NoAncestorsError,
    NoSecondaryMassError,
    TooShortError,
)

from conftest import incidence


# ---------------------------------------------------------------- EG

def test_irls_matches_glm():
    rng = np.random.default_rng(3)
    t = np.arange(40)
    y = rng.poisson(20 * np.exp(0.07 * t))
    gr = re_.fit_growth_rate(incidence(y))
    glm = sm.GLM(y, sm.add_constant(t.astype(float)), family=sm.families.Poisson()).fit(tol=1e-12)
    assert gr.r == pytest.approx(glm.params[1], abs=1e-9)
    assert gr.intercept == pytest.approx(glm.params[0], abs=1e-8)
    assert gr.stderr == pytest.approx(glm.bse[1], rel=1e-6)


def test_growth_rate_examples():
    t = np.arange(20)
    assert abs(re_.fit_growth_rate(incidence(np.round(10 * np.exp(0.2 * t)))).r - 0.2) < 0.01
    assert abs(re_.fit_growth_rate(incidence([5] * 5)).r) < 1e-6
    assert re_.fit_growth_rate(incidence([1024 // 2**k for k in range(10)])).r < 0


def test_growth_rate_degenerate():
    with pytest.raises(TooShortError):
        re_.fit_growth_rate(incidence([1, 2, 3]))
    with pytest.raises(DegenerateError):
        re_.fit_growth_rate(incidence([0, 0, 4, 0, 0, 0, 5]))


def test_growth_to_r_examples(gamma_gt):
    assert re_.growth_to_r(0.0, gamma_gt) == 1.0
    assert re_.growth_to_r(0.1, gentime.point_mass(5)) == pytest.approx(1.648721, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 5.0))
def test_growth_mapping_inverse(R):
    g = gentime.discretize_gamma(5.2, 2.8, 20)
    assert re_.growth_to_r(re_.r_to_growth(R, g), g) == pytest.approx(R, rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10), st.floats(-0.3, 0.3), st.integers(0, 2**31))
def test_eg_point_mass_equivalence(T, growth, seed):
    rng = np.random.default_rng(seed)
    y = rng.poisson(50 * np.exp(growth * np.arange(25)))
    if np.count_nonzero(y) < 3:
        return
    s = incidence(y)
    r = re_.fit_growth_rate(s).r
    assert abs(re_.estimate_eg(s, gentime.point_mass(T)).r - math.exp(r * T)) <= 1e-12 * max(1.0, math.exp(r * T))


def test_eg_interval_and_window(gamma_gt):
    rng = np.random.default_rng(1)
    y = rng.poisson(30 * np.exp(0.05 * np.arange(60)))
    est = re_.estimate_eg(incidence(y), gamma_gt, 10, 50)
    assert est.window == (10, 50)
    assert est.ci_low < est.r < est.ci_high
    with pytest.raises(BadWindowError):
        re_.estimate_eg(incidence(y), gamma_gt, 50, 10)


# ---------------------------------------------------------------- ML

def loop_pressure(counts, weights):
    lam = np.zeros(len(counts))
    for t in range(len(counts)):
        for j, w in enumerate(weights, start=1):
            if t - j >= 0:
                lam[t] += w * counts[t - j]
    return lam


def test_ml_doubling_exact():
    est = re_.estimate_ml(incidence([1, 2, 4, 8, 16]), gentime.point_mass(1))
    assert est.r == 2.0


def test_infection_pressure_matches_loop(gamma_gt):
    counts = np.random.default_rng(0).integers(0, 50, 40)
    np.testing.assert_allclose(re_.infection_pressure(counts, gamma_gt), loop_pressure(counts, gamma_gt.weights),
                               atol=1e-9)


def random_small_series(rng):
    g = [gentime.point_mass(int(rng.integers(1, 4))), gentime.discretize_gamma(3.0, 1.5, 10)][rng.integers(0, 2)]
    R = rng.uniform(0.8, 2.5)
    counts = [int(rng.integers(3, 20))]
    for t in range(1, int(rng.integers(8, 20))):
        lam = loop_pressure(counts + [0], g.weights)[t]
        counts.append(int(rng.poisson(R * lam)))
    return np.array(counts), g


def test_ml_closed_form_is_grid_argmax():
    rng = np.random.default_rng(2024)
    grid = np.round(np.arange(0.5, 4.0 + 1e-9, 1e-4), 10)
    checked = 0
    while checked < 50:
        counts, g = random_small_series(rng)
        lam = loop_pressure(counts, g.weights)[1:]
        n = counts[1:].astype(float)
        keep = lam > 0
        if not keep.any():
            continue
        ll = (special.xlogy(n[keep][None, :], grid[:, None] * lam[keep][None, :]) - grid[:, None] * lam[keep]).sum(axis=1)
        r_hat = re_.estimate_ml(incidence(counts), g).r
        best = grid[np.argmax(ll)]
        expected = min(max(r_hat, 0.5), 4.0)
        assert abs(best - expected) <= 1e-4 + 1e-12
        checked += 1


def test_ml_profile_interval(gamma_gt):
    rng = np.random.default_rng(5)
    counts = rng.poisson(40 * np.exp(0.04 * np.arange(50)))
    est = re_.estimate_ml(incidence(counts), gamma_gt)
    lam = re_.infection_pressure(counts, gamma_gt)[1:]
    n = counts[1:].astype(float)
    ll = lambda R: float(np.sum(special.xlogy(n, R * lam) - R * lam))
    for bound in (est.ci_low, est.ci_high):
        assert 2 * (ll(est.r) - ll(bound)) == pytest.approx(3.841459, abs=1e-3)


def test_ml_no_secondary_mass():
    with pytest.raises(NoSecondaryMassError):
        re_.estimate_ml(incidence([5, 0, 0, 0, 7, 0]), gentime.point_mass(1), 2, 3)


# ---------------------------------------------------------------- SB

def test_sb_posterior_mass(gamma_gt):
    counts = np.random.default_rng(9).poisson(30, 40)
    _, post = re_.sb_posteriors(incidence(counts), gamma_gt)
    np.testing.assert_allclose(post.sum(axis=1), 1.0, atol=1e-9)


def test_sb_sequential_equals_batch(gamma_gt):
    counts = np.random.default_rng(10).poisson(15, 25)
    grid, post = re_.sb_posteriors(incidence(counts), gamma_gt, mapping="linear")
    growth = (grid - 1) / gamma_gt.mean_days
    logp = np.zeros(grid.size)
    for t in range(1, len(counts)):
        lam = max(counts[t - 1], 0.1) * np.exp(growth)
        logp += counts[t] * np.log(lam) - lam
    batch = np.exp(logp - special.logsumexp(logp))
    np.testing.assert_allclose(post[-1], batch, atol=1e-10)


def test_sb_constant_incidence(gamma_gt):
    traj = re_.estimate_sb(incidence([1000] * 60), gamma_gt)
    assert len(traj) == 59
    assert abs(traj.r_mean[-1] - 1.0) <= 0.05


def test_sb_linear_mapping_recovers_generating_r(gamma_gt):
    counts = [10.0]
    for _ in range(60):
        counts.append(counts[-1] * math.exp((1.5 - 1) / 5.2))
    traj = re_.estimate_sb(incidence(np.round(counts)), gamma_gt, mapping="linear")
    assert abs(traj.r_mean[-1] - 1.5) <= 0.05


def test_sb_mgf_mapping_recovers_generating_r(gamma_gt):
    r = re_.r_to_growth(1.5, gamma_gt)
    counts = np.round(10.0 * np.exp(r * np.arange(61)))
    traj = re_.estimate_sb(incidence(counts), gamma_gt)
    assert abs(traj.r_mean[-1] - 1.5) <= 0.05


def test_sb_band_and_dates(gamma_gt):
    s = incidence(np.random.default_rng(4).poisson(20, 30))
    traj = re_.estimate_sb(s, gamma_gt, begin=5)
    assert traj.start_date == s.start_date + datetime.timedelta(days=6)
    assert np.all(traj.r_low <= traj.r_mean) and np.all(traj.r_mean <= traj.r_high)


@pytest.mark.parametrize("grid_max,step", [(1.0, 0.01), (10, 0.0), (10, 0.1)])
def test_sb_bad_grid(gamma_gt, grid_max, step):
    with pytest.raises(BadGridError):
        re_.estimate_sb(incidence([5, 6, 7]), gamma_gt, grid_max, step)


# ---------------------------------------------------------------- TD

def brute_force_td(counts, g):
    """Enumerate individual cases and their infector likelihoods."""
    onsets = [t for t, c in enumerate(counts) for _ in range(int(c))]
    credit = np.zeros(len(onsets))
    for i, ti in enumerate(onsets):
        weights = np.array([g.weight(ti - tj) for tj in onsets])
        if weights.sum() > 0:
            credit += weights / weights.sum()
    r = np.zeros(len(counts))
    for t in range(len(counts)):
        idx = [j for j, tj in enumerate(onsets) if tj == t]
        if idx:
            r[t] = credit[idx].mean()
    return r


def test_td_hand_examples():
    traj = re_.estimate_td(incidence([1, 1]), gentime.point_mass(1), n_resamples=100)
    assert traj.r_mean.tolist() == [1.0, 0.0]
    traj = re_.estimate_td(incidence([2, 4]), gentime.point_mass(1), n_resamples=100)
    assert traj.r_mean[0] == 2.0


def test_td_matches_case_enumeration():
    rng = np.random.default_rng(8)
    g = gentime.discretize_gamma(3.0, 1.5, 8)
    for _ in range(10):
        counts = rng.integers(0, 6, 15)
        counts[0] = max(counts[0], 1)
        r, _ = re_.td_point(counts, g)
        has = counts > 0
        np.testing.assert_allclose(r[has], brute_force_td(counts, g)[has], atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 200), min_size=2, max_size=40), st.integers(1, 6))
def test_td_conservation(counts, lag):
    counts = np.array(counts)
    for g in (gentime.point_mass(lag), gentime.discretize_gamma(lag + 3.0, 1.5, lag + 12)):
        r, denom = re_.td_point(counts, g)
        reachable = counts[denom > 0].sum()
        assert abs(float(np.dot(counts, r)) - reachable) <= 1e-9 * max(1.0, reachable)


def test_td_censoring_and_band(gamma_gt):
    counts = np.random.default_rng(6).poisson(50, 60)
    traj = re_.estimate_td(incidence(counts), gamma_gt, n_resamples=200, rng=np.random.default_rng(1))
    assert traj.censored.sum() == gamma_gt.support
    assert traj.censored[-1] and not traj.censored[60 - gamma_gt.support - 1]
    assert np.all(traj.r_low <= traj.r_mean) and np.all(traj.r_mean <= traj.r_high)
    again = re_.estimate_td(incidence(counts), gamma_gt, n_resamples=200, rng=np.random.default_rng(1))
    assert np.array_equal(traj.r_low, again.r_low) and np.array_equal(traj.r_high, again.r_high)


def test_td_orphan_days_warn():
    traj = re_.estimate_td(incidence([3, 2, 0, 0, 4, 1]), gentime.point_mass(1), n_resamples=100)
    assert len(traj.warnings) == 1 and traj.warnings[0].startswith("NoAncestors")


def test_td_errors(gamma_gt):
    with pytest.raises(NoAncestorsError):
        re_.estimate_td(incidence([5, 0, 0, 3]), gentime.point_mass(1), n_resamples=100)
    with pytest.raises(TooShortError):
        re_.estimate_td(incidence([5] * 20), gamma_gt)
    with pytest.raises(ValueError):
        re_.estimate_td(incidence([5] * 30), gamma_gt, n_resamples=10)


# ---------------------------------------------------------------- result types

def test_trajectory_summary_weighting():
    traj = re_.RTrajectory("TD", datetime.date(2020, 1, 1), [1.0, 2.0, 3.0], [0.5, 1.5, 2.5],
                           [1.5, 2.5, 3.5], censored=[False, False, True])
    assert traj.summary()["r_mean"] == 1.5
    assert traj.summary(weights=[1, 3, 100])["r_mean"] == 1.75
    assert traj.summary(include_censored=True)["r_mean"] == 2.0
    with pytest.raises(DegenerateError):
        traj.summary(begin=2)


def test_restimate_validation():
    with pytest.raises(ValueError):
        re_.REstimate("EG", 1.2, 1.3, 1.4, (0, 5))
    with pytest.raises(ValueError):
        re_.REstimate("XX", 1.2, 1.1, 1.4, (0, 5))
    assert re_.REstimate("ML", 1.2, 1.1, 1.4, (0, 5)).to_dict()["ci"] == [1.1, 1.4]
