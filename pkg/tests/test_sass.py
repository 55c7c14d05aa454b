from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from isbench.catalog import SeismicCatalog, SeismicEvent
from isbench.grid import TimeWindows, VoxelGrid
from isbench.hydraulics import HydraulicSeries, InjectionPlan
from isbench.magnitudes import poisson_ci95
from isbench.sass import (
    BANDWIDTH_RANGE,
    SURPRISE_RANGE,
    SassParams,
    SmoothingConfig,
    build_spatial_pdf,
    estimate_sigma_index,
    fit_decay_p,
    forecast_count_post,
    forecast_count_stimulation,
    kernel_mass,
    optimize_smoothing,
    post_rate,
    sample_smoothing,
    sass_forecast,
    split_learning,
)
from isbench.synth import ScenarioSpec, generate_scenario

SMALL = VoxelGrid(extent=2000.0, voxel=200.0)
INF = math.inf


def _cat(t, xyz, m=None):
    t = np.asarray(t, dtype=float)
    xyz = np.asarray(xyz, dtype=float).reshape(-1, 3)
    m = np.ones(len(t)) if m is None else np.asarray(m, dtype=float)
    return SeismicCatalog.from_arrays(t, xyz[:, 0], xyz[:, 1], xyz[:, 2], m)


def _const_hyd(rate, t_end, n=11):
    t = np.linspace(0.0, t_end, n)
    return HydraulicSeries(t, np.full(n, rate), np.zeros(n))


# --- rate model --------------------------------------------------------------

def test_sigma_index_formula():
    # 10 events >= mc 0, Q_c = 10 m^3: 1 L/s over 10^4 s
    cat = _cat(np.linspace(100, 9000, 10), np.zeros((10, 3)), np.zeros(10))
    s = estimate_sigma_index(cat, _const_hyd(1.0, 1e4), 1e4, mc=0.0, b=1.0)
    assert s == pytest.approx(0.0, abs=1e-12)


def test_sigma_index_errors():
    cat = _cat([10.0], [[0, 0, 0]])
    with pytest.raises(ValueError, match="no injection"):
        estimate_sigma_index(cat, _const_hyd(0.0, 100.0), 100.0, mc=0.0, b=1.0)
    with pytest.raises(ValueError, match="insufficient"):
        estimate_sigma_index(_cat([], []), _const_hyd(1.0, 100.0), 100.0, mc=0.0, b=1.0)


def test_sigma_index_ignores_pre_stimulation_volume():
    t = np.array([-200.0, -100.0, 0.0, 1e4])
    q = np.array([50.0, 0.0, 1.0, 1.0])
    hyd = HydraulicSeries(t, q, np.zeros(4))
    cat = _cat(np.linspace(100, 9000, 10), np.zeros((10, 3)), np.zeros(10))
    assert estimate_sigma_index(cat, hyd, 1e4, mc=0.0, b=1.0) == pytest.approx(0.0, abs=1e-12)


def test_count_stimulation_linear_in_volume():
    params = SassParams(0.0, 1.0)
    hyd = _const_hyd(1.0, 1e5)
    # Q_c(t1) = 100 m^3, Q_c(t2) = 200 m^3 at 1 L/s
    plan = InjectionPlan.constant(0.0, 1.0)
    assert forecast_count_stimulation(params, plan, hyd, (1e5, 2e5), mc=0.0) == pytest.approx(100.0)
    a = forecast_count_stimulation(params, plan, hyd, (1e5, 1.5e5), mc=0.0, learning_end=1e5)
    b = forecast_count_stimulation(params, plan, hyd, (1e5, 2e5), mc=0.0, learning_end=1e5)
    assert b == pytest.approx(2 * a)
    with pytest.raises(ValueError):
        forecast_count_stimulation(params, plan, hyd, (5e4, 2e5), mc=0.0, learning_end=1e5)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 2), st.floats(0.5, 2.0), st.floats(0, 2), st.floats(0, 50), st.floats(0, 50))
def test_count_monotone_in_volume(sigma, b, mc, r1, r2):
    params = SassParams(sigma, b)
    hyd = _const_hyd(5.0, 1e5)
    lo, hi = sorted((r1, r2))
    c_lo = forecast_count_stimulation(params, InjectionPlan.constant(1e5, lo), hyd, (1e5, 2e5), mc, 1e5)
    c_hi = forecast_count_stimulation(params, InjectionPlan.constant(1e5, hi), hyd, (1e5, 2e5), mc, 1e5)
    assert 0 <= c_lo <= c_hi


def test_count_post_closed_form():
    t0 = 1e5
    params = SassParams(0.0, 1.0, p=2.0, r0a=40 / t0, t0=t0)
    assert forecast_count_post(params, (t0, 2 * t0)) == pytest.approx(20.0, rel=1e-12)
    assert post_rate(params, t0) == pytest.approx(params.r0a)
    assert forecast_count_post(SassParams(0.0, 1.0, 2.0, 0.0, t0), (t0, 2 * t0)) == 0.0
    with pytest.raises(ValueError):
        forecast_count_post(params, (0.5 * t0, 2 * t0))


def _decay_catalog(p, t0, n_bins, r0a, seed, bin_length=21600.0):
    rng = np.random.default_rng(seed)
    t_end = t0 + n_bins * bin_length
    lam_max = r0a
    n = rng.poisson(lam_max * (t_end - t0))
    t = rng.uniform(t0, t_end, n)
    t = np.sort(t[rng.random(n) < (t / t0) ** -p])
    return _cat(t, np.zeros((len(t), 3)))


def test_fit_decay_p_recovers_three():
    t0 = 2 * 86400.0
    cat = _decay_catalog(3.0, t0, 8, r0a=0.05, seed=4)
    p = fit_decay_p(cat, t0, t0 + 8 * 21600.0)
    assert p == pytest.approx(3.0, abs=0.3)


def test_fit_decay_p_floor_and_fallbacks():
    t0 = 2 * 86400.0
    cat = _decay_catalog(1.2, t0, 8, r0a=0.05, seed=5)
    assert fit_decay_p(cat, t0, t0 + 8 * 21600.0) == 2.0
    assert fit_decay_p(cat, t0, t0 - 1.0) == 2.0
    # a single post-shut-in bin is not enough
    assert fit_decay_p(cat, t0, t0 + 21600.0) == 2.0


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 6.0), st.integers(0, 10_000))
def test_fit_decay_p_never_below_floor(p, seed):
    t0 = 86400.0
    cat = _decay_catalog(p, t0, 5, r0a=0.01, seed=seed)
    assert fit_decay_p(cat, t0, t0 + 5 * 21600.0) >= 2.0


# --- kernel ------------------------------------------------------------------

def test_kernel_mass_examples():
    ev = SeismicEvent(0.0, 10.0, -20.0, 30.0, 1.0)
    assert kernel_mass(ev, ((-INF, INF),) * 3, (50.0, 80.0, 120.0)) == pytest.approx(1.0, abs=1e-9)
    s = 100.0
    cube = ((10 - s, 10 + s), (-20 - s, -20 + s), (30 - s, 30 + s))
    oracle = (2 * stats.norm.cdf(1.0) - 1) ** 3
    assert kernel_mass(ev, cube, (s, s, s)) == pytest.approx(oracle, abs=1e-12)
    assert kernel_mass(ev, cube, (s, s, s)) == pytest.approx(0.3182, abs=1e-4)
    far = ((10 + 9.5 * s, 10 + 10.5 * s), (-20 - s, -20 + s), (30 - s, 30 + s))
    assert kernel_mass(ev, far, (s, s, s)) < 1e-12
    with pytest.raises(ValueError):
        kernel_mass(ev, ((1.0, 0.0), (0, 1), (0, 1)), (s, s, s))


@settings(max_examples=50, deadline=None)
@given(st.floats(-500, 500), st.floats(-500, 500), st.floats(20, 500))
def test_kernel_mass_additive_along_axis(split, c, sigma):
    ev = SeismicEvent(0.0, c, 0.0, 0.0, 1.0)
    lo, hi = -600.0, 600.0
    split = min(max(split, lo + 1), hi - 1)
    yz = ((-100.0, 100.0), (-100.0, 100.0))
    whole = kernel_mass(ev, ((lo, hi),) + yz, (sigma,) * 3)
    parts = kernel_mass(ev, ((lo, split),) + yz, (sigma,) * 3) + kernel_mass(ev, ((split, hi),) + yz,
                                                                              (sigma,) * 3)
    assert parts == pytest.approx(whole, abs=1e-10)


# --- spatial PDF -------------------------------------------------------------

def test_pdf_single_event_symmetric():
    cfg = SmoothingConfig(150.0, 150.0, 150.0, surprise=0.0)
    pdf = build_spatial_pdf(_cat([0.0], [[0, 0, 0]]), VoxelGrid(), cfg).pdf.reshape(20, 20, 20)
    for axis in range(3):
        np.testing.assert_allclose(pdf, np.flip(pdf, axis=axis), atol=1e-12)
    assert abs(pdf.sum() - 1.0) < 1e-9


def test_pdf_full_surprise_is_uniform():
    cfg = SmoothingConfig(surprise=1.0)
    pdf = build_spatial_pdf(_cat([0.0, 5.0], [[0, 0, 0], [300, 0, 0]]), VoxelGrid(), cfg).pdf
    np.testing.assert_allclose(pdf, 1 / 8000, rtol=0, atol=1e-15)


def test_pdf_temporal_weight_ratio():
    tau = 3600.0
    cfg = SmoothingConfig(120.0, 200.0, 90.0, surprise=0.0, tau_w=tau)
    cat = _cat([0.0, 5 * tau], [[-300, 100, 0], [250, -80, 40]])
    pdf = build_spatial_pdf(cat, SMALL, cfg, now=5 * tau).pdf
    events = list(cat)
    w = [math.exp(-5.0), 1.0]
    k = [np.array([kernel_mass(e, SMALL.bounds(i), cfg.bandwidths) for i in range(SMALL.n)])
         for e in events]
    expected = (w[0] * k[0] + w[1] * k[1]) / (w[0] * k[0].sum() + w[1] * k[1].sum())
    np.testing.assert_allclose(pdf, expected, atol=1e-12)
    assert w[1] / w[0] == pytest.approx(148.4, abs=0.05)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.0), st.integers(1, 20), st.integers(0, 1000))
def test_pdf_floor_and_normalization(eps, n, seed):
    rng = np.random.default_rng(seed)
    cfg = SmoothingConfig(*rng.uniform(25, 1000, 3), surprise=eps, tau_w=rng.uniform(100, 1e5))
    cat = _cat(np.sort(rng.uniform(0, 1e5, n)), rng.normal(0, 600, (n, 3)))
    pdf = build_spatial_pdf(cat, SMALL, cfg).pdf
    assert abs(pdf.sum() - 1.0) < 1e-9
    assert pdf.min() >= eps / SMALL.n * (1 - 1e-9)


def test_pdf_kernel_additivity():
    rng = np.random.default_rng(3)
    cfg = SmoothingConfig(180.0, 250.0, 140.0, surprise=0.0, tau_w=INF)
    a = _cat(np.zeros(6), rng.normal(0, 500, (6, 3)))
    b = _cat(np.zeros(4), rng.normal(300, 700, (4, 3)))
    union = build_spatial_pdf(a.concat(b), SMALL, cfg).pdf
    pa, pb = (build_spatial_pdf(c, SMALL, cfg) for c in (a, b))
    ma = sum(kernel_mass(e, ((-1000, 1000),) * 3, cfg.bandwidths) for e in a)
    mb = sum(kernel_mass(e, ((-1000, 1000),) * 3, cfg.bandwidths) for e in b)
    np.testing.assert_allclose(union, (ma * pa.pdf + mb * pb.pdf) / (ma + mb), atol=1e-10)


def test_pdf_empty_catalog_warns():
    with pytest.warns(UserWarning, match="uniform"):
        sf = build_spatial_pdf(_cat([], []), SMALL, SmoothingConfig())
    np.testing.assert_allclose(sf.pdf, 1 / SMALL.n)


# --- smoothing search --------------------------------------------------------

def test_split_rule():
    assert split_learning(0.0, 100.0, 60.0) == 50.0
    assert split_learning(0.0, 100.0, 30.0) == 70.0


def test_single_trial_is_the_sampled_config():
    rng = np.random.default_rng(0)
    cat = _cat(np.linspace(0, 9e4, 40), rng.normal(0, 200, (40, 3)))
    got = optimize_smoothing(cat, SMALL, 1e5, 5e4, n_trials=1, seed=7)
    assert got == sample_smoothing(7, 0, (0.25 * 21600, 4 * 1e5))


def test_tight_cluster_prefers_small_bandwidths():
    rng = np.random.default_rng(1)
    pts = rng.normal(0, 5, (20, 3)) + np.array([-450.0, 350.0, 50.0])
    xyz = np.vstack([pts, pts])
    cat = _cat(np.linspace(0, 1e5, 40), xyz)
    cfg = optimize_smoothing(cat, VoxelGrid(), 1e5, 5e4, n_trials=300, seed=2)
    lo, hi = BANDWIDTH_RANGE
    quartile = lo * (hi / lo) ** 0.25
    assert max(cfg.bandwidths) < quartile


def test_scattered_validation_prefers_large_surprise():
    rng = np.random.default_rng(2)
    train = rng.normal(0, 30, (30, 3))
    val = rng.uniform(-1900, 1900, (30, 3))
    cat = _cat(np.linspace(0, 1e5, 60), np.vstack([train, val]))
    cfg = optimize_smoothing(cat, VoxelGrid(), 1e5, 5e4, n_trials=300, seed=3)
    assert cfg.surprise > math.sqrt(SURPRISE_RANGE[0] * SURPRISE_RANGE[1])


def test_no_validation_events_falls_back():
    cat = _cat(np.linspace(0, 4e4, 10), np.zeros((10, 3)))
    prev = SmoothingConfig(77.0, 77.0, 77.0, 0.2, 5000.0)
    with pytest.warns(UserWarning, match="fallback"):
        assert optimize_smoothing(cat, SMALL, 1e5, 5e4, n_trials=5, previous=prev) == prev


# --- composite forecast ------------------------------------------------------

def _scenario(**kw):
    spec = ScenarioSpec(**{"stage_times": (0.0, 2 * 86400.0), "stage_rates": (20.0, 0.0),
                           "duration": 6 * 86400.0, "sigma_index": -1.0, "b": 1.0, "mc": 0.9,
                           "seed": 8, **kw})
    hyd, cat = generate_scenario(spec)
    return spec, hyd, cat


def test_forecast_pre_shut_in_composition():
    spec, hyd, cat = _scenario(stage_rates=(20.0, 20.0), stage_times=(0.0, 4 * 86400.0))
    w = TimeWindows(86400.0, horizon=6 * 21600.0)
    fc = sass_forecast(cat, hyd, w, SMALL, 0.9, plan=spec.plan, n_trials=5)
    params = SassParams(**fc.diagnostics["params"])
    for k, win in enumerate(fc.windows):
        direct = forecast_count_stimulation(params, spec.plan.after(86400.0), hyd.until(86400.0), win,
                                            0.9, 86400.0)
        assert fc.expected_counts[k] == direct
        assert fc.rate_grid(k).sum() == pytest.approx(fc.expected_counts[k], rel=1e-9)


def test_forecast_straddling_shut_in():
    spec, hyd, cat = _scenario()
    L = 2 * 86400.0 - 3 * 3600.0
    w = TimeWindows(L, horizon=2 * 21600.0)
    fc = sass_forecast(cat, hyd, w, SMALL, 0.9, plan=spec.plan, n_trials=5)
    params = SassParams(**fc.diagnostics["params"])
    t0 = 2 * 86400.0
    assert params.t0 == t0
    stim = forecast_count_stimulation(params, spec.plan.after(L), hyd.until(L), (L, t0), 0.9, L)
    post = forecast_count_post(params, (t0, L + 21600.0))
    assert fc.expected_counts[0] == pytest.approx(stim + post, rel=1e-12)
    assert stim > 0 and post > 0


def test_forecast_counts_match_truth_bands():
    spec, hyd, cat = _scenario(stage_times=(0.0,), stage_rates=(20.0,), duration=6 * 86400.0)
    L = 2 * 86400.0
    fc = sass_forecast(cat, hyd, TimeWindows(L), SMALL, 0.9, plan=spec.plan, n_trials=5)
    inside = 0
    for k, (t1, t2) in enumerate(fc.windows):
        lo, hi = poisson_ci95(fc.expected_counts[k])
        inside += lo <= cat.above(0.9).count(t1, t2) <= hi
    assert inside >= 0.9 * fc.n_ftw


def test_forecast_reproducible_and_prospective():
    spec, hyd, cat = _scenario()
    w = TimeWindows(1.5 * 86400.0)
    a = sass_forecast(cat, hyd, w, SMALL, 0.9, plan=spec.plan, n_trials=20, seed=4)
    b = sass_forecast(cat, hyd, w, SMALL, 0.9, plan=spec.plan, n_trials=20, seed=4)
    assert a.diagnostics == b.diagnostics
    np.testing.assert_array_equal(a.pdfs, b.pdfs)
    np.testing.assert_array_equal(a.expected_counts, b.expected_counts)
    # an extra event after the learning end changes nothing
    future = cat.concat(_cat([2 * 86400.0], [[0, 0, 0]], [3.0]))
    c = sass_forecast(future, hyd, w, SMALL, 0.9, plan=spec.plan, n_trials=20, seed=4)
    np.testing.assert_array_equal(a.pdfs, c.pdfs)
    np.testing.assert_array_equal(a.expected_counts, c.expected_counts)
