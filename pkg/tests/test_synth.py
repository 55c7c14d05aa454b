from __future__ import annotations

import json
import math

import numpy as np
import pytest
from scipy import stats

from isbench.catalog import load_catalog
from isbench.exceptions import ConfigError
from isbench.hydraulics import load_hydraulics
from isbench.synth import ScenarioSpec, expected_count, generate_scenario, write_scenario

DAY = 86400.0


def test_event_count_within_poisson_band():
    spec = ScenarioSpec(sigma_index=-1.0, b=1.0, duration=5 * DAY)
    # oracle: rate per m^3 times injected volume, 20 L/s for five days
    mean = 10 ** (-1.0 * 0.9 + 1.0) * 0.020 * 5 * DAY
    assert expected_count(spec, 0.0, spec.duration) == pytest.approx(mean, rel=1e-12)
    lo, hi = stats.poisson.ppf(0.025, mean), stats.poisson.ppf(0.975, mean)
    inside = [lo <= len(generate_scenario(ScenarioSpec(sigma_index=-1.0, b=1.0, seed=s))[1]) <= hi
              for s in range(100)]
    assert sum(inside) >= 90


def test_post_shut_in_intensity_integral():
    spec = ScenarioSpec(stage_times=(0.0, DAY), stage_rates=(20.0, 0.0), duration=4 * DAY,
                        sigma_index=-1.5, p=3.0)
    r0a = spec.r0a
    # closed form of the power-law tail over [t0, 4 t0]
    tail = r0a * DAY / 2.0 * (1 - 4.0 ** -2)
    assert expected_count(spec, DAY, 4 * DAY) == pytest.approx(tail, rel=1e-12)
    counts = [np.count_nonzero(generate_scenario(ScenarioSpec(**{**spec.__dict__, "seed": s}))[1].t >= DAY)
              for s in range(60)]
    assert np.mean(counts) == pytest.approx(tail, abs=4 * math.sqrt(tail / 60))


def test_zero_flow_no_events():
    spec = ScenarioSpec(stage_rates=(0.0,))
    _, cat = generate_scenario(spec)
    assert len(cat) == 0
    assert expected_count(spec, 0.0, spec.duration) == 0.0


def test_magnitude_clip():
    _, cat = generate_scenario(ScenarioSpec(clip=1.8, seed=3))
    assert len(cat) > 1000
    assert cat.m.max() <= 1.8 + 1e-12
    assert cat.m.min() >= 0.9 - 1e-9


def test_deterministic_per_seed():
    spec = ScenarioSpec(seed=5, duration=2 * DAY)
    (h1, c1), (h2, c2) = generate_scenario(spec), generate_scenario(spec)
    for col in "txyzm":
        np.testing.assert_array_equal(getattr(c1, col), getattr(c2, col))
    np.testing.assert_array_equal(h1.whp_mpa, h2.whp_mpa)


def test_counts_across_seeds_show_poisson_dispersion():
    base = dict(sigma_index=0.5, duration=2 * DAY)
    counts = np.array([len(generate_scenario(ScenarioSpec(seed=s, **base))[1]) for s in range(100)])
    mean = counts.mean()
    assert 100 < mean < 1000
    dispersion = np.sum((counts - mean) ** 2) / mean
    p = stats.chi2.sf(dispersion, len(counts) - 1)
    assert 0.001 < p < 0.999


def test_spatial_variance_follows_diffusion():
    spec = ScenarioSpec(sigma_index=-1.2, duration=5 * DAY, diffusivity=0.05, seed=8)
    _, cat = generate_scenario(spec)
    assert len(cat) >= 10_000
    for day in range(1, 5):
        sel = (cat.t >= day * DAY) & (cat.t < (day + 1) * DAY)
        target = np.mean(4 * spec.diffusivity * cat.t[sel])
        var = np.mean(cat.locations[sel] ** 2)
        assert var == pytest.approx(target, rel=0.1)


def test_anisotropy_and_stationary_cloud():
    _, cat = generate_scenario(ScenarioSpec(stationary_std=100.0, anisotropy=(1.0, 2.0, 0.5), seed=2))
    std = cat.locations.std(axis=0)
    np.testing.assert_allclose(std, [100.0, 200.0, 50.0], rtol=0.05)


def test_wellhead_pressure_lag_and_relaxation():
    spec = ScenarioSpec(stage_times=(0.0, DAY), stage_rates=(20.0, 0.0), duration=2 * DAY,
                        whp_gain=0.5, whp_tau=3600.0)
    hyd, _ = generate_scenario(spec)
    inj = hyd.t <= DAY
    assert np.all(np.diff(hyd.whp_mpa[inj]) >= 0)
    assert hyd.whp_mpa[inj][-1] == pytest.approx(10.0, rel=1e-6)
    assert np.all(np.diff(hyd.whp_mpa[~inj]) <= 0)
    assert hyd.whp_mpa[-1] < 1e-6
    assert hyd.shut_in_time == pytest.approx(DAY)


def test_pre_stimulation_stages():
    spec = ScenarioSpec(pre_stim_times=(-2 * DAY, -DAY), pre_stim_rates=(5.0, 0.0), duration=DAY)
    hyd, cat = generate_scenario(spec)
    assert hyd.t[0] == -2 * DAY
    assert np.all(cat.t >= 0)
    with pytest.raises(ConfigError, match="zero-rate"):
        generate_scenario(ScenarioSpec(pre_stim_times=(-DAY,), pre_stim_rates=(5.0,)))


def test_write_scenario_round_trip(tmp_path):
    spec = ScenarioSpec(stage_times=(0.0, DAY), stage_rates=(10.0, 0.0), duration=2 * DAY, seed=4)
    paths = write_scenario(spec, tmp_path)
    cat = load_catalog(paths["catalog"], spec.mc)
    hyd = load_hydraulics(paths["hydraulics"])
    _, ref = generate_scenario(spec)
    assert len(cat) == len(ref)
    np.testing.assert_allclose(cat.t, ref.t)
    assert len(hyd) > 0
    truth = json.loads(paths["truth"].read_text())
    assert truth["spec"]["sigma_index"] == spec.sigma_index and truth["spec"]["p"] == spec.p
    assert truth["shut_in_s"] == DAY and truth["n_events"] == len(ref)
    assert truth["r0a_per_s"] == pytest.approx(spec.r0a)


@pytest.mark.parametrize("kw", [
    dict(b=0.0), dict(p=1.5), dict(diffusivity=0.0), dict(stage_times=(10.0,)),
    dict(stage_times=(0.0, 6 * DAY), stage_rates=(10.0, 0.0)), dict(stage_rates=(-1.0,)),
    dict(stage_times=(0.0, 0.0), stage_rates=(1.0, 2.0)), dict(anisotropy=(1.0, 0.0, 1.0)),
])
def test_invalid_specs(kw):
    with pytest.raises(ConfigError):
        ScenarioSpec(**kw)


def test_unknown_field_rejected():
    with pytest.raises(ConfigError, match="unknown"):
        ScenarioSpec.from_dict({"sigma": 1.0})
