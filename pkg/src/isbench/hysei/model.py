"""HySei composite forecast: hydraulic inversion, seed seismicity, 3D placement."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace

import numpy as np

from ..catalog import SeismicCatalog
from ..exceptions import ModelError
from ..forecast import Forecast
from ..grid import TimeWindows, VoxelGrid
from ..hydraulics import HydraulicSeries, InjectionPlan
from ..magnitudes import MagnitudePMF, estimate_b_value
from ..sass import default_plan
from .diffusion import FlowSchedule, HydraulicParams, RadialMesh, solve_diffusion
from .inversion import invert_hydraulics
from .offplane import extend_to_3d, fit_offplane
from .seeds import SeedModelParams, SyntheticCatalog, draw_magnitudes, place_seeds, trigger_events

PMF_PRIOR_WEIGHT = 1e-3


@dataclass(frozen=True)
class HySeiConfig:
    """Run settings for the HySei model.

    Attributes:
        mesh: forward-model mesh for the forecast run.
        inversion_mesh: mesh used inside the inversion (defaults to ``mesh``).
        bounds: inversion bounds overriding the defaults.
        fixed_params: skip the inversion and use these parameters.
        seeds: seed-model parameters; ``F_s`` is refitted every period.
        b_spread: ``b_max``/``b_min`` are set to observed b plus/minus this
            value unless ``fixed_b_range`` is given.
        record_every: solver steps between pressure snapshots.
        surprise: uniform spatial floor weight.
    """

    mesh: RadialMesh = field(default_factory=RadialMesh)
    inversion_mesh: RadialMesh | None = None
    base: HydraulicParams = field(default_factory=HydraulicParams)
    bounds: dict | None = None
    fixed_params: HydraulicParams | None = None
    seeds: SeedModelParams = field(default_factory=SeedModelParams)
    b_spread: float = 0.2
    fixed_b_range: tuple[float, float] | None = None
    n_realizations: int = 100
    record_every: int = 10
    surprise: float = 0.01
    jitter: float = 100.0
    n_restarts: int = 3
    maxfev: int = 400
    n_screen: int = 64

    @classmethod
    def from_dict(cls, block: dict) -> HySeiConfig:
        """Build from a JSON parameter block (nested mesh/params/seeds objects)."""
        block = dict(block)
        for key, typ in (("mesh", RadialMesh), ("inversion_mesh", RadialMesh),
                         ("base", HydraulicParams), ("fixed_params", HydraulicParams),
                         ("seeds", SeedModelParams)):
            if block.get(key) is not None:
                block[key] = typ(**block[key])
        if block.get("bounds") is not None:
            block["bounds"] = {k: tuple(v) for k, v in block["bounds"].items()}
        if block.get("fixed_b_range") is not None:
            block["fixed_b_range"] = tuple(block["fixed_b_range"])
        return cls(**{k: v for k, v in block.items() if v is not None})

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ValueError("n_realizations must be at least 1")
        if not 0 <= self.surprise < 1:
            raise ValueError("surprise must lie in [0, 1)")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")


def _split_hydraulics(hydraulics: HydraulicSeries, pre_stim: HydraulicSeries | None):
    stim_mask = hydraulics.t >= 0
    stim = HydraulicSeries(hydraulics.t[stim_mask], hydraulics.flow_lps[stim_mask],
                           hydraulics.whp_mpa[stim_mask])
    if pre_stim is None and np.any(~stim_mask):
        pre_stim = HydraulicSeries(hydraulics.t[~stim_mask], hydraulics.flow_lps[~stim_mask],
                                   hydraulics.whp_mpa[~stim_mask])
    return stim, pre_stim


def _histogram_pdf(locations: np.ndarray, grid: VoxelGrid, surprise: float) -> np.ndarray:
    counts, _ = grid.counts(locations)
    total = counts.sum()
    if total == 0:
        return grid.uniform()
    pdf = (1 - surprise) * counts / total + surprise / grid.n
    return pdf / pdf.sum()


def hysei_forecast(catalog: SeismicCatalog, hydraulics: HydraulicSeries, windows: TimeWindows,
                   grid: VoxelGrid, mc: float, config: HySeiConfig | None = None, seed: int = 0,
                   pre_stim: HydraulicSeries | None = None, plan: InjectionPlan | None = None,
                   previous: HydraulicParams | None = None, m_max: float | None = None,
                   truncation: float | None = None,
                   pre_fit: tuple[HydraulicParams, float] | None = None) -> Forecast:
    """Calibrate HySei on data before ``windows.learning_end`` and forecast each FTW.

    Pre-stimulation samples are taken from ``pre_stim`` or, when absent,
    from negative times in ``hydraulics``; ``pre_fit`` reuses an earlier
    pre-stimulation fit. The planned flow (default: hold the last observed
    rate) drives the solver over the horizon.

    Raises:
        ModelError: no usable hydraulic data, no observed or no synthetic
            events in the learning period.
    """
    config = config or HySeiConfig()
    L = windows.learning_end
    learning = catalog.until(L).above(mc)
    learning = learning.select(learning.t >= 0)
    stim, pre = _split_hydraulics(hydraulics.until(L), pre_stim)
    if len(stim) < 2:
        raise ModelError("HySei needs at least two stimulation hydraulic samples")
    n_obs = len(learning)
    if n_obs < 2:
        raise ModelError("HySei needs observed events in the learning period")
    if plan is None:
        plan = default_plan(stim, L)
    plan = plan.after(L)

    inversion = None
    if config.fixed_params is not None:
        params = config.fixed_params
    else:
        inversion = invert_hydraulics(stim, pre, config.bounds, seed,
                                      config.inversion_mesh or config.mesh, config.base,
                                      previous, config.n_restarts, config.maxfev, config.n_screen,
                                      pre_fit=pre_fit)
        params = inversion.params

    t_start = float(stim.t[0])
    history = solve_diffusion(params, config.mesh, FlowSchedule(stim, plan, switch=L), t_start,
                              windows.forecast_end, stimulate=True,
                              record_every=config.record_every)
    p_max = float(history.pmax_rec[-1].max())

    try:
        b_obs = estimate_b_value(learning, mc)
    except ValueError as exc:
        raise ModelError(f"HySei b-value: {exc}") from None
    if config.fixed_b_range is not None:
        b_max, b_min = config.fixed_b_range
    else:
        b_min = max(b_obs - config.b_spread, 0.05)
        b_max = b_obs + config.b_spread
    seed_params = replace(config.seeds, F_s=1.0, b_max=b_max, b_min=b_min)
    offplane = fit_offplane(learning.locations)

    ftws = windows.ftws()
    n_ftw = len(ftws)
    raw_learning = np.zeros(config.n_realizations)
    raw_counts = np.zeros((config.n_realizations, n_ftw))
    pooled_m = [[] for _ in range(n_ftw)]
    pooled_xyz = [[] for _ in range(n_ftw)]
    b_sum = 0.0
    for r in range(config.n_realizations):
        seeds = place_seeds(seed_params, config.mesh.radius, np.random.default_rng([seed, r, 0]), p_max)
        b_sum += float(np.mean(seeds.b))
        t, idx = trigger_events(history, seeds, seed_params.d_tau)
        raw_learning[r] = np.count_nonzero((t >= 0) & (t < L))
        in_horizon = (t >= L) & (t < windows.forecast_end)
        t, idx = t[in_horizon], idx[in_horizon]
        m = draw_magnitudes(seeds.b[idx], mc, np.random.default_rng([seed, r, 1]),
                            truncated_top=truncation)
        order = np.argsort(t, kind="stable")
        synth = SyntheticCatalog(seeds.r[idx][order], seeds.theta[idx][order], t[order], m[order],
                                 idx[order])
        placed = extend_to_3d(synth, learning, np.random.default_rng([seed, r, 2]), config.jitter,
                              model=offplane)
        k = np.clip(((placed.t - L) // windows.ftw_length).astype(np.int64), 0, n_ftw - 1)
        raw_counts[r] = np.bincount(k, minlength=n_ftw)
        for j in range(n_ftw):
            sel = k == j
            pooled_m[j].append(placed.m[sel])
            pooled_xyz[j].append(placed.locations[sel])

    mean_learning = float(raw_learning.mean())
    if mean_learning <= 0:
        raise ModelError("HySei produced no synthetic events in the learning period")
    f_s = mean_learning / n_obs
    counts = raw_counts.mean(axis=0) / f_s

    if m_max is None:
        m_max = truncation if truncation is not None else mc + 3.0
    n_bins = int(round((m_max - mc) / 0.1)) + 1
    prior = MagnitudePMF.from_gr(b_sum / config.n_realizations, mc, m_max,
                                 truncated_top=truncation is not None)
    pmfs, pdfs = [], []
    for j in range(n_ftw):
        m = np.concatenate(pooled_m[j])
        pmfs.append(MagnitudePMF.from_samples(m, mc, n_bins, truncated_top=truncation is not None,
                                              prior=prior, prior_weight=PMF_PRIOR_WEIGHT))
        pdfs.append(_histogram_pdf(np.concatenate(pooled_xyz[j]).reshape(-1, 3), grid,
                                   config.surprise))

    diagnostics = {
        "params": {k: float(v) for k, v in asdict(params).items()},
        "F_s": f_s,
        "b_observed": b_obs,
        "b_range": [b_max, b_min],
        "offplane_mode": offplane.mode,
        "p_max_pa": p_max,
    }
    if inversion is not None:
        diagnostics.update(rmse_mpa=inversion.rmse_mpa, offset_mpa=inversion.offset_mpa,
                           converged=inversion.converged, misfit_flag=inversion.misfit_flag)
    return Forecast("hysei", L, ftws, counts, pmfs, np.vstack(pdfs), grid, diagnostics)
