"""Shapiro and Smoothed Seismicity (SaSS) forecast model.

Event numbers follow the seismogenic-index law during injection and a
power-law decay after shut-in. The spatial component is a temporally
weighted 3D Gaussian smoothed-seismicity PDF on the testing grid, with
bandwidths, surprise factor and weighting time chosen by a random search
on a training/validation split of the learning period.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import optimize, special

from .catalog import SeismicCatalog, SeismicEvent
from .forecast import Forecast
from .grid import SIX_HOURS, TimeWindows, VoxelGrid
from .hydraulics import HydraulicSeries, InjectionPlan
from .magnitudes import MagnitudePMF, estimate_b_value

logger = logging.getLogger(__name__)

P_FLOOR = 2.0
SQRT2 = math.sqrt(2.0)

BANDWIDTH_RANGE = (25.0, 1000.0)
SURPRISE_RANGE = (1e-3, 0.5)


@dataclass(frozen=True)
class SassParams:
    """Rate-model parameters for one learning period.

    ``r0a`` is the mean observed rate (events/s) during the stimulation part
    of the learning period and ``t0`` the shut-in time, measured from the
    start of stimulation.
    """

    sigma_index: float
    b: float
    p: float = P_FLOOR
    r0a: float = 0.0
    t0: float = math.inf

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")
        if self.p < P_FLOOR:
            raise ValueError("decay exponent below the floor of 2")
        if self.r0a < 0:
            raise ValueError("r0a must be nonnegative")
        if not self.t0 > 0:
            raise ValueError("t0 must be positive")


@dataclass(frozen=True)
class SmoothingConfig:
    sigma1: float = 200.0
    sigma2: float = 200.0
    sigma3: float = 200.0
    surprise: float = 0.01
    tau_w: float = 86400.0

    def __post_init__(self):
        if min(self.sigma1, self.sigma2, self.sigma3) <= 0:
            raise ValueError("bandwidths must be positive")
        if not 0 <= self.surprise <= 1:
            raise ValueError("surprise factor must lie in [0, 1]")
        if not self.tau_w > 0:
            raise ValueError("tau_w must be positive")

    @property
    def bandwidths(self) -> tuple[float, float, float]:
        return (self.sigma1, self.sigma2, self.sigma3)


@dataclass(frozen=True)
class SpatialForecast:
    grid: VoxelGrid
    pdf: np.ndarray
    leakage: float = 0.0  # weighted kernel mass falling outside the grid


# --------------------------------------------------------------------------
# event numbers


def estimate_sigma_index(catalog: SeismicCatalog, hydraulics: HydraulicSeries, learning_end: float,
                         mc: float, b: float, shut_in: float | None = None) -> float:
    """Seismogenic index from the stimulation part of the learning period.

    Counts events with magnitude >= mc on ``[0, min(learning_end, shut_in))``
    and integrates the flow over the same span.
    """
    if shut_in is None:
        shut_in = hydraulics.until(learning_end).shut_in_time
    t_end = min(learning_end, shut_in)
    cat = catalog.above(mc)
    n = cat.count(0.0, t_end)
    if n == 0:
        raise ValueError("insufficient seismicity to estimate the seismogenic index")
    hyd = hydraulics.until(learning_end)
    # volume since the stimulation start; pre-stimulation tests sit at t < 0
    qc = float(hyd.cumulative_volume(t_end)) - float(hyd.cumulative_volume(0.0))
    if not qc > 0:
        raise ValueError("no injection yet: cumulative volume is zero")
    return math.log10(qc) - b * mc - math.log10(n)


def events_per_m3(params: SassParams, mc: float) -> float:
    return 10.0 ** (-params.b * mc - params.sigma_index)


def forecast_count_stimulation(params: SassParams, plan: InjectionPlan, hydraulics: HydraulicSeries,
                               window: tuple[float, float], mc: float,
                               learning_end: float | None = None) -> float:
    """Expected count on ``window`` during injection, N(t2) - N(t1).

    Cumulative volume past the learning end follows ``plan``; before it the
    observed series is used.
    """
    t1, t2 = window
    if t2 < t1:
        raise ValueError("window end precedes start")
    if learning_end is not None and t1 < learning_end - 1e-9:
        raise ValueError("forecast window starts before the learning end")
    if t2 > plan.shut_in_time + 1e-9 and t2 > params.t0 + 1e-9:
        raise ValueError("stimulation-phase count requested past shut-in")
    start = learning_end if learning_end is not None else t1
    qc0 = float(hydraulics.until(start).cumulative_volume(start))
    qc1 = qc0 + plan.volume(start, t1)
    qc2 = qc0 + plan.volume(start, t2)
    return max(0.0, events_per_m3(params, mc) * (qc2 - qc1))


def _decay_integral(p: float, t0: float, t1: float, t2: float) -> float:
    """Integral of (t/t0)^-p over [t1, t2]."""
    if p == 1:
        return t0 * math.log(t2 / t1)
    return t0 / (1 - p) * ((t2 / t0) ** (1 - p) - (t1 / t0) ** (1 - p))


def forecast_count_post(params: SassParams, window: tuple[float, float]) -> float:
    """Expected count on a post-shut-in window from the power-law decay."""
    t1, t2 = window
    if t1 < params.t0 - 1e-9:
        raise ValueError("post-shut-in count requested before shut-in")
    if t2 <= t1:
        return 0.0
    return params.r0a * _decay_integral(params.p, params.t0, t1, t2)


def post_rate(params: SassParams, t) -> np.ndarray:
    return params.r0a / (np.asarray(t, dtype=float) / params.t0) ** params.p


def fit_decay_p(catalog: SeismicCatalog, shut_in: float, learning_end: float,
                bin_length: float = SIX_HOURS) -> float:
    """Decay exponent from post-shut-in learning data, floored at 2.

    Complete FTW-length bins after shut-in are used; the least-squares fit
    is on log counts against the exact bin integral of (t/t0)^-p, i.e. a
    log-log regression without the midpoint bias. Fewer than two nonempty
    bins give the floor value.
    """
    if not (learning_end > shut_in and math.isfinite(shut_in) and shut_in > 0):
        return P_FLOOR
    n_bins = int(math.floor((learning_end - shut_in) / bin_length + 1e-9))
    if n_bins < 2:
        return P_FLOOR
    edges = shut_in + bin_length * np.arange(n_bins + 1)
    counts = np.array([catalog.count(a, b) for a, b in zip(edges[:-1], edges[1:])], dtype=float)
    nonempty = counts > 0
    if np.count_nonzero(nonempty) < 2:
        return P_FLOOR
    y = np.log(counts[nonempty])
    lo, hi = edges[:-1][nonempty], edges[1:][nonempty]

    def sse(p):
        pred = np.log([_decay_integral(p, shut_in, a, b) for a, b in zip(lo, hi)])
        r = y - pred
        return float(np.sum((r - r.mean()) ** 2))

    res = optimize.minimize_scalar(sse, bounds=(0.0, 20.0), method="bounded",
                                   options={"xatol": 1e-6})
    return max(float(res.x), P_FLOOR)


# --------------------------------------------------------------------------
# spatial kernel


def kernel_mass(event: SeismicEvent, bounds, bandwidths) -> float:
    """Probability mass of an event's 3D Gaussian kernel inside a box.

    Args:
        event: the smoothed event.
        bounds: ((x1, x2), (y1, y2), (z1, z2)); infinite limits allowed.
        bandwidths: (sigma1, sigma2, sigma3) in meters.
    """
    coords = (event.x, event.y, event.z)
    out = 1.0
    for (lo, hi), c, s in zip(bounds, coords, bandwidths):
        if not lo < hi:
            raise ValueError("voxel bounds must satisfy lower < upper")
        if not s > 0:
            raise ValueError("bandwidths must be positive")
        out *= math.erf((hi - c) / (s * SQRT2)) - math.erf((lo - c) / (s * SQRT2))
    return out / 8.0


def _axis_mass(coords: np.ndarray, edges: np.ndarray, sigma: float) -> np.ndarray:
    """(n_events, n_bins) 1D kernel mass per bin along one axis."""
    e = special.erf((edges[None, :] - coords[:, None]) / (sigma * SQRT2))
    return 0.5 * (e[:, 1:] - e[:, :-1])


def _kernel_factors(catalog: SeismicCatalog, grid: VoxelGrid, bandwidths):
    ex = _axis_mass(catalog.x, grid.edges(0), bandwidths[0])
    ey = _axis_mass(catalog.y, grid.edges(1), bandwidths[1])
    ez = _axis_mass(catalog.z, grid.edges(2), bandwidths[2])
    mass = ex.sum(axis=1) * ey.sum(axis=1) * ez.sum(axis=1)
    return ex, ey, ez, mass


def temporal_weights(t: np.ndarray, tau_w: float) -> np.ndarray:
    """exp(-(t_latest - t)/tau_w): the most recent event gets weight one."""
    t = np.asarray(t, dtype=float)
    if len(t) == 0:
        return t.copy()
    if math.isinf(tau_w):
        return np.ones_like(t)
    return np.exp(-(t.max() - t) / tau_w)


def build_spatial_pdf(catalog: SeismicCatalog, grid: VoxelGrid, config: SmoothingConfig,
                      now: float | None = None) -> SpatialForecast:
    """Smoothed-seismicity PDF with a uniform surprise floor.

    Each event's kernel is normalized by its in-grid mass so leakage past
    the grid boundary does not deflate the PDF. ``now`` only restricts the
    catalog to events at or before it; the weights are relative to the
    latest retained event, which is equivalent after normalization.
    """
    if now is not None:
        catalog = catalog.select(catalog.t <= now)
    n = grid.n
    eps = config.surprise
    if len(catalog) == 0:
        warnings.warn("empty learning catalog: uniform spatial PDF", stacklevel=2)
        return SpatialForecast(grid, grid.uniform(), 0.0)
    w = temporal_weights(catalog.t, config.tau_w)
    ex, ey, ez, mass = _kernel_factors(catalog, grid, config.bandwidths)
    norm = float(np.dot(w, mass))
    if not norm > 0:
        warnings.warn("all kernel mass outside the grid: uniform spatial PDF", stacklevel=2)
        return SpatialForecast(grid, grid.uniform(), 1.0)
    smooth = np.einsum("e,ei,ej,ek->ijk", w, ex, ey, ez, optimize=True).ravel() / norm
    pdf = (1.0 - eps) * smooth + eps / n
    pdf /= pdf.sum()
    leakage = 1.0 - norm / float(w.sum())
    return SpatialForecast(grid, pdf, leakage)


# --------------------------------------------------------------------------
# smoothing search


def split_learning(learning_start: float, learning_end: float, forecast_length: float) -> float:
    """Training/validation split time.

    Halves the learning period when the forecast is longer than half of
    it; otherwise the validation set spans the last forecast-length of it.
    """
    length = learning_end - learning_start
    if forecast_length > length / 2:
        return learning_start + length / 2
    return learning_end - forecast_length


def _log_uniform(rng: np.random.Generator, lo: float, hi: float) -> float:
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def sample_smoothing(seed: int, trial: int, tau_range: tuple[float, float]) -> SmoothingConfig:
    """The configuration drawn for one trial; each trial has its own stream."""
    rng = np.random.default_rng([int(seed), int(trial)])
    s1, s2, s3 = (_log_uniform(rng, *BANDWIDTH_RANGE) for _ in range(3))
    eps = _log_uniform(rng, *SURPRISE_RANGE)
    tau = _log_uniform(rng, *tau_range)
    return SmoothingConfig(s1, s2, s3, eps, tau)


def validation_ll(training: SeismicCatalog, validation: SeismicCatalog, grid: VoxelGrid,
                  config: SmoothingConfig) -> float:
    """Poisson joint LL of validation counts under the training-set PDF.

    Rates are normalized to the validation count. Only voxels with events
    need the PDF; the remaining terms reduce to ``-N``.
    """
    counts, _ = grid.counts(validation.locations)
    occupied = np.flatnonzero(counts)
    k = counts[occupied]
    n_val = int(k.sum())
    pdf_occ = _pdf_at(training, grid, config, occupied)
    rates = n_val * pdf_occ
    return float(np.sum(k * np.log(rates)) - n_val - np.sum(special.gammaln(k + 1)))


def _pdf_at(training: SeismicCatalog, grid: VoxelGrid, config: SmoothingConfig,
            voxels: np.ndarray) -> np.ndarray:
    eps = config.surprise
    if len(training) == 0:
        return np.full(len(voxels), 1.0 / grid.n)
    i, j, k = np.unravel_index(voxels, grid.shape)
    w = temporal_weights(training.t, config.tau_w)
    ex, ey, ez, mass = _kernel_factors(training, grid, config.bandwidths)
    norm = float(np.dot(w, mass))
    if not norm > 0:
        return np.full(len(voxels), 1.0 / grid.n)
    num = np.einsum("e,ev,ev,ev->v", w, ex[:, i], ey[:, j], ez[:, k])
    return (1.0 - eps) * num / norm + eps / grid.n


def optimize_smoothing(catalog: SeismicCatalog, grid: VoxelGrid, learning_end: float,
                       forecast_length: float, n_trials: int = 1000, seed: int = 0,
                       ftw_length: float = SIX_HOURS, learning_start: float = 0.0,
                       previous: SmoothingConfig | None = None) -> SmoothingConfig:
    """Random search over bandwidths, surprise factor and weighting time.

    Configurations are drawn log-uniformly: bandwidths in [25, 1000] m,
    surprise in [1e-3, 0.5], tau_w in [FTW/4, 4 x learning length]. The one
    whose training-set PDF gives the validation events the highest Poisson
    joint LL wins. Without usable training or validation events the
    ``previous`` configuration (or the default) is returned.
    """
    fallback = previous if previous is not None else SmoothingConfig()
    length = learning_end - learning_start
    if length <= 0:
        warnings.warn("learning period too short to split; using fallback smoothing", stacklevel=2)
        return fallback
    cat = catalog.select((catalog.t >= learning_start) & (catalog.t < learning_end))
    t_split = split_learning(learning_start, learning_end, forecast_length)
    training, validation = cat.until(t_split), cat.select(cat.t >= t_split)
    if len(training) == 0 or len(validation) == 0:
        warnings.warn("no training or validation events; using fallback smoothing", stacklevel=2)
        return fallback
    tau_range = (0.25 * ftw_length, max(4.0 * length, 0.25 * ftw_length * 1.0001))

    counts, _ = grid.counts(validation.locations)
    occupied = np.flatnonzero(counts)
    k = counts[occupied].astype(float)
    n_val = k.sum()
    const = -n_val - float(np.sum(special.gammaln(k + 1))) + float(np.sum(k)) * math.log(n_val)

    best, best_ll = None, -math.inf
    for trial in range(n_trials):
        cfg = sample_smoothing(seed, trial, tau_range)
        ll = float(np.sum(k * np.log(_pdf_at(training, grid, cfg, occupied)))) + const
        if ll > best_ll:
            best, best_ll = cfg, ll
    logger.debug("smoothing search at %.0f s: best LL %.3f with %s", learning_end, best_ll, best)
    return best if best is not None else fallback


# --------------------------------------------------------------------------
# composite forecast


def forecast_shut_in(hydraulics: HydraulicSeries, plan: InjectionPlan, learning_end: float) -> float:
    """Shut-in time as known at ``learning_end``.

    If the plan still injects after the learning end, its shut-in applies;
    otherwise injection stopped at the observed shut-in (or at the learning
    end if the last observed rate was positive).
    """
    if np.any(plan.after(learning_end).rates_lps > 0):
        return plan.after(learning_end).shut_in_time
    observed = hydraulics.until(learning_end)
    s = observed.shut_in_time
    if math.isinf(s):
        return learning_end if len(observed) and observed.flow_lps[-1] > 0 else math.inf
    return s


def default_plan(hydraulics: HydraulicSeries, learning_end: float) -> InjectionPlan:
    """Hold the last observed flow rate constant."""
    observed = hydraulics.until(learning_end)
    rate = float(observed.flow_lps[-1]) if len(observed) else 0.0
    return InjectionPlan.constant(learning_end, rate)


def calibrate(catalog: SeismicCatalog, hydraulics: HydraulicSeries, learning_end: float, mc: float,
              plan: InjectionPlan, ftw_length: float = SIX_HOURS,
              truncation: float | None = None) -> SassParams:
    """Re-estimate b, seismogenic index, decay exponent and R_0a."""
    learning = catalog.until(learning_end).above(mc)
    learning = learning.select(learning.t >= 0)
    for_b = learning.m if truncation is None else learning.m[learning.m < truncation - 1e-9]
    b = estimate_b_value(for_b, mc)
    t0 = forecast_shut_in(hydraulics, plan, learning_end)
    sigma = estimate_sigma_index(learning, hydraulics, learning_end, mc, b, shut_in=t0)
    stim_end = min(learning_end, t0)
    r0a = learning.count(0.0, stim_end) / stim_end
    p = fit_decay_p(learning, t0, learning_end, ftw_length) if learning_end > t0 else P_FLOOR
    return SassParams(sigma, b, p, r0a, t0 if math.isfinite(t0) else math.inf)


def window_count(params: SassParams, plan: InjectionPlan, hydraulics: HydraulicSeries,
                 window: tuple[float, float], mc: float, learning_end: float) -> float:
    """Expected count on a window, splitting at shut-in when it straddles it."""
    t1, t2 = window
    t0 = params.t0
    total = 0.0
    if t1 < t0:
        total += forecast_count_stimulation(params, plan, hydraulics, (t1, min(t2, t0)), mc, learning_end)
    if t2 > t0:
        total += forecast_count_post(params, (max(t1, t0), t2))
    return total


def sass_forecast(catalog: SeismicCatalog, hydraulics: HydraulicSeries, windows: TimeWindows,
                  grid: VoxelGrid, mc: float, plan: InjectionPlan | None = None,
                  n_trials: int = 1000, seed: int = 0, m_max: float | None = None,
                  truncation: float | None = None,
                  previous: SmoothingConfig | None = None,
                  smoothing: SmoothingConfig | None = None) -> Forecast:
    """Calibrate SaSS on data before ``windows.learning_end`` and forecast each FTW.

    Args:
        catalog, hydraulics: full data; only the learning-period view is read.
        plan: planned injection (defaults to holding the last observed rate).
        truncation: magnitude at which the catalog saturates; enables the
            absorbing top bin and excludes clipped events from b estimation.
        smoothing: fixed smoothing configuration, skipping the search.
    """
    L = windows.learning_end
    catalog = catalog.until(L)
    hydraulics = hydraulics.until(L)
    if plan is None:
        plan = default_plan(hydraulics, L)
    plan = plan.after(L)
    params = calibrate(catalog, hydraulics, L, mc, plan, windows.ftw_length, truncation)

    if m_max is None:
        m_max = truncation if truncation is not None else mc + 3.0
    pmf = MagnitudePMF.from_gr(params.b, mc, m_max, truncated_top=truncation is not None)

    learning = catalog.above(mc)
    learning = learning.select(learning.t >= 0)
    if smoothing is None:
        smoothing = optimize_smoothing(learning, grid, L, windows.horizon, n_trials, seed,
                                       windows.ftw_length, previous=previous)
    spatial = build_spatial_pdf(learning, grid, smoothing, now=L)

    ftws = windows.ftws()
    counts = np.array([window_count(params, plan, hydraulics, w, mc, L) for w in ftws])
    return Forecast(
        model_id="sass",
        learning_end=L,
        windows=ftws,
        expected_counts=counts,
        pmfs=[pmf] * len(ftws),
        pdfs=np.tile(spatial.pdf, (len(ftws), 1)),
        grid=grid,
        diagnostics={"params": asdict(params), "smoothing": asdict(smoothing),
                     "leakage": spatial.leakage},
    )
