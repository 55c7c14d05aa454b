"""Synthetic stimulation scenarios with known ground truth.

Event times follow a nonhomogeneous Poisson process: the seismogenic-index
intensity ``Q(t) * 10**(-b*mc - Sigma)`` while injecting and the power-law
decay ``R0a * (t/t0)**-p`` after shut-in, where ``R0a`` is the mean rate
over the stimulation. Locations are Gaussian around the well tip with
per-axis variance ``4 D t`` (times an anisotropy factor squared). The
wellhead pressure is a first-order lag response to the flow rate.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .catalog import SeismicCatalog, write_catalog
from .exceptions import ConfigError
from .hydraulics import LPS_TO_M3S, HydraulicSeries, InjectionPlan, write_hydraulics
from .magnitudes import bin_magnitudes, sample_gr_magnitude


@dataclass(frozen=True)
class ScenarioSpec:
    """Stage schedule, true rate parameters and spatial process.

    Attributes:
        stage_times: stage start times (s); the first must be 0.
        stage_rates: flow rate per stage (L/s). A trailing zero rate marks
            shut-in.
        duration: end of the scenario (s).
        sigma_index, b, p: true rate-law parameters.
        diffusivity: cloud growth ``D`` (m^2/s).
        anisotropy: per-axis factors on the cloud standard deviation.
        stationary_std: if set, a time-independent cloud with this
            standard deviation (m) replaces the diffusing one.
        clip: magnitudes above this value are set to it.
        pre_stim_times, pre_stim_rates: optional pre-stimulation test
            stages at negative times (no seismicity).
        whp_gain: wellhead-pressure gain (MPa per L/s); whp_tau: lag (s).
    """

    stage_times: tuple[float, ...] = (0.0,)
    stage_rates: tuple[float, ...] = (20.0,)
    duration: float = 5 * 86400.0
    sigma_index: float = -1.0
    b: float = 1.0
    p: float = 2.0
    mc: float = 0.9
    diffusivity: float = 0.05
    anisotropy: tuple[float, float, float] = (1.0, 1.0, 1.0)
    stationary_std: float | None = None
    seed: int = 0
    clip: float | None = None
    sample_interval: float = 600.0
    whp_gain: float = 0.5
    whp_tau: float = 3600.0
    whp_static: float = 0.0
    pre_stim_times: tuple[float, ...] = ()
    pre_stim_rates: tuple[float, ...] = ()

    def __post_init__(self):
        for name in ("stage_times", "stage_rates", "anisotropy", "pre_stim_times", "pre_stim_rates"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        if not self.b > 0:
            raise ConfigError("b must be positive")
        if self.p < 2:
            raise ConfigError("p must be at least 2")
        if not self.diffusivity > 0:
            raise ConfigError("diffusivity must be positive")
        if len(self.stage_times) == 0 or len(self.stage_times) != len(self.stage_rates):
            raise ConfigError("stage times and rates must be nonempty and of equal length")
        if self.stage_times[0] != 0:
            raise ConfigError("the first stage must start at t = 0")
        if np.any(np.diff(self.stage_times) <= 0):
            raise ConfigError("stage times must be strictly increasing")
        if self.stage_times[-1] >= self.duration:
            raise ConfigError("stage schedule extends past the scenario duration")
        if any(r < 0 for r in self.stage_rates + self.pre_stim_rates):
            raise ConfigError("flow rates must be nonnegative")
        if len(self.pre_stim_times) != len(self.pre_stim_rates):
            raise ConfigError("pre-stimulation times and rates differ in length")
        if self.pre_stim_times:
            if np.any(np.diff(self.pre_stim_times) <= 0) or self.pre_stim_times[-1] >= 0:
                raise ConfigError("pre-stimulation stages must be increasing and negative")
        if len(self.anisotropy) != 3 or min(self.anisotropy) <= 0:
            raise ConfigError("anisotropy needs three positive factors")
        if self.stationary_std is not None and not self.stationary_std > 0:
            raise ConfigError("stationary_std must be positive")
        if self.sample_interval <= 0 or self.whp_tau <= 0:
            raise ConfigError("sample interval and pressure lag must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> ScenarioSpec:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**data)

    @property
    def plan(self) -> InjectionPlan:
        return InjectionPlan(np.array(self.stage_times), np.array(self.stage_rates))

    @property
    def shut_in(self) -> float:
        """Start of the final zero-rate stage (``inf`` without shut-in)."""
        return self.plan.shut_in_time

    @property
    def events_per_m3(self) -> float:
        return 10.0 ** (-self.b * self.mc - self.sigma_index)

    @property
    def r0a(self) -> float:
        """Mean event rate over the stimulation (events/s)."""
        t0 = self.shut_in
        if not math.isfinite(t0):
            return math.nan
        if t0 <= 0:
            return 0.0
        return self.events_per_m3 * self.plan.volume(0.0, t0) / t0


def expected_count(spec: ScenarioSpec, t1: float, t2: float) -> float:
    """Integral of the true intensity over ``[t1, t2]``."""
    t1, t2 = max(t1, 0.0), min(t2, spec.duration)
    if t2 <= t1:
        return 0.0
    t0 = spec.shut_in
    n = spec.events_per_m3 * spec.plan.volume(t1, min(t2, t0))
    if t2 > t0 > 0:
        a = max(t1, t0)
        p = spec.p
        n += spec.r0a * t0 / (1 - p) * ((t2 / t0) ** (1 - p) - (a / t0) ** (1 - p))
    return n


def _event_times(spec: ScenarioSpec, rng: np.random.Generator) -> np.ndarray:
    t0 = spec.shut_in
    end_inj = min(t0, spec.duration)
    edges = list(spec.stage_times) + [spec.duration]
    times = []
    # piecewise-constant intensity during injection: the stage bound is exact
    for k, rate in enumerate(spec.stage_rates):
        a, b = edges[k], min(edges[k + 1], end_inj)
        if b <= a or rate <= 0:
            continue
        lam = rate * LPS_TO_M3S * spec.events_per_m3
        n = rng.poisson(lam * (b - a))
        times.append(rng.uniform(a, b, n))
    if 0 < t0 < spec.duration:
        # thinning against the bound R0a at shut-in
        span = spec.duration - t0
        n = rng.poisson(spec.r0a * span)
        cand = rng.uniform(t0, spec.duration, n)
        keep = rng.random(n) < (cand / t0) ** (-spec.p)
        times.append(cand[keep])
    if not times:
        return np.empty(0)
    return np.sort(np.concatenate(times), kind="stable")


def _hydraulics(spec: ScenarioSpec) -> HydraulicSeries:
    stages_t = list(spec.pre_stim_times) + list(spec.stage_times)
    stages_q = list(spec.pre_stim_rates) + list(spec.stage_rates)
    if spec.pre_stim_times:
        # the pre-stimulation test ends at the stimulation start
        if stages_q[len(spec.pre_stim_times) - 1] > 0:
            raise ConfigError("pre-stimulation test must end with a zero-rate stage")
    t_list, q_list = [], []
    edges = stages_t + [spec.duration]
    for k, q in enumerate(stages_q):
        a, b = edges[k], edges[k + 1]
        grid = np.arange(a, b, spec.sample_interval)
        if k > 0:
            t_list.append(a)
            q_list.append(stages_q[k - 1])
        t_list.extend(grid.tolist())
        q_list.extend([q] * len(grid))
    t_list.append(spec.duration)
    q_list.append(stages_q[-1])
    t = np.array(t_list)
    q = np.array(q_list)
    # exact first-order lag for a piecewise-constant input
    y = np.zeros(len(t))
    for i in range(1, len(t)):
        y[i] = q[i - 1] + (y[i - 1] - q[i - 1]) * math.exp(-(t[i] - t[i - 1]) / spec.whp_tau)
    return HydraulicSeries(t, q, spec.whp_static + spec.whp_gain * y)


def generate_scenario(spec: ScenarioSpec) -> tuple[HydraulicSeries, SeismicCatalog]:
    """Hydraulics and a well-tip-relative catalog for ``spec`` (deterministic per seed)."""
    rng = np.random.default_rng(spec.seed)
    t = _event_times(spec, rng)
    n = len(t)
    m = bin_magnitudes(sample_gr_magnitude(spec.b, spec.mc - 0.05, rng.random(n)))
    m = np.atleast_1d(m)
    if spec.clip is not None:
        m = np.minimum(m, spec.clip)
    if spec.stationary_std is not None:
        std = np.full(n, spec.stationary_std)
    else:
        std = np.sqrt(4 * spec.diffusivity * t)
    xyz = rng.standard_normal((n, 3)) * std[:, None] * np.array(spec.anisotropy)
    catalog = SeismicCatalog(t, xyz[:, 0], xyz[:, 1], xyz[:, 2], m, mc=spec.mc)
    return _hydraulics(spec), catalog


def truth(spec: ScenarioSpec, catalog: SeismicCatalog | None = None) -> dict:
    """Ground-truth record: the scenario settings plus derived shut-in quantities."""
    t0 = spec.shut_in
    out = {"spec": asdict(spec),
           "shut_in_s": t0 if math.isfinite(t0) else None,
           "r0a_per_s": spec.r0a if math.isfinite(t0) else None,
           "expected_events": expected_count(spec, 0.0, spec.duration)}
    if catalog is not None:
        out["n_events"] = len(catalog)
    return out


def write_scenario(spec: ScenarioSpec, out_dir) -> dict[str, Path]:
    """Write catalog.csv, hydraulics.csv and truth.json into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    hydraulics, catalog = generate_scenario(spec)
    paths = {"catalog": out_dir / "catalog.csv", "hydraulics": out_dir / "hydraulics.csv",
             "truth": out_dir / "truth.json"}
    write_catalog(catalog, paths["catalog"])
    write_hydraulics(hydraulics, paths["hydraulics"])
    paths["truth"].write_text(json.dumps(truth(spec, catalog), indent=2, sort_keys=True) + "\n")
    return paths
