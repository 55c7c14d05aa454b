"""Seed-point seismicity driven by the radial pressure history.

Each seed carries a critical pore-pressure threshold. A seed triggers when
pressure at its radius first exceeds the threshold; the threshold then
rises by ``d_tau`` so the seed can trigger again on further pressure rise.
Because pressure only matters through first exceedance, trigger times are
read off the running maximum of nodal pressure.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..magnitudes import bin_magnitudes, sample_gr_magnitude
from .diffusion import DiffusionResult

MAX_TRIGGERS_PER_SEED = 1000


@dataclass(frozen=True)
class SeedModelParams:
    """Seed-model parameters; pressures and stresses in Pa.

    ``F_s`` is the ratio of synthetic to observed event counts, so the
    scaled count is the raw trigger count divided by ``F_s``. ``d_mu`` is
    the minimum pressure offset between a seed's threshold and the current
    state.
    """

    n_seeds: int = 100_000
    F_s: float = 1.0
    d_tau: float = 1e6
    d_mu: float = 1e5
    b_max: float = 1.2
    b_min: float = 0.8
    stress_min: float = 10e6
    stress_max: float = 60e6

    def __post_init__(self):
        if self.n_seeds <= 0:
            raise ValueError("n_seeds must be positive")
        if not self.F_s > 0 or not math.isfinite(self.F_s):
            raise ValueError("F_s must be positive and finite")
        if self.d_tau < 0 or self.d_mu < 0:
            raise ValueError("d_tau and d_mu must be nonnegative")
        if not self.b_max >= self.b_min > 0:
            raise ValueError("need b_max >= b_min > 0")
        if not self.stress_max >= self.stress_min:
            raise ValueError("need stress_max >= stress_min")


@dataclass(frozen=True)
class SeedSet:
    r: np.ndarray
    theta: np.ndarray
    stress: np.ndarray
    threshold: np.ndarray
    b: np.ndarray

    def __len__(self) -> int:
        return len(self.r)


@dataclass(frozen=True)
class SyntheticCatalog:
    """Events on the 2D fault plane, sorted by time."""

    r: np.ndarray
    theta: np.ndarray
    t: np.ndarray
    m: np.ndarray
    seed_index: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def select(self, mask) -> SyntheticCatalog:
        return SyntheticCatalog(self.r[mask], self.theta[mask], self.t[mask], self.m[mask],
                                self.seed_index[mask])

    def between(self, t1: float, t2: float) -> SyntheticCatalog:
        return self.select((self.t >= t1) & (self.t < t2))


def local_b_value(diff_stress, params: SeedModelParams):
    """Linear map from differential stress to b; ``b_max`` at the minimum stress.

    Stresses outside ``[stress_min, stress_max]`` are clamped with a warning.
    """
    s = np.asarray(diff_stress, dtype=float)
    lo, hi = params.stress_min, params.stress_max
    if np.any((s < lo) | (s > hi)):
        warnings.warn("differential stress outside configured range; clamped", stacklevel=2)
        s = np.clip(s, lo, hi)
    if hi == lo:
        b = np.full_like(s, params.b_max)
    else:
        b = params.b_max + (params.b_min - params.b_max) * (s - lo) / (hi - lo)
    return float(b) if b.ndim == 0 else b


def place_seeds(params: SeedModelParams, radius: float, seed, p_max_expected: float,
                p_current=0.0) -> SeedSet:
    """Draw seeds uniformly in area over a disc of ``radius``.

    Thresholds are ``p_current + U(d_mu, p_max_expected)``; when the
    expected maximum does not exceed ``d_mu`` every threshold sits at
    ``d_mu`` above the current state.

    Args:
        p_current: current pore pressure at each seed (scalar or callable
            of radius).
    """
    rng = np.random.default_rng(seed)
    n = params.n_seeds
    r = radius * np.sqrt(rng.random(n))
    theta = 2 * math.pi * rng.random(n)
    stress = rng.uniform(params.stress_min, params.stress_max, n)
    u = rng.random(n)
    base = p_current(r) if callable(p_current) else np.full(n, float(p_current))
    if math.isinf(params.d_mu):
        offset = np.full(n, math.inf)
    elif p_max_expected > params.d_mu:
        offset = params.d_mu + u * (p_max_expected - params.d_mu)
    else:
        offset = np.full(n, params.d_mu)
    return SeedSet(r, theta, stress, base + offset, local_b_value(stress, params))


def _first_exceedance(pmax: np.ndarray, node: np.ndarray, level: np.ndarray) -> np.ndarray:
    """Index of the first record where ``pmax[:, node] > level`` (must exist)."""
    lo = np.zeros(len(level), dtype=np.int64)
    hi = np.full(len(level), pmax.shape[0] - 1, dtype=np.int64)
    while np.any(lo < hi):
        mid = (lo + hi) // 2
        above = pmax[mid, node] > level
        hi = np.where(above, mid, hi)
        lo = np.where(above, lo, mid + 1)
    return lo


def trigger_events(history: DiffusionResult, seeds: SeedSet, d_tau: float):
    """Raw trigger (time, seed index) pairs from a recorded pressure history.

    The crossing time is linearly interpolated between recorded snapshots of
    the running-maximum pressure.
    """
    if len(history.record_times) == 0:
        raise ValueError("pressure history has no recorded snapshots")
    mesh = history.mesh
    times = history.record_times
    pmax = history.pmax_rec
    node = np.clip(np.rint((seeds.r - mesh.r_well) / mesh.dr).astype(np.int64), 0, mesh.n_nodes - 1)
    p_end = pmax[-1, node]
    th = seeds.threshold
    gap = np.where(np.isfinite(th), p_end - th, -math.inf)
    if d_tau > 0:
        k = np.where(gap > 0, np.ceil(np.clip(gap, 0, None) / d_tau), 0).astype(np.int64)
        k = np.minimum(k, MAX_TRIGGERS_PER_SEED)
    else:
        k = (gap > 0).astype(np.int64)
    idx = np.repeat(np.arange(len(seeds)), k)
    starts = np.cumsum(k) - k
    order = np.arange(len(idx)) - np.repeat(starts, k)
    level = th[idx] + order * d_tau
    keep = level < p_end[idx]
    idx, level = idx[keep], level[keep]
    nd = node[idx]
    i = _first_exceedance(pmax, nd, level)
    prev = np.maximum(i - 1, 0)
    c0, c1 = pmax[prev, nd], pmax[i, nd]
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(c1 > c0, (level - c0) / (c1 - c0), 0.0)
    t = np.where(i == 0, times[0], times[prev] + np.clip(frac, 0, 1) * (times[i] - times[prev]))
    return t, idx


def draw_magnitudes(b: np.ndarray, mc: float, rng: np.random.Generator, bin_width: float = 0.1,
                    truncated_top: float | None = None) -> np.ndarray:
    """Binned GR magnitudes at or above ``mc``, one per entry of ``b``."""
    b = np.asarray(b, dtype=float)
    # unit-b draw above zero, rescaled per event
    m = np.atleast_1d(sample_gr_magnitude(1.0, 0.0, rng.random(len(b)))) / b + (mc - bin_width / 2)
    if truncated_top is not None:
        m = np.minimum(m, truncated_top)
    return bin_magnitudes(m, bin_width)


def simulate_seismicity(history: DiffusionResult, seeds: SeedSet, params: SeedModelParams, seed,
                        mc: float, bin_width: float = 0.1,
                        truncated_top: float | None = None) -> SyntheticCatalog:
    """Synthetic fault-plane catalog with counts scaled by ``1 / F_s``.

    Each raw trigger yields ``floor(1/F_s)`` events plus one more with
    probability equal to the fractional part. Magnitudes come from the
    seed's local Gutenberg-Richter law above ``mc`` and are binned.
    """
    rng = np.random.default_rng(seed)
    t, idx = trigger_events(history, seeds, params.d_tau)
    ratio = 1.0 / params.F_s
    whole = math.floor(ratio)
    copies = whole + (rng.random(len(t)) < ratio - whole)
    t, idx = np.repeat(t, copies), np.repeat(idx, copies)
    order = np.argsort(t, kind="stable")
    t, idx = t[order], idx[order]
    m = draw_magnitudes(seeds.b[idx], mc, rng, bin_width, truncated_top)
    return SyntheticCatalog(seeds.r[idx], seeds.theta[idx], t, m, idx)
