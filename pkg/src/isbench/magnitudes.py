"""Gutenberg-Richter utilities, magnitude PMFs and Poisson intervals."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .catalog import SeismicCatalog

LOG10_E = math.log10(math.e)


def estimate_b_value(magnitudes, mc: float, bin_width: float = 0.1) -> float:
    """Aki-Utsu maximum-likelihood b-value with the half-bin correction.

    Args:
        magnitudes: a SeismicCatalog or an array of magnitudes; values
            below ``mc`` are ignored.
        mc: magnitude of completeness (a bin center).
        bin_width: magnitude binning of the catalog.

    Raises:
        ValueError: "insufficient data" with fewer than two events at or
            above ``mc``; "degenerate sample" when the mean does not exceed
            the lower bin edge.
    """
    if isinstance(magnitudes, SeismicCatalog):
        magnitudes = magnitudes.m
    m = np.asarray(magnitudes, dtype=float)
    m = m[m >= mc - 1e-9]
    if len(m) < 2:
        raise ValueError("insufficient data for b-value estimation")
    denom = float(np.mean(m)) - (mc - bin_width / 2)
    if not denom > 0:
        raise ValueError("degenerate sample for b-value estimation")
    return LOG10_E / denom


def sample_gr_magnitude(b: float, m_min: float, u, truncated_top: float | None = None):
    """Inverse-CDF draw from the Gutenberg-Richter distribution.

    ``u`` may be a scalar or array of uniforms on [0, 1).
    """
    if not b > 0:
        raise ValueError("b must be positive")
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr < 0) | (u_arr >= 1)):
        raise ValueError("u must lie in [0, 1)")
    m = m_min - np.log10(1.0 - u_arr) / b
    if truncated_top is not None:
        m = np.minimum(m, truncated_top)
    return float(m) if np.ndim(m) == 0 else m


def bin_magnitudes(m, bin_width: float = 0.1) -> np.ndarray:
    """Round magnitudes to the nearest bin center."""
    return np.round(np.round(np.asarray(m, dtype=float) / bin_width) * bin_width, 10)


@dataclass(frozen=True)
class MagnitudePMF:
    """Probabilities over magnitude bins centered at ``m_min + k * bin_width``.

    Observed magnitudes beyond the last bin are counted in it; when
    ``truncated_top`` is set that bin also carries the GR tail mass.
    """

    m_min: float
    probs: np.ndarray
    bin_width: float = 0.1
    truncated_top: bool = False

    def __post_init__(self):
        p = np.array(self.probs, dtype=float, copy=True)
        if p.ndim != 1 or len(p) == 0:
            raise ValueError("probs must be a nonempty vector")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("magnitude probabilities must be nonnegative and sum to 1")
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_gr(cls, b: float, m_min: float, m_max: float, bin_width: float = 0.1,
                truncated_top: bool = False) -> MagnitudePMF:
        n_bins = int(round((m_max - m_min) / bin_width)) + 1
        beta = b * math.log(10)
        edges = np.arange(n_bins + 1) * bin_width
        surv = np.exp(-beta * edges)
        probs = surv[:-1] - surv[1:]
        if truncated_top:
            probs[-1] = surv[-2]
        probs = probs / probs.sum()
        return cls(m_min, probs, bin_width, truncated_top)

    @classmethod
    def from_samples(cls, magnitudes, m_min: float, n_bins: int, bin_width: float = 0.1,
                     truncated_top: bool = False, prior: MagnitudePMF | None = None,
                     prior_weight: float = 1e-3) -> MagnitudePMF:
        """Histogram PMF, optionally mixed with ``prior`` to avoid empty bins."""
        counts = np.bincount(_bin_index(magnitudes, m_min, bin_width, n_bins), minlength=n_bins)
        total = counts.sum()
        if total == 0:
            if prior is None:
                raise ValueError("no samples and no prior")
            return prior
        probs = counts / total
        if prior is not None:
            probs = (1 - prior_weight) * probs + prior_weight * prior.probs
        return cls(m_min, probs / probs.sum(), bin_width, truncated_top)

    @property
    def n_bins(self) -> int:
        return len(self.probs)

    @property
    def centers(self) -> np.ndarray:
        return self.m_min + self.bin_width * np.arange(self.n_bins)

    def bin_index(self, m) -> np.ndarray:
        return _bin_index(m, self.m_min, self.bin_width, self.n_bins)

    def counts(self, m) -> np.ndarray:
        return np.bincount(self.bin_index(m), minlength=self.n_bins)


def _bin_index(m, m_min, bin_width, n_bins) -> np.ndarray:
    m = np.asarray(m, dtype=float).reshape(-1)
    idx = np.floor((m - m_min) / bin_width + 0.5 + 1e-9).astype(np.int64)
    return np.clip(idx, 0, n_bins - 1)


def mix_pmfs(pmfs, weights) -> MagnitudePMF:
    """Weighted mixture of PMFs sharing one binning."""
    weights = np.asarray(weights, dtype=float)
    first = pmfs[0]
    if weights.sum() <= 0:
        weights = np.ones(len(pmfs))
    probs = sum(w * p.probs for w, p in zip(weights, pmfs)) / weights.sum()
    return MagnitudePMF(first.m_min, probs / probs.sum(), first.bin_width, first.truncated_top)


def poisson_ci95(mean: float) -> tuple[int, int]:
    """Central 95% interval of a Poisson count.

    ``lo`` is the largest count with CDF(lo - 1) <= 0.025 and ``hi`` the
    smallest with CDF(hi) >= 0.975.
    """
    if not mean >= 0:
        raise ValueError("Poisson mean must be nonnegative")
    if mean == 0:
        return 0, 0
    cdf = stats.poisson(mean).cdf
    lo = int(stats.poisson.ppf(0.025, mean))
    # ppf can land one off near the boundary in floating point
    while lo > 0 and cdf(lo - 1) > 0.025:
        lo -= 1
    while cdf(lo) <= 0.025:
        lo += 1
    hi = int(stats.poisson.ppf(0.975, mean))
    while hi > 0 and cdf(hi - 1) >= 0.975:
        hi -= 1
    while cdf(hi) < 0.975:
        hi += 1
    return lo, hi
