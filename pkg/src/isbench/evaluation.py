"""Consistency tests, joint log-likelihoods and information gain.

All logarithms are natural. Rate grids are floored at ``RATE_FLOOR``
events per voxel before any log is taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from .magnitudes import MagnitudePMF, poisson_ci95

RATE_FLOOR = 1e-12
HUBER_C = 1.345
MAD_NORMAL = 1.482602218505602

PASS = "pass"
FAIL = "fail"
FAIL_UNDER = "fail-under"
FAIL_OVER = "fail-over"
NO_EARTHQUAKE = "no-earthquake"
VACUOUS = "vacuous"

ESTIMATORS = ("classical", "robust", "boot_mean", "boot_median")


@dataclass(frozen=True)
class TestOutcome:
    """Result of one consistency test.

    ``status`` refines ``passed``: N-test failures are labeled
    ``fail-under`` (observed above the interval, the model underpredicts)
    or ``fail-over``; S-tests without events are ``no-earthquake`` and
    M-tests without events are a flagged ``vacuous`` pass.
    """

    __test__ = False

    kind: str
    passed: bool | None
    statistic: float
    reference: tuple[float, float]
    status: str
    ftw: int | None = None
    flagged: bool = False


@dataclass(frozen=True)
class GainSample:
    value: float
    voxel: int
    ftw: int | None = None


@dataclass(frozen=True)
class GainSummary:
    estimator: str
    value: float
    ci95: tuple[float, float]
    n: int
    significant: bool
    flagged: bool = False


def floor_rates(rates) -> tuple[np.ndarray, int]:
    """Rates floored at ``RATE_FLOOR`` and the number of floored entries."""
    rates = np.asarray(rates, dtype=float)
    low = rates < RATE_FLOOR
    return np.where(low, RATE_FLOOR, rates), int(np.count_nonzero(low))


def n_test(mean: float, observed: int, ftw: int | None = None) -> TestOutcome:
    """Exact Poisson 95% interval test of an event count."""
    if mean < 0:
        raise ValueError("forecast mean must be nonnegative")
    lo, hi = poisson_ci95(mean)
    if observed > hi:
        status = FAIL_UNDER
    elif observed < lo:
        status = FAIL_OVER
    else:
        status = PASS
    return TestOutcome("N", status == PASS, float(observed), (float(lo), float(hi)), status, ftw)


def _multinomial_ll(counts: np.ndarray, log_p: np.ndarray) -> np.ndarray:
    """Multinomial log-pmf of rows of ``counts``; -inf when a zero-probability bin is hit."""
    counts = np.atleast_2d(counts)
    n = counts.sum(axis=1)
    with np.errstate(invalid="ignore"):
        terms = np.where(counts > 0, counts * log_p, 0.0)
    return gammaln(n + 1) - gammaln(counts + 1).sum(axis=1) + terms.sum(axis=1)


def m_test(pmf: MagnitudePMF, magnitudes, n_sim: int = 1000, seed=0,
           ftw: int | None = None) -> TestOutcome:
    """Magnitude test: multinomial LL of observed bin counts vs. simulated catalogs.

    Passes when the observed statistic is at or above the 5th percentile of
    ``n_sim`` catalogs of the same size drawn from the PMF.
    """
    counts = pmf.counts(magnitudes)
    n = int(counts.sum())
    if n == 0:
        return TestOutcome("M", True, math.nan, (math.nan, math.nan), VACUOUS, ftw, flagged=True)
    with np.errstate(divide="ignore"):
        log_p = np.log(pmf.probs)
    stat = float(_multinomial_ll(counts, log_p)[0])
    rng = np.random.default_rng(seed)
    sims = rng.multinomial(n, pmf.probs, size=n_sim)
    threshold = float(np.percentile(_multinomial_ll(sims, log_p), 5))
    passed = stat >= threshold
    return TestOutcome("M", passed, stat, (threshold, math.inf), PASS if passed else FAIL, ftw)


def poisson_joint_ll(rates, counts) -> float:
    """Joint Poisson log-likelihood ``sum(k ln(lam) - lam - ln k!)`` over voxels."""
    lam, _ = floor_rates(rates)
    k = np.asarray(counts, dtype=float)
    if lam.shape != k.shape:
        raise ValueError("rates and counts must have the same shape")
    if np.any(k < 0):
        raise ValueError("counts must be nonnegative")
    terms = k * np.log(lam) - lam - gammaln(k + 1)
    return math.fsum(terms.ravel())


def number_ll(mean: float, observed: int) -> float:
    """Poisson log-probability of the observed count."""
    return float(stats.poisson.logpmf(observed, max(mean, RATE_FLOOR)))


def magnitude_ll(pmf: MagnitudePMF, magnitudes) -> float:
    """Joint Poisson LL over magnitude bins with rates scaled to the observed count."""
    counts = pmf.counts(magnitudes)
    return poisson_joint_ll(counts.sum() * pmf.probs, counts)


def _sum_log_factorials_sorted(idx: np.ndarray) -> np.ndarray:
    # idx sorted along axis 1; sum of ln k! equals sum of ln(rank within run)
    n_sim, n = idx.shape
    pos = np.broadcast_to(np.arange(n), (n_sim, n))
    new_run = np.ones_like(idx, dtype=bool)
    new_run[:, 1:] = idx[:, 1:] != idx[:, :-1]
    start = np.maximum.accumulate(np.where(new_run, pos, 0), axis=1)
    return np.log(pos - start + 1.0).sum(axis=1)


def s_test(rates, voxel_indices, n_sim: int = 1000, seed=0, ftw: int | None = None,
           chunk: int = 2_000_000) -> TestOutcome:
    """Spatial test with the rate grid rescaled to the observed event count.

    Args:
        rates: forecast rate per voxel (any positive total).
        voxel_indices: flattened voxel index of each observed event.
    """
    idx_obs = np.asarray(voxel_indices, dtype=np.int64).ravel()
    n = len(idx_obs)
    if n == 0:
        return TestOutcome("S", None, math.nan, (math.nan, math.nan), NO_EARTHQUAKE, ftw)
    lam = np.asarray(rates, dtype=float).ravel()
    total = lam.sum()
    # floor after rescaling so a constant factor on the input cannot change the outcome;
    # an all-zero forecast is floored everywhere, i.e. uniform
    shape = lam / total if total > 0 else np.zeros_like(lam)
    scaled, _ = floor_rates(n * shape)
    pdf = scaled / scaled.sum()
    counts = np.bincount(idx_obs, minlength=len(lam))
    stat = poisson_joint_ll(scaled, counts)

    log_scaled = np.log(scaled)
    cdf = np.cumsum(pdf)
    cdf /= cdf[-1]
    rng = np.random.default_rng(seed)
    rows = max(1, chunk // n)
    sims = []
    for start in range(0, n_sim, rows):
        m = min(rows, n_sim - start)
        draw = np.searchsorted(cdf, rng.random((m, n)), side="right")
        draw = np.minimum(draw, len(pdf) - 1)
        draw.sort(axis=1)
        sims.append(log_scaled[draw].sum(axis=1) - n - _sum_log_factorials_sorted(draw))
    threshold = float(np.percentile(np.concatenate(sims), 5))
    passed = stat >= threshold
    return TestOutcome("S", passed, stat, (threshold, math.inf), PASS if passed else FAIL, ftw)


def ll_per_eqk(ll: float, count: int) -> float | None:
    """LL normalized by the observed count; ``None`` marks a window without events."""
    if count <= 0:
        return None
    return ll / count


def information_gain(rates_a, rates_b, voxel_indices, ftw: int | None = None) -> list[GainSample]:
    """Per-event information gain of model A over model B.

    ``I_i = (N_B - N_A) / N + ln(lam_A_i / lam_B_i)`` with the forecast
    totals ``N_A``, ``N_B`` and the observed count ``N`` of the window.
    """
    la, _ = floor_rates(rates_a)
    lb, _ = floor_rates(rates_b)
    if la.shape != lb.shape:
        raise ValueError("rate grids differ in shape")
    idx = np.asarray(voxel_indices, dtype=np.int64).ravel()
    n = len(idx)
    if n == 0:
        return []
    penalty = (lb.sum() - la.sum()) / n
    # grouped so that swapping A and B negates every value exactly
    values = penalty + (np.log(la[idx]) - np.log(lb[idx]))
    return [GainSample(float(v), int(i), ftw) for v, i in zip(values, idx)]


def huber_location(x, c: float = HUBER_C, tol: float = 1e-8, max_iter: int = 500) -> float:
    """Huber M-estimate of location with a fixed MAD scale.

    A zero MAD (more than half the sample identical) returns the median.
    """
    x = np.asarray(x, dtype=float)
    med = float(np.median(x))
    scale = MAD_NORMAL * float(np.median(np.abs(x - med)))
    if scale == 0:
        return med
    mu = med
    for _ in range(max_iter):
        resid = np.abs(x - mu)
        w = np.minimum(1.0, c * scale / np.maximum(resid, 1e-300))
        new = float(np.sum(w * x) / np.sum(w))
        if abs(new - mu) <= tol * scale:
            return new
        mu = new
    return mu


def _gain_values(samples) -> np.ndarray:
    if len(samples) and isinstance(samples[0], GainSample):
        return np.array([s.value for s in samples], dtype=float)
    return np.asarray(samples, dtype=float).ravel()


def summarize_gain(samples, method: str, n_boot: int = 1000, seed=0) -> GainSummary:
    """Average information gain with a 95% interval.

    Args:
        samples: GainSample list or raw values.
        method: "classical" (mean, Student-t interval), "robust" (Huber
            location, bootstrap interval), "boot_mean" or "boot_median"
            (mean/median of resample statistics, percentile interval).
    """
    if method not in ESTIMATORS:
        raise ValueError(f"unknown estimator {method!r}")
    x = _gain_values(samples)
    n = len(x)
    if n < 2:
        value = float(x[0]) if n else math.nan
        return GainSummary(method, value, (math.nan, math.nan), n, False, flagged=True)
    if method == "classical":
        value = float(np.mean(x))
        half = stats.t.ppf(0.975, n - 1) * float(np.std(x, ddof=1)) / math.sqrt(n)
        ci = (value - half, value + half)
    else:
        rng = np.random.default_rng(seed)
        boot = x[rng.integers(0, n, size=(n_boot, n))]
        if method == "boot_mean":
            stat = boot.mean(axis=1)
            value = float(stat.mean())
        elif method == "boot_median":
            stat = np.median(boot, axis=1)
            value = float(np.median(stat))
        else:
            stat = np.array([huber_location(row) for row in boot])
            value = huber_location(x)
        ci = (float(np.percentile(stat, 2.5)), float(np.percentile(stat, 97.5)))
    significant = not (ci[0] <= 0 <= ci[1])
    return GainSummary(method, value, (float(ci[0]), float(ci[1])), n, significant)


def exponentiate_gain(avg_gain: float) -> float:
    """Average probability gain corresponding to an average information gain."""
    if not math.isfinite(avg_gain):
        raise ValueError("average gain must be finite")
    return math.exp(avg_gain)
