"""Injection hydraulics: measured series and planned injection schedules."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DataError

HYDRAULICS_HEADER = ("t_s", "flow_lps", "whp_mpa")

LPS_TO_M3S = 1e-3


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class HydraulicSeries:
    """Sampled flow rate (L/s) and wellhead pressure (MPa).

    Values between samples follow linear interpolation. Past the last
    sample the last flow rate is held, which is what a learning-period
    view (``until``) needs to integrate up to its end time.
    """

    t: np.ndarray
    flow_lps: np.ndarray
    whp_mpa: np.ndarray

    def __post_init__(self):
        t, q, p = _frozen(self.t), _frozen(self.flow_lps), _frozen(self.whp_mpa)
        if not (len(t) == len(q) == len(p)):
            raise DataError("hydraulic columns have different lengths")
        if len(t) > 1 and np.any(np.diff(t) < 0):
            raise DataError("hydraulic sample times must be nondecreasing")
        if np.any(q < 0):
            raise DataError("flow rate must be nonnegative")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise DataError("non-finite hydraulic values")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "flow_lps", q)
        object.__setattr__(self, "whp_mpa", p)

    def __len__(self) -> int:
        return len(self.t)

    @property
    def shut_in_time(self) -> float:
        """Start of the trailing zero-flow run, ``inf`` if injection never stops."""
        q = self.flow_lps
        positive = np.flatnonzero(q > 0)
        if len(positive) == 0:
            return math.inf
        last = positive[-1]
        if last == len(q) - 1:
            return math.inf
        return float(self.t[last + 1])

    def until(self, t_end: float) -> HydraulicSeries:
        """Samples with ``t <= t_end``."""
        keep = self.t <= t_end
        return HydraulicSeries(self.t[keep], self.flow_lps[keep], self.whp_mpa[keep])

    def flow_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if len(self.t) == 0:
            return np.zeros_like(t)
        out = np.interp(t, self.t, self.flow_lps, left=0.0, right=self.flow_lps[-1])
        return out

    def pressure_at(self, t) -> np.ndarray:
        return np.interp(np.asarray(t, dtype=float), self.t, self.whp_mpa)

    def cumulative_volume(self, t) -> np.ndarray | float:
        """Injected volume in m^3 from the first sample up to ``t``.

        Trapezoidal integration of the piecewise-linear flow; exact for
        that interpolant.
        """
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if len(self.t) == 0:
            out = np.zeros_like(t)
            return float(out[0]) if scalar else out
        ts, qs = self.t, self.flow_lps
        seg = 0.5 * (qs[1:] + qs[:-1]) * np.diff(ts)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        k = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 1)
        dt = np.clip(t - ts[k], 0.0, None)
        q_end = self.flow_at(np.minimum(t, ts[-1]))
        partial = np.where(k < len(ts) - 1, 0.5 * (qs[k] + q_end) * dt, qs[-1] * dt)
        out = np.where(t <= ts[0], 0.0, cum[k] + partial) * LPS_TO_M3S
        return float(out[0]) if scalar else out


@dataclass(frozen=True)
class InjectionPlan:
    """Planned flow-rate schedule as a step function.

    ``rates_lps[k]`` applies on ``[times[k], times[k+1])``; the last rate
    holds indefinitely.
    """

    times: np.ndarray
    rates_lps: np.ndarray

    def __post_init__(self):
        t, r = _frozen(self.times), _frozen(self.rates_lps)
        if len(t) == 0 or len(t) != len(r):
            raise DataError("injection plan needs matching, nonempty times and rates")
        if np.any(np.diff(t) <= 0):
            raise DataError("injection plan times must be strictly increasing")
        if np.any(r < 0):
            raise DataError("planned rates must be nonnegative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "rates_lps", r)

    @classmethod
    def constant(cls, start: float, rate_lps: float) -> InjectionPlan:
        return cls(np.array([start]), np.array([rate_lps]))

    def rate_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.times, t, side="right") - 1
        return np.where(k < 0, 0.0, self.rates_lps[np.clip(k, 0, None)])

    def cumulative_volume(self, t) -> np.ndarray | float:
        """Planned volume (m^3) from the first breakpoint up to ``t``."""
        scalar = np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        cum = np.concatenate([[0.0], np.cumsum(self.rates_lps[:-1] * np.diff(self.times))])
        k = np.searchsorted(self.times, t, side="right") - 1
        kc = np.clip(k, 0, None)
        out = np.where(k < 0, 0.0, cum[kc] + self.rates_lps[kc] * (t - self.times[kc])) * LPS_TO_M3S
        return float(out[0]) if scalar else out

    def volume(self, t1: float, t2: float) -> float:
        """Planned injected volume (m^3) on ``[t1, t2]``."""
        if t2 <= t1:
            return 0.0
        return float(self.cumulative_volume(t2) - self.cumulative_volume(t1))

    @property
    def shut_in_time(self) -> float:
        """First time after which the planned rate stays zero (``inf`` if never)."""
        positive = np.flatnonzero(self.rates_lps > 0)
        if len(positive) == 0:
            return float(self.times[0])
        last = positive[-1]
        if last == len(self.rates_lps) - 1:
            return math.inf
        return float(self.times[last + 1])

    def after(self, t_start: float) -> InjectionPlan:
        """The plan restricted to ``t >= t_start``."""
        r0 = float(self.rate_at(t_start))
        later = self.times > t_start
        return InjectionPlan(np.concatenate([[t_start], self.times[later]]),
                             np.concatenate([[r0], self.rates_lps[later]]))


def load_hydraulics(path) -> HydraulicSeries:
    """Read a hydraulics CSV (``t_s,flow_lps,whp_mpa``).

    Negative times are accepted: pre-stimulation tests precede the time
    origin.
    """
    path = Path(path)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return HydraulicSeries(np.empty(0), np.empty(0), np.empty(0))
        if tuple(h.strip() for h in header) != HYDRAULICS_HEADER:
            raise DataError(f"{path}:1: expected header {','.join(HYDRAULICS_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                vals = [float(cell) for cell in row]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if vals[1] < 0:
                raise DataError(f"{path}:{lineno}: negative flow rate")
            rows.append(vals)
    if not rows:
        return HydraulicSeries(np.empty(0), np.empty(0), np.empty(0))
    arr = np.asarray(rows)
    if np.any(np.diff(arr[:, 0]) < 0):
        raise DataError(f"{path}: hydraulic samples not sorted by time")
    return HydraulicSeries(arr[:, 0], arr[:, 1], arr[:, 2])


def write_hydraulics(series: HydraulicSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HYDRAULICS_HEADER)
        for row in zip(series.t, series.flow_lps, series.whp_mpa):
            w.writerow([repr(float(v)) for v in row])
