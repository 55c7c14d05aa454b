"""Seismic catalogs: event records, windowing and CSV ingestion.

Coordinates are meters relative to the well tip (x East, y North, z up).
Times are seconds since the start of stimulation.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .exceptions import DataError

logger = logging.getLogger(__name__)

CATALOG_HEADER = ("t_s", "x_m", "y_m", "z_m", "mw")


@dataclass(frozen=True)
class SeismicEvent:
    t: float
    x: float
    y: float
    z: float
    magnitude: float

    def __post_init__(self):
        if self.t < 0:
            raise DataError(f"negative time: {self.t}")
        values = (self.t, self.x, self.y, self.z, self.magnitude)
        if not all(math.isfinite(v) for v in values):
            raise DataError(f"non-finite event field in {values}")


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class SeismicCatalog:
    """Time-ordered set of events stored column-wise.

    Args:
        t, x, y, z, m: per-event columns of equal length.
        mc: magnitude of completeness the catalog was filtered at
            (``-inf`` when unfiltered).
        n_removed: number of events dropped by completeness filtering
            at ingestion.
    """

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    m: np.ndarray
    mc: float = -math.inf
    n_removed: int = field(default=0, compare=False)

    def __post_init__(self):
        cols = [_frozen(getattr(self, name)) for name in ("t", "x", "y", "z", "m")]
        n = len(cols[0])
        if any(len(c) != n for c in cols):
            raise DataError("catalog columns have different lengths")
        for name, c in zip(("t", "x", "y", "z", "m"), cols):
            if not np.all(np.isfinite(c)):
                raise DataError(f"non-finite values in column {name!r}")
            object.__setattr__(self, name, c)
        if n > 1 and np.any(np.diff(cols[0]) < 0):
            raise DataError("catalog times must be nondecreasing")

    @classmethod
    def empty(cls, mc: float = -math.inf) -> SeismicCatalog:
        return cls(*(np.empty(0) for _ in range(5)), mc=mc)

    @classmethod
    def from_arrays(cls, t, x, y, z, m, mc: float = -math.inf) -> SeismicCatalog:
        """Build a catalog from unsorted columns (stable sort by time)."""
        t = np.asarray(t, dtype=float)
        order = np.argsort(t, kind="stable")
        cols = [np.asarray(c, dtype=float)[order] for c in (t, x, y, z, m)]
        return cls(*cols, mc=mc)

    @classmethod
    def from_events(cls, events: Sequence[SeismicEvent], mc: float = -math.inf) -> SeismicCatalog:
        if not events:
            return cls.empty(mc)
        cols = np.array([(e.t, e.x, e.y, e.z, e.magnitude) for e in events], dtype=float)
        return cls.from_arrays(*cols.T, mc=mc)

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[SeismicEvent]:
        for row in zip(self.t, self.x, self.y, self.z, self.m):
            yield SeismicEvent(*map(float, row))

    def __getitem__(self, i: int) -> SeismicEvent:
        return SeismicEvent(float(self.t[i]), float(self.x[i]), float(self.y[i]),
                            float(self.z[i]), float(self.m[i]))

    @property
    def locations(self) -> np.ndarray:
        """(n, 3) array of well-tip-relative coordinates."""
        return np.column_stack([self.x, self.y, self.z])

    def select(self, mask) -> SeismicCatalog:
        mask = np.asarray(mask)
        return SeismicCatalog(self.t[mask], self.x[mask], self.y[mask], self.z[mask],
                              self.m[mask], mc=self.mc)

    def until(self, t_end: float) -> SeismicCatalog:
        """Events strictly before ``t_end`` (the learning-period view)."""
        return self.select(self.t < t_end)

    def between(self, t1: float, t2: float) -> SeismicCatalog:
        """Events with ``t1 <= t < t2``."""
        return self.select((self.t >= t1) & (self.t < t2))

    def split(self, t_split: float) -> tuple[SeismicCatalog, SeismicCatalog]:
        return self.until(t_split), self.select(self.t >= t_split)

    def above(self, mc: float) -> SeismicCatalog:
        cat = self.select(self.m >= mc - 1e-9)
        return SeismicCatalog(cat.t, cat.x, cat.y, cat.z, cat.m, mc=mc)

    def concat(self, other: SeismicCatalog) -> SeismicCatalog:
        return SeismicCatalog.from_arrays(
            *(np.concatenate([getattr(self, c), getattr(other, c)]) for c in "txyzm"),
            mc=max(self.mc, other.mc),
        )

    def count(self, t1: float = -math.inf, t2: float = math.inf) -> int:
        lo, hi = np.searchsorted(self.t, [t1, t2], side="left")
        return int(hi - lo)


def load_catalog(path, mc: float, well_tip: Sequence[float] = (0.0, 0.0, 0.0)) -> SeismicCatalog:
    """Read a catalog CSV and apply the completeness cut.

    Absolute coordinates are converted to well-tip-relative ones by
    subtracting ``well_tip``. Rows below ``mc`` are dropped and counted in
    ``n_removed``. Unsorted files are sorted with a warning.

    Raises:
        DataError: on a malformed row (the message carries the line number)
            or a negative event time.
    """
    if not math.isfinite(mc):
        raise DataError(f"mc must be finite, got {mc}")
    path = Path(path)
    rows = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return SeismicCatalog.empty(mc)
        if tuple(h.strip() for h in header) != CATALOG_HEADER:
            raise DataError(f"{path}:1: expected header {','.join(CATALOG_HEADER)}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(CATALOG_HEADER):
                raise DataError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                vals = [float(cell) for cell in row]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}:{lineno}: non-finite value")
            if vals[0] < 0:
                raise DataError(f"{path}:{lineno}: negative time {vals[0]}")
            rows.append(vals)

    if not rows:
        return SeismicCatalog.empty(mc)
    arr = np.asarray(rows, dtype=float)
    arr[:, 1:4] -= np.asarray(well_tip, dtype=float)
    if np.any(np.diff(arr[:, 0]) < 0):
        warnings.warn(f"{path}: events not sorted by time; sorting", stacklevel=2)
    keep = arr[:, 4] >= mc - 1e-9
    n_removed = int(np.count_nonzero(~keep))
    if n_removed:
        logger.info("%s: removed %d events below mc=%g", path, n_removed, mc)
    arr = arr[keep]
    order = np.argsort(arr[:, 0], kind="stable")
    arr = arr[order]
    return SeismicCatalog(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4],
                          mc=mc, n_removed=n_removed)


def write_catalog(catalog: SeismicCatalog, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CATALOG_HEADER)
        for row in zip(catalog.t, catalog.x, catalog.y, catalog.z, catalog.m):
            w.writerow([repr(float(v)) for v in row])
