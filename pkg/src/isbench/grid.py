"""Testing grid and time-window bookkeeping."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError

SIX_HOURS = 6 * 3600.0
THREE_DAYS = 72 * 3600.0


@dataclass(frozen=True)
class VoxelGrid:
    """Cubic grid of cubic voxels centered on the well tip.

    Voxels are flattened in C order over (x, y, z).
    """

    center: tuple[float, float, float] = (0.0, 0.0, 0.0)
    extent: float = 4000.0
    voxel: float = 200.0

    def __post_init__(self):
        if self.voxel <= 0 or self.extent <= 0:
            raise ConfigError("grid extent and voxel size must be positive")
        ratio = self.extent / self.voxel
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("grid extent must be a multiple of the voxel size")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))

    @property
    def n_per_axis(self) -> int:
        return int(round(self.extent / self.voxel))

    @property
    def n(self) -> int:
        return self.n_per_axis ** 3

    @property
    def shape(self) -> tuple[int, int, int]:
        k = self.n_per_axis
        return (k, k, k)

    def edges(self, axis: int) -> np.ndarray:
        lo = self.center[axis] - self.extent / 2
        return lo + self.voxel * np.arange(self.n_per_axis + 1)

    def bounds(self, index: int) -> tuple[tuple[float, float], ...]:
        """((x1, x2), (y1, y2), (z1, z2)) of a flattened voxel index."""
        ijk = np.unravel_index(index, self.shape)
        return tuple((float(self.edges(a)[i]), float(self.edges(a)[i + 1])) for a, i in enumerate(ijk))

    def centers(self) -> np.ndarray:
        """(n, 3) voxel centers in flattened order."""
        mids = [0.5 * (e[1:] + e[:-1]) for e in (self.edges(0), self.edges(1), self.edges(2))]
        gx, gy, gz = np.meshgrid(*mids, indexing="ij")
        return np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    def contains(self, xyz) -> np.ndarray:
        xyz = np.atleast_2d(np.asarray(xyz, dtype=float))
        c = np.asarray(self.center)
        return np.all(np.abs(xyz - c) <= self.extent / 2, axis=1)

    def voxel_index(self, xyz) -> tuple[np.ndarray, int]:
        """Flattened voxel index per point, clamping outside points.

        Points outside the grid are assigned to the nearest boundary voxel.

        Returns:
            (indices, n_clamped)
        """
        xyz = np.atleast_2d(np.asarray(xyz, dtype=float))
        if xyz.size == 0:
            return np.empty(0, dtype=np.int64), 0
        k = self.n_per_axis
        lo = np.asarray(self.center) - self.extent / 2
        raw = np.floor((xyz - lo) / self.voxel).astype(np.int64)
        clamped = np.clip(raw, 0, k - 1)
        # the upper grid face belongs to the last voxel
        outside = ~self.contains(xyz)
        idx = np.ravel_multi_index(clamped.T, self.shape)
        return idx.astype(np.int64), int(np.count_nonzero(outside))

    def counts(self, xyz) -> tuple[np.ndarray, int]:
        """Event counts per voxel plus the number of clamped events."""
        idx, n_clamped = self.voxel_index(xyz)
        return np.bincount(idx, minlength=self.n), n_clamped

    def uniform(self) -> np.ndarray:
        return np.full(self.n, 1.0 / self.n)


@dataclass(frozen=True)
class TimeWindows:
    """Learning-period end and the forecast time windows (FTWs) after it."""

    learning_end: float
    ftw_length: float = SIX_HOURS
    horizon: float = THREE_DAYS
    recal_step: float = SIX_HOURS

    def __post_init__(self):
        if not self.learning_end > 0:
            raise ConfigError("learning_end must be positive")
        if self.ftw_length <= 0 or self.horizon <= 0 or self.recal_step <= 0:
            raise ConfigError("window lengths must be positive")
        ratio = self.horizon / self.ftw_length
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise ConfigError("horizon must be an integer multiple of the FTW length")

    @property
    def n_ftw(self) -> int:
        return int(round(self.horizon / self.ftw_length))

    def ftw(self, k: int) -> tuple[float, float]:
        """Bounds of the k-th FTW (0-based)."""
        t1 = self.learning_end + k * self.ftw_length
        return t1, t1 + self.ftw_length

    def ftws(self) -> list[tuple[float, float]]:
        return [self.ftw(k) for k in range(self.n_ftw)]

    @property
    def forecast_end(self) -> float:
        return self.learning_end + self.horizon

    def shifted(self, learning_end: float) -> TimeWindows:
        return TimeWindows(learning_end, self.ftw_length, self.horizon, self.recal_step)


def learning_ends(first: float, data_end: float, step: float, ftw_length: float,
                  last: float | None = None) -> list[float]:
    """Recalibration times from ``first`` to ``data_end - ftw_length`` inclusive."""
    stop = data_end - ftw_length if last is None else min(last, data_end - ftw_length)
    if stop < first - 1e-9:
        return []
    n = int(math.floor((stop - first) / step + 1e-9)) + 1
    return [first + i * step for i in range(n)]
