"""The forecast record exchanged between models and the evaluation layer."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import VoxelGrid
from .magnitudes import MagnitudePMF, mix_pmfs


@dataclass
class Forecast:
    """Per-FTW Poisson mean, magnitude PMF and spatial PDF.

    ``pdfs`` has shape (n_ftw, grid.n); each row sums to one. The expected
    rate per voxel is ``expected_counts[k] * pdfs[k]``.
    """

    model_id: str
    learning_end: float
    windows: list[tuple[float, float]]
    expected_counts: np.ndarray
    pmfs: list[MagnitudePMF]
    pdfs: np.ndarray
    grid: VoxelGrid
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.expected_counts = np.asarray(self.expected_counts, dtype=float)
        self.pdfs = np.atleast_2d(np.asarray(self.pdfs, dtype=float))
        n = len(self.windows)
        if len(self.expected_counts) != n or len(self.pmfs) != n or self.pdfs.shape != (n, self.grid.n):
            raise ValueError("forecast components do not match the number of windows")
        if np.any(self.expected_counts < 0) or not np.all(np.isfinite(self.expected_counts)):
            raise ValueError("expected counts must be finite and nonnegative")
        sums = self.pdfs.sum(axis=1)
        if np.any(self.pdfs < 0) or np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError("spatial PDFs must be nonnegative and sum to 1")

    @property
    def n_ftw(self) -> int:
        return len(self.windows)

    def rate_grid(self, k: int) -> np.ndarray:
        return self.expected_counts[k] * self.pdfs[k]

    def cumulative(self, n_ftw: int) -> tuple[float, MagnitudePMF, np.ndarray]:
        """Merged (count, PMF, rate grid) over the first ``n_ftw`` windows."""
        counts = self.expected_counts[:n_ftw]
        rates = (counts[:, None] * self.pdfs[:n_ftw]).sum(axis=0)
        return float(counts.sum()), mix_pmfs(self.pmfs[:n_ftw], counts), rates
