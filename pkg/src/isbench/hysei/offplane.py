"""Mapping fault-plane synthetic events into 3D.

The plane passes through the well tip and is spanned by the two dominant
principal axes of the observed cloud. Off-plane coordinates are resampled
from observed projections onto the minimum axis with uniform jitter.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ..catalog import SeismicCatalog
from .seeds import SyntheticCatalog

COLLINEAR_TOL = 1e-10


@dataclass(frozen=True)
class OffPlaneModel:
    """Principal axes (rows: major, intermediate, minor) and off-plane sample.

    ``mode`` is "pca", "collinear" (offsets forced to zero) or "isotropic"
    (fewer than three observed events; directions uniform on the sphere).
    """

    axes: np.ndarray
    offsets: np.ndarray
    mode: str = "pca"


def _orient(axis: np.ndarray, pts: np.ndarray) -> np.ndarray:
    # Sign fixed by the third moment of the projections, then by their mean,
    # so the axes rotate with the data.
    proj = pts @ axis
    centered = proj - proj.mean()
    scale = float(np.sum(np.abs(centered) ** 3)) + 1e-300
    skew = float(np.sum(centered ** 3))
    if abs(skew) > 1e-9 * scale:
        return axis if skew > 0 else -axis
    mean = float(proj.mean())
    if abs(mean) > 1e-12 * (float(np.abs(proj).max()) + 1e-300):
        return axis if mean > 0 else -axis
    return axis


def fit_offplane(locations) -> OffPlaneModel:
    """Principal-axis model of an observed (n, 3) well-tip-relative cloud."""
    pts = np.asarray(locations, dtype=float).reshape(-1, 3)
    if len(pts) < 3:
        return OffPlaneModel(np.eye(3), np.zeros(1), "isotropic")
    cov = np.cov(pts, rowvar=False)
    vals, vecs = np.linalg.eigh(cov)
    a_x = _orient(vecs[:, 2], pts)
    if vals[1] <= COLLINEAR_TOL * max(vals[2], 1e-300):
        warnings.warn("observed events are collinear; off-plane coordinate set to 0", stacklevel=2)
        helper = np.eye(3)[int(np.argmin(np.abs(a_x)))]
        a_y = np.cross(a_x, helper)
        a_y /= np.linalg.norm(a_y)
        a_z = np.cross(a_x, a_y)
        return OffPlaneModel(np.vstack([a_x, a_y, a_z]), np.zeros(1), "collinear")
    a_z = _orient(vecs[:, 0], pts)
    a_y = np.cross(a_z, a_x)
    return OffPlaneModel(np.vstack([a_x, a_y, a_z]), pts @ a_z, "pca")


def extend_to_3d(synthetic: SyntheticCatalog, observed, seed, jitter: float = 100.0,
                 model: OffPlaneModel | None = None, mc: float = -math.inf) -> SeismicCatalog:
    """Place synthetic fault-plane events in 3D well-tip coordinates.

    Args:
        synthetic: events with radius and azimuth on the plane.
        observed: observed catalog (or (n, 3) locations) up to the learning end.
        jitter: half-width of the uniform off-plane jitter (half a voxel).
        model: precomputed axes; fitted from ``observed`` when omitted.
    """
    if model is None:
        locs = observed.locations if isinstance(observed, SeismicCatalog) else observed
        model = fit_offplane(locs)
    rng = np.random.default_rng(seed)
    n = len(synthetic)
    r = synthetic.r
    if model.mode == "isotropic":
        d = rng.standard_normal((n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        xyz = r[:, None] * d
    else:
        a_x, a_y, a_z = model.axes
        if model.mode == "collinear":
            off = np.zeros(n)
        else:
            off = model.offsets[rng.integers(0, len(model.offsets), n)] + rng.uniform(-jitter, jitter, n)
        xyz = ((r * np.cos(synthetic.theta))[:, None] * a_x
               + (r * np.sin(synthetic.theta))[:, None] * a_y + off[:, None] * a_z)
    return SeismicCatalog(synthetic.t, xyz[:, 0], xyz[:, 1], xyz[:, 2], synthetic.m, mc=mc)
