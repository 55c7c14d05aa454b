"""Hydraulic inversion against wellhead pressure.

Permeability and storage are constrained first on the pre-stimulation
test (constant permeability); the stimulation parameters are then fitted
on the stimulation record. Both stages minimize the RMSE between modeled
well-node pressure plus a constant offset (closed form) and the observed
wellhead pressure with a bounded Nelder-Mead simplex in log10 space,
restarted from the best points of a Sobol screening sample.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import optimize
from scipy.stats import qmc

from ..hydraulics import HydraulicSeries
from .diffusion import DiffusionResult, FlowSchedule, HydraulicParams, RadialMesh, solve_diffusion

logger = logging.getLogger(__name__)

PRE_STIM_NAMES = ("kappa0", "S")
STIM_NAMES = ("C_u", "u_t", "p_t")

DEFAULT_BOUNDS = {
    "kappa0": (1e-15, 1e-11),
    "S": (1e-11, 1e-7),
    "C_u": (1e-6, 1e-2),
    "u_t": (1.0, 1000.0),
    "p_t": (1e5, 3e7),
}


@dataclass
class InversionResult:
    params: HydraulicParams
    rmse_mpa: float
    offset_mpa: float
    converged: bool
    misfit_flag: bool
    n_evals: int
    history: list[float] = field(default_factory=list)
    pre_stim_rmse_mpa: float = math.nan


def _modeled_whp(params: HydraulicParams, mesh: RadialMesh, series: HydraulicSeries,
                 stimulate: bool) -> np.ndarray:
    schedule = FlowSchedule(observed=series)
    res = solve_diffusion(params, mesh, schedule, float(series.t[0]), float(series.t[-1]),
                          stimulate=stimulate)
    return np.interp(series.t, res.times, res.p_well) / 1e6


def pressure_misfit(params: HydraulicParams, mesh: RadialMesh, series: HydraulicSeries,
                    stimulate: bool) -> tuple[float, float]:
    """(RMSE in MPa, fitted static offset in MPa) for one forward run."""
    model = _modeled_whp(params, mesh, series, stimulate)
    offset = float(np.mean(series.whp_mpa - model))
    resid = series.whp_mpa - model - offset
    return float(np.sqrt(np.mean(resid ** 2))), offset


def _fit(base: HydraulicParams, names, bounds, mesh, series, stimulate, rng, n_restarts,
         start, maxfev, history, n_screen):
    lo = np.array([math.log10(bounds[n][0]) for n in names])
    hi = np.array([math.log10(bounds[n][1]) for n in names])
    free = hi > lo

    def to_params(z_free):
        z = lo.copy()
        z[free] = z_free
        # pinned parameters keep their exact bound value
        values = {n: (10.0 ** v if f else bounds[n][0]) for n, v, f in zip(names, z, free)}
        return replace(base, **values)

    def objective(z_free):
        z_free = np.clip(z_free, lo[free], hi[free])
        try:
            rmse, _ = pressure_misfit(to_params(z_free), mesh, series, stimulate)
        except (RuntimeError, ValueError):
            rmse = 1e6
        history.append(rmse)
        return rmse

    if not np.any(free):
        p = to_params(np.empty(0))
        rmse, _ = pressure_misfit(p, mesh, series, stimulate)
        history.append(rmse)
        return p, rmse, True

    # Screen a space-filling sample and restart the simplex from the best
    # points; random starts alone miss the narrow valley in C_u.
    sobol = qmc.Sobol(int(free.sum()), seed=rng)
    cand = qmc.scale(sobol.random(n_screen), lo[free], hi[free])
    scores = np.array([objective(z) for z in cand])
    starts = [cand[i] for i in np.argsort(scores, kind="stable")[:n_restarts]]
    if start is not None:
        z0 = np.array([math.log10(getattr(start, n)) for n in names])
        starts.insert(0, np.clip(z0, lo, hi)[free])
    best, best_f, converged = None, math.inf, False
    b = list(zip(lo[free], hi[free]))
    for z0 in starts:
        res = optimize.minimize(objective, z0, method="Nelder-Mead", bounds=b,
                                options={"maxfev": maxfev, "xatol": 1e-5, "fatol": 1e-7,
                                         "adaptive": True})
        if res.fun < best_f:
            best, best_f, converged = res.x, float(res.fun), bool(res.success)
    return to_params(np.clip(best, lo[free], hi[free])), best_f, converged


def _check_bounds(bounds: dict | None) -> dict:
    bounds = {**DEFAULT_BOUNDS, **(bounds or {})}
    for name, (lo, hi) in bounds.items():
        if not (0 < lo <= hi and math.isfinite(hi)):
            raise ValueError(f"invalid bounds for {name}: {(lo, hi)}")
    return bounds


def fit_pre_stimulation(pre_stim: HydraulicSeries, bounds: dict | None = None, seed: int = 0,
                        mesh: RadialMesh | None = None, base: HydraulicParams | None = None,
                        n_restarts: int = 3, maxfev: int = 400,
                        n_screen: int = 64) -> tuple[HydraulicParams, float]:
    """Permeability and storage from a pre-stimulation test (constant permeability).

    Returns:
        (parameters with fitted ``kappa0`` and ``S``, RMSE in MPa)
    """
    if len(pre_stim) < 2:
        raise ValueError("pre-stimulation series needs at least two samples")
    params, rmse, _ = _fit(base or HydraulicParams(), PRE_STIM_NAMES, _check_bounds(bounds),
                           mesh or RadialMesh(), pre_stim, False, np.random.default_rng(seed),
                           n_restarts, None, maxfev, [], n_screen)
    return params, rmse


def invert_hydraulics(observed: HydraulicSeries, pre_stim: HydraulicSeries | None = None,
                      bounds: dict | None = None, seed: int = 0, mesh: RadialMesh | None = None,
                      base: HydraulicParams | None = None, start: HydraulicParams | None = None,
                      n_restarts: int = 3, maxfev: int = 400, n_screen: int = 64,
                      misfit_tol_mpa: float = 0.1,
                      pre_fit: tuple[HydraulicParams, float] | None = None) -> InversionResult:
    """Fit hydraulic parameters to observed wellhead pressure.

    Args:
        observed: stimulation series (flow and wellhead pressure).
        pre_stim: pre-stimulation test series; when absent, permeability
            and storage are fitted together with the stimulation parameters.
        bounds: per-parameter (lo, hi); equal bounds pin a parameter.
        start: warm-start point tried in addition to the screened restarts.
        n_restarts: simplex searches started from the best screened points.
        maxfev: function-evaluation budget per restart.
        n_screen: Sobol screening points per stage (a power of two).
        pre_fit: result of ``fit_pre_stimulation`` to reuse instead of
            refitting permeability and storage.

    Returns:
        InversionResult with the best parameters found. ``converged`` is
        false when no restart met the simplex tolerances within budget;
        ``misfit_flag`` marks an RMSE above ``misfit_tol_mpa``.
    """
    if len(observed) < 2:
        raise ValueError("observed series needs at least two samples")
    mesh = mesh or RadialMesh()
    base = base or HydraulicParams()
    bounds = _check_bounds(bounds)
    rng = np.random.default_rng(seed)
    history: list[float] = []

    pre_rmse = math.nan
    converged = True
    if pre_fit is not None:
        fitted, pre_rmse = pre_fit
        base = replace(base, kappa0=fitted.kappa0, S=fitted.S)
        names = STIM_NAMES
    elif pre_stim is not None and len(pre_stim) >= 2:
        base, pre_rmse, ok = _fit(base, PRE_STIM_NAMES, bounds, mesh, pre_stim, False, rng,
                                  n_restarts, start, maxfev, history, n_screen)
        converged &= ok
        names = STIM_NAMES
    else:
        names = PRE_STIM_NAMES + STIM_NAMES
    params, rmse, ok = _fit(base, names, bounds, mesh, observed, True, rng, n_restarts,
                            start, maxfev, history, n_screen)
    converged &= ok
    rmse, offset = pressure_misfit(params, mesh, observed, True)
    if not converged:
        logger.warning("hydraulic inversion did not converge; returning best-so-far (RMSE %.4g MPa)", rmse)
    return InversionResult(params, rmse, offset, converged, rmse > misfit_tol_mpa,
                           len(history), history, pre_rmse)


def write_diagnostics(result: InversionResult, run: DiffusionResult | None, out_dir) -> list[Path]:
    """Misfit curve and stimulation-factor profile snapshots as CSV."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [out_dir / "hysei_misfit.csv"]
    with paths[0].open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["evaluation", "rmse_mpa"])
        for i, v in enumerate(result.history):
            w.writerow([i, repr(float(v))])
    if run is not None and len(run.record_times):
        paths.append(out_dir / "hysei_u_profiles.csv")
        with paths[1].open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_s"] + [f"r_{r:.1f}" for r in run.mesh.r])
            for t, row in zip(run.record_times, run.u_rec):
                w.writerow([repr(float(t))] + [repr(float(v)) for v in row])
    return paths
