"""Pseudo-prospective experiment driver.

For each learning end on the recalibration grid, every enabled model is
calibrated on data strictly up to that time (masked views of the catalog
and hydraulics), forecasts the FTWs of the horizon, and is evaluated
against the held-out observations. Periods are independent and use RNG
streams derived from (seed, period, model), so results do not depend on
execution order.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import evaluation as ev
from .catalog import SeismicCatalog, load_catalog
from .config import ExperimentConfig
from .exceptions import DataError, ModelError
from .forecast import Forecast
from .grid import TimeWindows, learning_ends
from .hydraulics import HydraulicSeries, load_hydraulics
from .hysei import HySeiConfig, hysei_forecast
from .hysei.diffusion import StabilityError
from .hysei.inversion import fit_pre_stimulation
from .magnitudes import MagnitudePMF, estimate_b_value
from .sass import sass_forecast

logger = logging.getLogger(__name__)

HORIZONS_H = (6, 24, 48, 72)
NO_DATA = "no-data"
MODEL_ERROR = "model-error"
NO_EVENT = "no-event"
OK = "ok"

# model-specific failures that mark one period as a model error
_MODEL_FAILURES = (ModelError, ValueError, RuntimeError, StabilityError, ZeroDivisionError)


@dataclass(frozen=True)
class ExperimentData:
    catalog: SeismicCatalog
    hydraulics: HydraulicSeries
    pre_stim: HydraulicSeries | None
    data_end: float


def load_data(cfg: ExperimentConfig) -> ExperimentData:
    catalog = load_catalog(cfg.catalog, cfg.mc, cfg.well_tip)
    hydraulics = load_hydraulics(cfg.hydraulics)
    pre = load_hydraulics(cfg.pre_stim) if cfg.pre_stim is not None else None
    if len(hydraulics) < 2:
        raise DataError("hydraulic series needs at least two samples")
    ends = [float(hydraulics.t[-1])] + ([float(catalog.t[-1])] if len(catalog) else [])
    return ExperimentData(catalog, hydraulics, pre, max(ends))


def _seed(*parts: int) -> int:
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def uniform_forecast(catalog: SeismicCatalog, windows: TimeWindows, grid, mc: float,
                     m_max: float | None = None, truncation: float | None = None) -> Forecast:
    """Reference model: learning-period mean rate, GR magnitudes, uniform space."""
    L = windows.learning_end
    learning = catalog.until(L).above(mc)
    learning = learning.select(learning.t >= 0)
    if len(learning) < 2:
        raise ModelError("uniform model needs observed events in the learning period")
    try:
        b = estimate_b_value(learning, mc)
    except ValueError as exc:
        raise ModelError(str(exc)) from None
    if m_max is None:
        m_max = truncation if truncation is not None else mc + 3.0
    pmf = MagnitudePMF.from_gr(b, mc, m_max, truncated_top=truncation is not None)
    ftws = windows.ftws()
    rate = len(learning) / L
    return Forecast("uniform", L, ftws, np.full(len(ftws), rate * windows.ftw_length), [pmf] * len(ftws),
                    np.tile(grid.uniform(), (len(ftws), 1)), grid, {"rate_per_s": rate, "b": b})


def make_forecast(name: str, block: dict, data: ExperimentData, windows: TimeWindows,
                  cfg: ExperimentConfig, seed: int, shared: dict | None = None) -> Forecast:
    """Calibrate one model on masked views of the data and forecast ``windows``."""
    L = windows.learning_end
    catalog = data.catalog.until(L)
    hydraulics = data.hydraulics.until(L)
    shared = shared or {}
    if name == "sass":
        return sass_forecast(catalog, hydraulics, windows, cfg.grid, cfg.mc, plan=cfg.plan,
                             n_trials=int(block.get("n_trials", 1000)), seed=seed,
                             m_max=cfg.m_max, truncation=cfg.truncation)
    if name == "hysei":
        return hysei_forecast(catalog, hydraulics, windows, cfg.grid, cfg.mc,
                              HySeiConfig.from_dict(block), seed, pre_stim=data.pre_stim,
                              plan=cfg.plan, m_max=cfg.m_max, truncation=cfg.truncation,
                              pre_fit=shared.get("hysei_pre_fit"))
    if name == "uniform":
        return uniform_forecast(catalog, windows, cfg.grid, cfg.mc, cfg.m_max, cfg.truncation)
    raise ModelError(f"unknown model {name!r}")


def _window_record(fc_count: float, pmf: MagnitudePMF, rates: np.ndarray, observed: SeismicCatalog,
                   grid, n_sim: int, seed: int, with_m_test: bool) -> dict:
    n = len(observed)
    vox, n_clamped = grid.voxel_index(observed.locations)
    floored, n_floor = ev.floor_rates(rates)
    nt = ev.n_test(fc_count, n)
    st = ev.s_test(rates, vox, n_sim, seed=_seed(seed, 1))
    ll_number = ev.number_ll(fc_count, n)
    ll_magnitude = ev.magnitude_ll(pmf, observed.m) if n else 0.0
    ll_space = st.statistic if n else 0.0
    combined = ll_number + ll_magnitude + ll_space
    rec = {
        "expected": float(fc_count),
        "observed": n,
        "n_status": nt.status,
        "n_ci": list(nt.reference),
        "s_status": NO_EVENT if n == 0 else st.status,
        "s_statistic": None if n == 0 else st.statistic,
        "s_threshold": None if n == 0 else st.reference[0],
        "ll_number": ll_number,
        "ll_magnitude": ll_magnitude,
        "ll_space": ll_space,
        "ll_combined": combined,
        "ll_space_per_eqk": ev.ll_per_eqk(ll_space, n),
        "ll_combined_per_eqk": ev.ll_per_eqk(combined, n),
        "event_log_rates": np.log(floored[vox]).tolist(),
        "event_voxels": vox.tolist(),
        "n_clamped": n_clamped,
        "n_floored": n_floor,
    }
    if with_m_test:
        mt = ev.m_test(pmf, observed.m, n_sim, seed=_seed(seed, 2))
        rec["m_status"] = mt.status
        rec["m_statistic"] = None if n == 0 else mt.statistic
        rec["m_threshold"] = None if n == 0 else mt.reference[0]
    return rec


def evaluate_forecast(fc: Forecast, data: ExperimentData, cfg: ExperimentConfig, seed: int) -> dict:
    """Per-FTW and per-horizon evaluation records for one forecast."""
    observed_all = data.catalog.above(cfg.mc)
    ftws = []
    for k, (t1, t2) in enumerate(fc.windows):
        if t2 > data.data_end + 1e-9:
            ftws.append({"status": NO_DATA})
            continue
        rec = _window_record(fc.expected_counts[k], fc.pmfs[k], fc.rate_grid(k),
                             observed_all.between(t1, t2), cfg.grid, cfg.n_sim, _seed(seed, k), False)
        rec["status"] = OK
        ftws.append(rec)
    horizons = {}
    for h in HORIZONS_H:
        n_ftw = int(round(h * 3600.0 / cfg.ftw_length))
        if n_ftw < 1 or n_ftw > fc.n_ftw or abs(h * 3600.0 - n_ftw * cfg.ftw_length) > 1e-6:
            continue
        t1, t2 = fc.learning_end, fc.learning_end + n_ftw * cfg.ftw_length
        if t2 > data.data_end + 1e-9:
            horizons[str(h)] = {"status": NO_DATA}
            continue
        count, pmf, rates = fc.cumulative(n_ftw)
        rec = _window_record(count, pmf, rates, observed_all.between(t1, t2), cfg.grid, cfg.n_sim,
                             _seed(seed, 1000 + h), True)
        rec["status"] = OK
        horizons[str(h)] = rec
    return {"ftws": ftws, "horizons": horizons}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def run_period(args) -> dict:
    """One (learning end, model) cell: forecast and evaluate, or record the model error."""
    cfg, data, period_idx, model_idx, name, L, shared = args
    windows = TimeWindows(L, cfg.ftw_length, cfg.horizon, cfg.recal_step)
    seed = _seed(cfg.seed, period_idx, model_idx)
    try:
        fc = make_forecast(name, cfg.models[name], data, windows, cfg, seed, shared)
    except _MODEL_FAILURES as exc:
        logger.warning("%s failed at learning end %.0f s: %s", name, L, exc)
        return {"learning_end": L, "status": MODEL_ERROR, "error": f"{type(exc).__name__}: {exc}"}
    out = {"learning_end": L, "status": OK, "diagnostics": _jsonable(fc.diagnostics)}
    out.update(evaluate_forecast(fc, data, cfg, _seed(seed, 99)))
    return out


def _shared_state(cfg: ExperimentConfig, data: ExperimentData) -> dict:
    shared = {}
    if "hysei" in cfg.models:
        hcfg = HySeiConfig.from_dict(cfg.models["hysei"])
        pre = data.pre_stim
        if pre is None and np.any(data.hydraulics.t < 0):
            neg = data.hydraulics.t < 0
            pre = HydraulicSeries(data.hydraulics.t[neg], data.hydraulics.flow_lps[neg],
                                  data.hydraulics.whp_mpa[neg])
        if hcfg.fixed_params is None and pre is not None and len(pre) >= 2:
            # pre-stimulation data precede every learning end, so one fit serves all periods
            shared["hysei_pre_fit"] = fit_pre_stimulation(
                pre, hcfg.bounds, _seed(cfg.seed, 7), hcfg.inversion_mesh or hcfg.mesh, hcfg.base,
                hcfg.n_restarts, hcfg.maxfev, hcfg.n_screen)
    return shared


def run_experiment(cfg: ExperimentConfig, jobs: int = 1, data: ExperimentData | None = None) -> dict:
    """Run every (learning end, model) cell and compare model pairs.

    Returns:
        The report mapping consumed by ``report.emit_report``.
    """
    data = data or load_data(cfg)
    ends = learning_ends(cfg.first_learning_end, data.data_end, cfg.recal_step, cfg.ftw_length,
                         cfg.last_learning_end)
    shared = _shared_state(cfg, data)
    tasks = [(cfg, data, i, j, name, L, shared)
             for i, L in enumerate(ends) for j, name in enumerate(cfg.model_names)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_period, tasks))
    else:
        results = [run_period(t) for t in tasks]
    periods = {name: [] for name in cfg.model_names}
    for task, res in zip(tasks, results):
        periods[task[4]].append(res)

    report = {
        "schema": 1,
        "seed": cfg.seed,
        "models": cfg.model_names,
        "learning_ends": ends,
        "ftw_length_s": cfg.ftw_length,
        "n_ftw": int(round(cfg.horizon / cfg.ftw_length)),
        "horizons_h": [h for h in HORIZONS_H if h * 3600.0 <= cfg.horizon + 1e-6],
        "data_end_s": data.data_end,
        "mc": cfg.mc,
        "plan_held_last_rate": cfg.plan is None,
        "n_sim": cfg.n_sim,
        "n_boot": cfg.n_boot,
        "config": cfg.raw,
        "periods": periods,
    }
    names = cfg.model_names
    report["comparisons"] = {f"{a}_vs_{b}": compare_models(report, a, b)
                             for i, a in enumerate(names) for b in names[i + 1:]}
    return report


def _cell_ok(rec: dict | None) -> bool:
    return rec is not None and rec.get("status") == OK


def compare_models(report: dict, model_a: str, model_b: str, n_boot: int | None = None,
                   seed: int | None = None) -> dict:
    """LL differences, cumulative LL/Eqk and information-gain summaries of A over B.

    Cells where either model failed or no data exist are excluded and counted.
    """
    for m in (model_a, model_b):
        if m not in report["periods"]:
            raise KeyError(f"model {m!r} not in report")
    n_boot = n_boot or report.get("n_boot", 1000)
    seed = report.get("seed", 0) if seed is None else seed
    pa, pb = report["periods"][model_a], report["periods"][model_b]
    n_ftw = report["n_ftw"]
    components = ("number", "magnitude", "space", "combined")
    diffs = {c: [] for c in components}
    excluded = 0
    gains: dict[str, list] = {str(h): [] for h in report["horizons_h"]}
    for i, (ra, rb) in enumerate(zip(pa, pb)):
        rows = {c: [] for c in components}
        for k in range(n_ftw):
            ca = ra["ftws"][k] if ra["status"] == OK else None
            cb = rb["ftws"][k] if rb["status"] == OK else None
            if _cell_ok(ca) and _cell_ok(cb):
                for c in components:
                    rows[c].append(ca[f"ll_{c}"] - cb[f"ll_{c}"])
                if "6" in gains:
                    gains["6"].extend(_gain_values(ca, cb, i, k))
            else:
                excluded += 1
                for c in components:
                    rows[c].append(None)
        for c in components:
            diffs[c].append(rows[c])
        for h in gains:
            if h == "6":
                continue
            ca = ra.get("horizons", {}).get(h) if ra["status"] == OK else None
            cb = rb.get("horizons", {}).get(h) if rb["status"] == OK else None
            if _cell_ok(ca) and _cell_ok(cb):
                gains[h].extend(_gain_values(ca, cb, i, None))

    summaries = {}
    for h, samples in gains.items():
        values = [s["value"] for s in samples]
        summaries[h] = {}
        for j, method in enumerate(ev.ESTIMATORS):
            s = ev.summarize_gain(values, method, n_boot, seed=_seed(seed, int(h), j))
            summaries[h][method] = {
                "value": s.value, "ci95": list(s.ci95), "n": s.n, "significant": s.significant,
                "flagged": s.flagged,
                "probability_gain": ev.exponentiate_gain(s.value) if math.isfinite(s.value) else None,
            }
    return {
        "model_a": model_a,
        "model_b": model_b,
        "ll_differences": diffs,
        "cumulative_ll_per_eqk": {model_a: cumulative_ll_per_eqk(pa, report["horizons_h"]),
                                  model_b: cumulative_ll_per_eqk(pb, report["horizons_h"])},
        "gain_samples": gains,
        "gain_summaries": summaries,
        "excluded_cells": excluded,
    }


def _gain_values(ca: dict, cb: dict, period: int, ftw: int | None) -> list[dict]:
    n = ca["observed"]
    if n == 0:
        return []
    penalty = (cb["expected"] - ca["expected"]) / n
    return [{"period": period, "ftw": ftw, "voxel": v, "value": penalty + (la - lb)}
            for v, la, lb in zip(ca["event_voxels"], ca["event_log_rates"], cb["event_log_rates"])]


def cumulative_ll_per_eqk(periods: list[dict], horizons) -> dict:
    """Combined LL/Eqk per learning end for each horizon (None where undefined)."""
    out = {}
    for h in horizons:
        col = []
        for rec in periods:
            cell = rec.get("horizons", {}).get(str(h)) if rec["status"] == OK else None
            col.append(cell["ll_combined_per_eqk"] if _cell_ok(cell) else None)
        out[str(h)] = col
    return out


def all_models_failed(report: dict) -> list[str]:
    """Models whose every period ended in a model error."""
    return [m for m, recs in report["periods"].items()
            if recs and all(r["status"] == MODEL_ERROR for r in recs)]
