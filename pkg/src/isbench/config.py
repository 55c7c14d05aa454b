"""Experiment configuration (JSON, ``schema: 1``).

Paths are resolved relative to the configuration file. Example::

    {
      "schema": 1,
      "data": {"catalog": "catalog.csv", "hydraulics": "hydraulics.csv"},
      "mc": 0.9,
      "models": {"sass": {"n_trials": 1000}, "hysei": {}},
      "seed": 0,
      "output": "out"
    }
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, DataError
from .grid import SIX_HOURS, THREE_DAYS, VoxelGrid
from .hydraulics import InjectionPlan

SCHEMA_VERSION = 1
KNOWN_MODELS = ("sass", "hysei", "uniform")
FIRST_LEARNING_END = 1.25 * 86400.0

_TOP_KEYS = {"schema", "data", "well_tip", "mc", "grid", "windows", "plan", "magnitudes", "models",
             "evaluation", "seed", "output"}


@dataclass(frozen=True)
class ExperimentConfig:
    catalog: Path
    hydraulics: Path
    mc: float
    models: dict
    pre_stim: Path | None = None
    well_tip: tuple[float, float, float] = (0.0, 0.0, 0.0)
    grid: VoxelGrid = field(default_factory=VoxelGrid)
    ftw_length: float = SIX_HOURS
    horizon: float = THREE_DAYS
    recal_step: float = SIX_HOURS
    first_learning_end: float = FIRST_LEARNING_END
    last_learning_end: float | None = None
    plan: InjectionPlan | None = None
    truncation: float | None = None
    m_max: float | None = None
    n_sim: int = 1000
    n_boot: int = 1000
    seed: int = 0
    output: Path = Path("out")
    raw: dict = field(default_factory=dict, compare=False)

    @property
    def model_names(self) -> list[str]:
        return list(self.models)

    def with_overrides(self, seed: int | None = None, output=None, models=None) -> ExperimentConfig:
        """Copy with CLI overrides applied (``models`` is a name subset)."""
        kwargs = dict(self.__dict__)
        if seed is not None:
            kwargs["seed"] = int(seed)
        if output is not None:
            kwargs["output"] = Path(output)
        if models is not None:
            chosen = {}
            for name in models:
                if name not in KNOWN_MODELS:
                    raise ConfigError(f"unknown model {name!r}")
                chosen[name] = self.models.get(name, {})
            if not chosen:
                raise ConfigError("at least one model must be enabled")
            kwargs["models"] = chosen
        return ExperimentConfig(**kwargs)


def _num(block: dict, key: str, default, cast=float):
    value = block.get(key, default)
    if value is None:
        return None
    try:
        out = cast(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None
    if isinstance(out, float) and not math.isfinite(out):
        raise ConfigError(f"{key}: must be finite")
    return out


def parse_config(data: dict, base_dir=".") -> ExperimentConfig:
    """Validate a configuration mapping; relative paths resolve against ``base_dir``."""
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a JSON object")
    if data.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported or missing schema version (expected {SCHEMA_VERSION})")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    base = Path(base_dir)

    paths = data.get("data") or {}
    def _path(key, required):
        value = paths.get(key)
        if value is None:
            if required:
                raise ConfigError(f"data.{key} is required")
            return None
        p = (base / value).resolve()
        if not p.is_file():
            raise ConfigError(f"data.{key}: file not found: {p}")
        return p

    if "mc" not in data:
        raise ConfigError("mc (magnitude of completeness) is required")
    mc = _num(data, "mc", None)

    tip = data.get("well_tip", [0.0, 0.0, 0.0])
    if not (isinstance(tip, (list, tuple)) and len(tip) == 3):
        raise ConfigError("well_tip must be a list of three coordinates")

    g = data.get("grid") or {}
    grid = VoxelGrid((0.0, 0.0, 0.0), _num(g, "extent", 4000.0), _num(g, "voxel", 200.0))

    w = data.get("windows") or {}
    ftw = _num(w, "ftw_length_s", SIX_HOURS)
    horizon = _num(w, "horizon_s", THREE_DAYS)
    if ftw <= 0 or horizon <= 0 or abs(horizon / ftw - round(horizon / ftw)) > 1e-9:
        raise ConfigError("windows: horizon must be a positive multiple of the FTW length")

    plan = None
    if data.get("plan") is not None:
        try:
            plan = InjectionPlan(np.asarray(data["plan"]["times_s"], dtype=float),
                                 np.asarray(data["plan"]["rates_lps"], dtype=float))
        except (KeyError, TypeError, DataError) as exc:
            raise ConfigError(f"plan: {exc}") from None

    models = data.get("models")
    if not isinstance(models, dict) or not models:
        raise ConfigError("at least one model must be enabled")
    for name, block in models.items():
        if name not in KNOWN_MODELS:
            raise ConfigError(f"unknown model {name!r}")
        if not isinstance(block, dict):
            raise ConfigError(f"models.{name} must be an object")

    mags = data.get("magnitudes") or {}
    ev = data.get("evaluation") or {}
    cfg = ExperimentConfig(
        catalog=_path("catalog", True),
        hydraulics=_path("hydraulics", True),
        pre_stim=_path("pre_stim_hydraulics", False),
        mc=mc,
        models=dict(models),
        well_tip=tuple(float(v) for v in tip),
        grid=grid,
        ftw_length=ftw,
        horizon=horizon,
        recal_step=_num(w, "recal_step_s", SIX_HOURS),
        first_learning_end=_num(w, "first_learning_end_s", FIRST_LEARNING_END),
        last_learning_end=_num(w, "last_learning_end_s", None),
        plan=plan,
        truncation=_num(mags, "truncation", None),
        m_max=_num(mags, "m_max", None),
        n_sim=_num(ev, "n_sim", 1000, int),
        n_boot=_num(ev, "n_boot", 1000, int),
        seed=_num(data, "seed", 0, int),
        output=(base / data.get("output", "out")).resolve(),
        raw=data,
    )
    if cfg.recal_step <= 0 or cfg.first_learning_end <= 0:
        raise ConfigError("windows: recal step and first learning end must be positive")
    if cfg.n_sim < 1 or cfg.n_boot < 1:
        raise ConfigError("evaluation: n_sim and n_boot must be positive")
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return parse_config(data, path.parent)
