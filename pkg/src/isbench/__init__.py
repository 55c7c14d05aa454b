"""Pseudo-prospective evaluation of induced-seismicity forecast models."""

from .catalog import SeismicCatalog, SeismicEvent, load_catalog, write_catalog
from .config import ExperimentConfig, load_config, parse_config
from .exceptions import ConfigError, DataError, ModelError
from .experiment import compare_models, run_experiment, uniform_forecast
from .forecast import Forecast
from .grid import TimeWindows, VoxelGrid, learning_ends
from .hydraulics import HydraulicSeries, InjectionPlan, load_hydraulics, write_hydraulics
from .magnitudes import MagnitudePMF, estimate_b_value, poisson_ci95
from .report import emit_report, load_report
from .sass import calibrate, sass_forecast
from .synth import ScenarioSpec, generate_scenario, write_scenario

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "ExperimentConfig", "Forecast", "HydraulicSeries", "InjectionPlan",
    "MagnitudePMF", "ModelError", "ScenarioSpec", "SeismicCatalog", "SeismicEvent", "TimeWindows",
    "VoxelGrid", "calibrate", "compare_models", "emit_report", "estimate_b_value", "generate_scenario",
    "learning_ends", "load_catalog", "load_config", "load_hydraulics", "load_report", "parse_config",
    "poisson_ci95", "run_experiment", "sass_forecast", "uniform_forecast", "write_catalog",
    "write_hydraulics", "write_scenario",
]
