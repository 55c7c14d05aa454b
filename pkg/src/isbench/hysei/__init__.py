"""Hydraulic-and-seismicity hybrid model."""

from .diffusion import (DiffusionResult, FlowSchedule, HydraulicParams, RadialMesh, StabilityError,
                        solve_diffusion)
from .inversion import InversionResult, invert_hydraulics
from .model import HySeiConfig, hysei_forecast
from .offplane import OffPlaneModel, extend_to_3d, fit_offplane
from .seeds import (SeedModelParams, SeedSet, SyntheticCatalog, local_b_value, place_seeds,
                    simulate_seismicity)

__all__ = [
    "DiffusionResult", "FlowSchedule", "HydraulicParams", "RadialMesh", "StabilityError",
    "solve_diffusion", "InversionResult", "invert_hydraulics", "HySeiConfig", "hysei_forecast",
    "OffPlaneModel", "extend_to_3d", "fit_offplane", "SeedModelParams", "SeedSet",
    "SyntheticCatalog", "local_b_value", "place_seeds", "simulate_seismicity",
]
