"""Elastic waves across lattices of time-modulated spring-mass interfaces.

Full-field simulation, leading- and second-order homogenised models, Floquet
dispersion analysis and the diagnostics tying them together.
"""

from .backend import BACKEND, HAS_NATIVE
from .config import (
    BulkMedium,
    ConfigError,
    GridSpec,
    InterfaceSpec,
    Lattice,
    Modulation,
    ProblemConfig,
    ScalingFrame,
    SourcePulse,
    eta_n,
    load_config,
    reference_speed,
    source_signal,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "HAS_NATIVE",
    "BulkMedium",
    "ConfigError",
    "GridSpec",
    "InterfaceSpec",
    "Lattice",
    "Modulation",
    "ProblemConfig",
    "ScalingFrame",
    "SourcePulse",
    "eta_n",
    "load_config",
    "reference_speed",
    "source_signal",
]
