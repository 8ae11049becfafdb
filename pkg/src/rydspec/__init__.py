"""Spectral analysis toolkit for Rydberg exciton absorption and PL spectra.

Forward model (Rydberg series, Fano peaks, Urbach tail), least-squares
fitting, replica-exchange Monte Carlo model selection and the
temperature/power analysis workflows.
"""

__version__ = "0.1.0"

from .errors import DataError, DomainError  # noqa: E402
from .model import (  # noqa: E402
    ElliottParams,
    EnergyGrid,
    FanoPeakParams,
    LinewidthLawParams,
    PeakModel,
    RydbergSeriesParams,
    UrbachParams,
    composite_spectrum,
    elliott_bandgap,
    elliott_binding,
    exciton_radius,
    fano_lineshape,
    linewidth_law,
    rydberg_energy,
    urbach_tail,
)

__all__ = [
    "__version__",
    "DataError",
    "DomainError",
    "ElliottParams",
    "EnergyGrid",
    "FanoPeakParams",
    "LinewidthLawParams",
    "PeakModel",
    "RydbergSeriesParams",
    "UrbachParams",
    "composite_spectrum",
    "elliott_bandgap",
    "elliott_binding",
    "exciton_radius",
    "fano_lineshape",
    "linewidth_law",
    "rydberg_energy",
    "urbach_tail",
]
