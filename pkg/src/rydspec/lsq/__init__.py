from .elliott import ElliottObjective, fit_elliott, invert_effective_temperature
from .peaks import PeakObjective, fit_peaks, initial_peak_model, peak_space
from .space import FitReport, Param, ParamSpace, solve
from .trends import PowerLawFit, fit_linewidth_law, fit_power_law

__all__ = [
    "ElliottObjective",
    "FitReport",
    "Param",
    "ParamSpace",
    "PeakObjective",
    "PowerLawFit",
    "fit_elliott",
    "fit_linewidth_law",
    "fit_peaks",
    "fit_power_law",
    "initial_peak_model",
    "invert_effective_temperature",
    "peak_space",
    "solve",
]
