"""Scaling-law regressions against the principal quantum number."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DataError
from ..model import LinewidthLawParams
from .space import FitReport, Param, ParamSpace, solve


def _columns(n, y):
    n = np.asarray(n, dtype=float)
    y = np.asarray(y, dtype=float)
    if n.ndim != 1 or n.shape != y.shape:
        raise DataError("n and values must be 1-D and equally long")
    if np.any(n < 1):
        raise DataError("principal quantum numbers must be >= 1")
    return n, y


def _linewidth_basis(n):
    return (n * n - 1.0) / n ** 5


def fit_linewidth_law(n, widths, unit="nm") -> tuple[FitReport, LinewidthLawParams]:
    """Least-squares (alpha, beta) of the saturating law with beta >= 0."""
    n, widths = _columns(n, widths)
    if np.unique(n).size < 3:
        raise DataError("the linewidth law needs at least 3 distinct n")
    design = np.column_stack([_linewidth_basis(n), np.ones_like(n)])
    seed, *_ = np.linalg.lstsq(design, widths, rcond=None)
    space = ParamSpace([
        ("alpha", Param(float(seed[0]))),
        ("beta", Param(float(max(seed[1], 0.0)), 0.0, np.inf)),
    ])
    report = solve(lambda th: design @ th - widths, space, lambda th: design)
    params = LinewidthLawParams(report.best_params["alpha"], report.best_params["beta"], unit)
    return report, params


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    exponent_stderr: float
    log_residuals: np.ndarray
    fixed_exponent: bool

    def predict(self, n):
        return self.prefactor * np.asarray(n, dtype=float) ** self.exponent


def fit_power_law(n, values, fixed_exponent=None) -> PowerLawFit:
    """Ordinary least squares of log(y) on log(n).

    With ``fixed_exponent`` only the prefactor is fitted.
    """
    n, y = _columns(n, values)
    if n.size < 3:
        raise DataError("a power-law fit needs at least 3 points")
    if np.any(y <= 0):
        raise DataError("power-law values must be positive")
    x = np.log(n)
    ly = np.log(y)
    if fixed_exponent is not None:
        k = float(fixed_exponent)
        a = float(np.mean(ly - k * x))
        resid = ly - a - k * x
        return PowerLawFit(k, float(np.exp(a)), 0.0, resid, True)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0:
        raise DataError("need at least two distinct n")
    k = float(xc @ (ly - ly.mean())) / sxx
    a = float(ly.mean() - k * x.mean())
    resid = ly - a - k * x
    dof = n.size - 2
    stderr = float(np.sqrt((resid @ resid) / dof / sxx)) if dof > 0 else 0.0
    return PowerLawFit(k, float(np.exp(a)), stderr, resid, False)
