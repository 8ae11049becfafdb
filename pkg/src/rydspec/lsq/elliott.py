"""Temperature-law fits over tables of level energies."""
from __future__ import annotations

from typing import Mapping

import numpy as np

from ..errors import DataError
from ..model import ElliottParams, elliott_bracket, elliott_level
from ..synth import CenterTable
from .space import FitReport, Param, ParamSpace, solve

ELLIOTT_NAMES = ("E_g0", "E_gT", "Ry_0", "Ry_T")


class ElliottObjective:
    """Residuals E_n(T) - measured over every row of a centre table (meV)."""

    def __init__(self, table: CenterTable, defects: Mapping[int, float] | None = None,
                 phonon_energy=None, boltzmann_constant=None):
        self.table = table
        defects = defects or {}
        self.defects = np.array([defects.get(int(n), 0.0) for n in table.n])
        self.inv_n2 = 1.0 / (table.n - self.defects) ** 2
        probe = ElliottParams(0.0, 0.0, 1.0, 0.0,
                              **_constants(phonon_energy, boltzmann_constant))
        self.constants = _constants(phonon_energy, boltzmann_constant)
        self.bracket = elliott_bracket(probe, table.temperature)
        w = table.weight if table.weight is not None else np.ones(len(table))
        self.sqrt_w = np.sqrt(w)

    def design(self):
        b, inv = self.bracket, self.inv_n2
        return np.column_stack([np.ones_like(b), b, -inv, -inv * b])

    def residuals(self, theta):
        return self.sqrt_w * (self.design() @ theta - self.table.energy)

    def jacobian(self, theta):
        return self.sqrt_w[:, None] * self.design()

    def params(self, theta):
        return ElliottParams(*map(float, theta), **self.constants)


def _constants(phonon_energy, boltzmann_constant):
    out = {}
    if phonon_energy is not None:
        out["phonon_energy"] = phonon_energy
    if boltzmann_constant is not None:
        out["boltzmann_constant"] = boltzmann_constant
    return out


def fit_elliott(table: CenterTable, assume_zero_defect=True, defects=None, *,
                phonon_energy=None, boltzmann_constant=None) -> tuple[FitReport, ElliottParams]:
    """Simultaneous fit of the coth law for E_g and Ry to all (n, T) rows.

    With ``assume_zero_defect`` every delta_n is 0; otherwise ``defects``
    supplies fixed per-n constants.
    """
    ns = np.unique(table.n)
    ts = np.unique(table.temperature)
    if ns.size < 2:
        raise DataError(f"need >= 2 distinct n, got {ns.tolist()}")
    if ts.size < 3:
        raise DataError(f"need >= 3 distinct temperatures, got {ts.tolist()}; "
                        "the temperature coefficients are not identifiable")
    objective = ElliottObjective(table, None if assume_zero_defect else defects,
                                 phonon_energy, boltzmann_constant)
    design = objective.jacobian(None)
    if np.linalg.matrix_rank(design) < 4:
        raise DataError("degenerate design: the four Elliott coefficients are not identifiable")
    # The model is linear given the defects: seed the solver with the exact
    # linear solution and let the bounded solver enforce Ry_0 > 0.
    seed, *_ = np.linalg.lstsq(design, objective.sqrt_w * table.energy, rcond=None)
    seed[2] = max(seed[2], 1e-6)
    space = ParamSpace([
        ("E_g0", Param(seed[0])),
        ("E_gT", Param(seed[1])),
        ("Ry_0", Param(seed[2], 1e-6, np.inf)),
        ("Ry_T", Param(seed[3])),
    ])
    report = solve(objective.residuals, space, objective.jacobian)
    theta = np.array([report.best_params[n] for n in ELLIOTT_NAMES])
    report.extra["defects"] = "zero" if assume_zero_defect else dict(defects or {})
    return report, objective.params(theta)


def invert_effective_temperature(elliott: ElliottParams, n: int, defect: float,
                                 measured_energy_ev: float, t_max=400.0, tol=1e-6) -> float:
    """Temperature (K) at which level ``n`` sits at ``measured_energy_ev``.

    Solved by bisection on [0, t_max]; the level energy must be monotone on
    that interval.
    """
    def level_ev(t):
        return elliott_level(elliott, n, t, defect) / 1000.0

    probe = level_ev(np.linspace(0.0, t_max, 4001))
    steps = np.diff(probe)
    if not (np.all(steps <= 0) or np.all(steps >= 0)) or np.all(steps == 0):
        raise DataError(f"E_{n}(T) is not monotone on [0, {t_max}] K for these parameters")
    e0, e1 = float(probe[0]), float(probe[-1])
    lo_e, hi_e = min(e0, e1), max(e0, e1)
    if not lo_e <= measured_energy_ev <= hi_e:
        raise DataError(f"energy {measured_energy_ev!r} eV outside the attainable range "
                        f"[{lo_e!r}, {hi_e!r}] eV for n={n}")
    if measured_energy_ev == e0:
        return 0.0
    if measured_energy_ev == e1:
        return float(t_max)
    sign = 1.0 if e1 > e0 else -1.0
    lo, hi = 0.0, float(t_max)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if sign * (level_ev(mid) - measured_energy_ev) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
