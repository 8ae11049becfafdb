"""Synthetic spectra and centre tables with seeded Gaussian noise."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError
from .model import ElliottParams, EnergyGrid, PeakModel, composite_spectrum, elliott_level
from .rng import make_stream


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    seed: int = 0
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise DomainError(f"unsupported noise kind {self.kind!r}")
        if not self.sigma >= 0:
            raise DomainError("noise sigma must be non-negative")

    def draw(self, size, stream=0):
        if self.sigma == 0:
            return np.zeros(size)
        return self.sigma * make_stream(self.seed, stream).standard_normal(size)


@dataclass(frozen=True)
class SeriesScenario:
    elliott: ElliottParams
    temperatures: Sequence[float]
    n_range: tuple = (2, 4)
    defects: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        temps = np.asarray(self.temperatures, dtype=float)
        if temps.ndim != 1 or temps.size == 0:
            raise DomainError("need at least one temperature")
        if np.any(temps < 0) or np.any(temps > 400):
            raise DomainError("temperatures must lie in [0, 400] K")
        if np.any(np.diff(temps) <= 0):
            raise DomainError("temperatures must be strictly increasing")
        lo, hi = self.n_range
        if lo < 2 or hi < lo:
            raise DomainError(f"bad n range {self.n_range}")
        object.__setattr__(self, "temperatures", tuple(float(t) for t in temps))


@dataclass(frozen=True)
class CenterTable:
    """Columns of (n, temperature K, energy meV) rows plus optional weights."""

    n: np.ndarray
    temperature: np.ndarray
    energy: np.ndarray
    weight: np.ndarray | None = None

    def __post_init__(self):
        n = np.asarray(self.n, dtype=int)
        t = np.asarray(self.temperature, dtype=float)
        e = np.asarray(self.energy, dtype=float)
        if not (n.shape == t.shape == e.shape) or n.ndim != 1:
            raise DomainError("table columns must be 1-D and equally long")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "temperature", t)
        object.__setattr__(self, "energy", e)
        if self.weight is not None:
            w = np.asarray(self.weight, dtype=float)
            if w.shape != n.shape or np.any(w < 0):
                raise DomainError("weights must be non-negative and match the table")
            object.__setattr__(self, "weight", w)

    def __len__(self):
        return self.n.size


def synth_spectrum(model: PeakModel, grid, noise: NoiseSpec) -> EnergyGrid:
    clean = composite_spectrum(model, grid)
    return EnergyGrid(clean.points, clean.values + noise.draw(len(clean)))


def synth_center_table(scenario: SeriesScenario, noise: NoiseSpec) -> CenterTable:
    """Level energies over (n, T) in meV, rows ordered by n then T."""
    ns, ts = [], []
    for n in range(scenario.n_range[0], scenario.n_range[1] + 1):
        for t in scenario.temperatures:
            ns.append(n)
            ts.append(t)
    ns = np.array(ns)
    ts = np.array(ts)
    defects = np.array([scenario.defects.get(int(n), 0.0) for n in ns])
    energy = elliott_level(scenario.elliott, ns, ts, defects)
    return CenterTable(ns, ts, energy + noise.draw(ns.size))
