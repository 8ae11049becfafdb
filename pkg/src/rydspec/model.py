"""Closed-form forward model for Rydberg exciton spectra.

All energies are in eV except the Elliott temperature law, which works in
meV to match how its coefficients are usually quoted.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError

BOLTZMANN_MEV_PER_K = 0.08617333262
PHONON_ENERGY_MEV = 13.6
BOHR_RADIUS_NM = 1.11


def _readonly(arr):
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EnergyGrid:
    """Sampled spectrum: strictly increasing photon energies and values."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        points = _readonly(self.points)
        values = _readonly(self.values)
        if points.ndim != 1 or values.shape != points.shape:
            raise DomainError("points and values must be 1-D arrays of equal length")
        if points.size < 2:
            raise DomainError("an energy grid needs at least 2 points")
        if not np.all(np.isfinite(points)) or not np.all(np.isfinite(values)):
            raise DomainError("grid points and values must be finite")
        if np.any(np.diff(points) <= 0):
            raise DomainError("grid points must be strictly increasing")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.points.size

    @property
    def is_uniform(self):
        return is_uniform(self.points)


def is_uniform(points, rtol=1e-6):
    steps = np.diff(np.asarray(points, dtype=float))
    return bool(np.all(np.abs(steps - steps.mean()) <= rtol * abs(steps.mean())))


@dataclass(frozen=True)
class RydbergSeriesParams:
    bandgap_energy: float
    binding_energy: float
    quantum_defects: Mapping[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.bandgap_energy > 0:
            raise DomainError(f"bandgap energy must be positive, got {self.bandgap_energy}")
        # Ry = 0 is accepted as the degenerate "no binding" case.
        if not self.binding_energy >= 0:
            raise DomainError(f"binding energy must be non-negative, got {self.binding_energy}")
        defects = {int(n): float(d) for n, d in dict(self.quantum_defects).items()}
        for n, d in defects.items():
            if n >= 2 and not d < n:
                raise DomainError(f"quantum defect {d} for n={n} makes n - delta non-positive")
        object.__setattr__(self, "quantum_defects", defects)

    def defect(self, n):
        return self.quantum_defects.get(int(n), 0.0)


@dataclass(frozen=True)
class FanoPeakParams:
    center: float
    width: float
    amplitude: float
    asymmetry: float = 0.0

    def __post_init__(self):
        if not self.width > 0:
            raise DomainError(f"Fano linewidth must be positive, got {self.width}")
        if not self.amplitude >= 0:
            raise DomainError(f"Fano amplitude must be non-negative, got {self.amplitude}")


@dataclass(frozen=True)
class UrbachParams:
    magnitude: float
    urbach_energy: float
    bandgap_energy: float

    def __post_init__(self):
        if not self.magnitude >= 0:
            raise DomainError(f"Urbach magnitude must be non-negative, got {self.magnitude}")
        if not self.urbach_energy > 0:
            raise DomainError(f"Urbach energy must be positive, got {self.urbach_energy}")


@dataclass(frozen=True)
class ElliottParams:
    """Coefficients of the coth temperature law, all in meV."""

    E_g0: float
    E_gT: float
    Ry_0: float
    Ry_T: float
    phonon_energy: float = PHONON_ENERGY_MEV
    boltzmann_constant: float = BOLTZMANN_MEV_PER_K

    def __post_init__(self):
        if not self.Ry_0 > 0:
            raise DomainError(f"Ry_0 must be positive, got {self.Ry_0}")
        if not self.phonon_energy > 0 or not self.boltzmann_constant > 0:
            raise DomainError("phonon energy and Boltzmann constant must be positive")


@dataclass(frozen=True)
class LinewidthLawParams:
    scale: float
    floor: float
    unit: str = "nm"

    def __post_init__(self):
        if not self.floor >= 0:
            raise DomainError(f"linewidth floor must be non-negative, got {self.floor}")


@dataclass(frozen=True)
class PeakModel:
    """Fano peaks on an Urbach background, optionally Gaussian-broadened.

    ``instrumental_sigma`` is the standard deviation (eV) of the Gaussian
    convolved into the summed curve; 0 disables broadening.
    """

    series: RydbergSeriesParams
    peaks: Sequence[FanoPeakParams]
    urbach: UrbachParams
    instrumental_sigma: float = 0.0

    def __post_init__(self):
        peaks = tuple(self.peaks)
        object.__setattr__(self, "peaks", peaks)
        centers = np.array([p.center for p in peaks])
        if centers.size > 1 and np.any(np.diff(centers) <= 0):
            raise DomainError("peak centers must be strictly increasing")
        if centers.size and np.any(centers >= self.urbach.bandgap_energy):
            raise DomainError("every peak center must lie below the bandgap")
        if not self.instrumental_sigma >= 0:
            raise DomainError("instrumental sigma must be non-negative")
        if self.urbach.bandgap_energy != self.series.bandgap_energy:
            raise DomainError("Urbach and series bandgap energies must agree")

    @property
    def n_peaks(self):
        return len(self.peaks)


def rydberg_energy(series: RydbergSeriesParams, n: int) -> float:
    """Level energy E_g - Ry / (n - delta_n)**2 in eV."""
    if int(n) != n or n < 2:
        raise DomainError(f"principal quantum number must be an integer >= 2, got {n}")
    denom = n - series.defect(n)
    if denom <= 0:
        raise DomainError(f"n - delta_n = {denom} is not positive")
    return series.bandgap_energy - series.binding_energy / (denom * denom)


def fano_lineshape(peak: FanoPeakParams, energy):
    """Fano absorption C (G/2 + 2q(E - E0)) / ((G/2)**2 + (E - E0)**2).

    Values may be negative away from the centre when q != 0.
    """
    if not peak.width > 0:
        raise DomainError(f"Fano linewidth must be positive, got {peak.width}")
    return fano_values(np.asarray(energy, dtype=float), peak.center, peak.width,
                       peak.amplitude, peak.asymmetry)


def fano_values(energy, center, width, amplitude, asymmetry):
    # Broadcasting kernel shared by the fitters and the samplers.
    half = 0.5 * width
    x = energy - center
    return amplitude * (half + 2.0 * asymmetry * x) / (half * half + x * x)


def urbach_tail(urbach: UrbachParams, energy):
    """Exponential absorption edge alpha_0 exp((E - E_g) / E_u)."""
    if not urbach.urbach_energy > 0:
        raise DomainError(f"Urbach energy must be positive, got {urbach.urbach_energy}")
    energy = np.asarray(energy, dtype=float)
    return urbach.magnitude * np.exp((energy - urbach.bandgap_energy) / urbach.urbach_energy)


def gaussian_kernel(step, sigma, truncate=8.0):
    """Unit-sum discrete Gaussian sampled at multiples of ``step``."""
    width = sigma / step
    half = max(int(np.ceil(truncate * width)), 0)
    offsets = np.arange(-half, half + 1, dtype=float)
    if width == 0:
        return np.ones(1)
    kernel = np.exp(-0.5 * (offsets / width) ** 2)
    return kernel / kernel.sum()


def gaussian_broaden(values, step, sigma):
    """Convolve with a unit-area Gaussian of std ``sigma``, zero padded.

    ``values`` may be 1-D or 2-D (rows broadened independently).
    """
    if sigma == 0:
        return np.array(values, dtype=float)
    if sigma < 0:
        raise DomainError("broadening sigma must be non-negative")
    kernel = gaussian_kernel(step, sigma)
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return _convolve_same(values, kernel)
    return np.stack([_convolve_same(row, kernel) for row in values])


def _convolve_same(row, kernel):
    full = np.convolve(row, kernel, mode="full")
    half = (kernel.size - 1) // 2
    return full[half:half + row.size]


def composite_spectrum(model: PeakModel, grid_points) -> EnergyGrid:
    """Sum of every Fano peak and the Urbach tail sampled on ``grid_points``."""
    points = np.asarray(grid_points, dtype=float)
    if points.ndim != 1 or points.size < 2 or np.any(np.diff(points) <= 0):
        raise DomainError("grid points must be a strictly increasing 1-D sequence of >= 2 energies")
    total = urbach_tail(model.urbach, points)
    for peak in model.peaks:
        total = total + fano_lineshape(peak, points)
    if model.instrumental_sigma > 0:
        if not is_uniform(points):
            raise DomainError("instrumental broadening requires a uniform energy grid")
        total = gaussian_broaden(total, points[1] - points[0], model.instrumental_sigma)
    return EnergyGrid(points, total)


def elliott_bracket(params: ElliottParams, temperature):
    """coth(hw / 2kT) - 1, with T = 0 mapped to its limit 0."""
    t = np.asarray(temperature, dtype=float)
    if np.any(t < 0):
        raise DomainError("temperature must be non-negative")
    out = np.zeros_like(t)
    hot = t > 0
    x = params.phonon_energy / (2.0 * params.boltzmann_constant * t[hot])
    with np.errstate(over="ignore"):
        bracket = 2.0 / np.expm1(2.0 * x)
    small = x < 1e-6
    # Laurent series of coth x - 1 near 0.
    bracket[small] = 1.0 / x[small] - 1.0 + x[small] / 3.0
    out[hot] = bracket
    return float(out) if out.ndim == 0 else out


def elliott_bandgap(params: ElliottParams, temperature):
    """E_g(T) in meV."""
    return params.E_g0 + params.E_gT * elliott_bracket(params, temperature)


def elliott_binding(params: ElliottParams, temperature):
    """Ry(T) in meV."""
    return params.Ry_0 + params.Ry_T * elliott_bracket(params, temperature)


def elliott_level(params: ElliottParams, n, temperature, defect=0.0):
    """Rydberg level E_n(T) in meV with E_g and Ry following the Elliott law."""
    denom = np.asarray(n, dtype=float) - defect
    if np.any(denom <= 0):
        raise DomainError("n - delta_n must be positive")
    return elliott_bandgap(params, temperature) - elliott_binding(params, temperature) / denom ** 2


def exciton_radius(n: int, bohr_radius: float = BOHR_RADIUS_NM) -> float:
    """p-exciton wavefunction size a_b (3 n**2 - 2) in nm."""
    if n < 1 or bohr_radius <= 0:
        raise DomainError("need n >= 1 and a positive Bohr radius")
    return bohr_radius * (3 * n * n - 2)


def linewidth_law(params: LinewidthLawParams, n):
    """Saturating linewidth alpha (n**2 - 1) / n**5 + beta."""
    n = np.asarray(n, dtype=float)
    if np.any(n < 1):
        raise DomainError("n must be >= 1")
    # (n**2 - 1) / n**5 written so that large n underflows to 0 instead of inf / inf
    inv = 1.0 / n
    out = params.scale * (1.0 - inv * inv) * inv ** 3 + params.floor
    return float(out) if out.ndim == 0 else out
