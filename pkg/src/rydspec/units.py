"""Photon energy / wavelength conversions.

Everything internal runs in eV; nanometres only appear at I/O boundaries.
"""
import numpy as np

from .errors import DomainError

HC_EV_NM = 1239.8419843320026


def _positive(value, what):
    arr = np.asarray(value, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0):
        raise DomainError(f"{what} must be positive and finite, got {value!r}")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def wavelength_to_energy(wavelength_nm):
    return _out(HC_EV_NM / _positive(wavelength_nm, "wavelength"))


def energy_to_wavelength(energy_ev):
    return _out(HC_EV_NM / _positive(energy_ev, "energy"))


def width_ev_to_nm(width_ev, center_ev):
    """Convert a spectral width in eV to nm, linearised at ``center_ev``."""
    lam = HC_EV_NM / _positive(center_ev, "center energy")
    return _out(lam * lam * _positive(width_ev, "width") / HC_EV_NM)


def width_nm_to_ev(width_nm, center_ev):
    """Convert a spectral width in nm to eV, linearised at ``center_ev``."""
    e = _positive(center_ev, "center energy")
    return _out(e * e * _positive(width_nm, "width") / HC_EV_NM)


_DIRECTIONS = {
    "nm->eV": lambda v, c: wavelength_to_energy(v),
    "eV->nm": lambda v, c: energy_to_wavelength(v),
    "width_eV->nm": width_ev_to_nm,
    "width_nm->eV": width_nm_to_ev,
}


def wavelength_energy_convert(value, direction, center_ev=None):
    """Dispatch to one of the conversions by name.

    ``direction`` is one of ``"nm->eV"``, ``"eV->nm"``, ``"width_eV->nm"``,
    ``"width_nm->eV"``. Width conversions need the peak centre in eV.
    """
    try:
        fn = _DIRECTIONS[direction]
    except KeyError:
        raise DomainError(f"unknown direction {direction!r}; expected one of {sorted(_DIRECTIONS)}")
    if direction.startswith("width") and center_ev is None:
        raise DomainError("width conversion needs center_ev")
    return fn(value, center_ev)
