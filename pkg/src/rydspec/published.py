"""Parameter values reported for Cu2O, packaged as model objects.

Elliott coefficients are from the thin-film absorption fit; the 10-peak
parameters are the bulk-crystal Bayesian decomposition.
"""
from .model import (
    ElliottParams,
    FanoPeakParams,
    PeakModel,
    RydbergSeriesParams,
    UrbachParams,
    rydberg_energy,
)
from .units import width_nm_to_ev

ELLIOTT_THIN_FILM = ElliottParams(E_g0=2171.7, E_gT=-29.5, Ry_0=96.8, Ry_T=-20.9)

# Linewidth-law floors in nm.
LINEWIDTH_FLOOR_NM = {
    "bulk_od": (0.061, 0.009),
    "synthetic_pl": (0.181, 0.029),
    "synthetic_od": (0.181, 0.043),
}

BULK_BANDGAP_EV = 2.173
BULK_RYDBERG_EV = 0.0949
BULK_SIGMA_NM = 0.02
BULK_URBACH_MAGNITUDE = 0.2864
BULK_URBACH_ENERGY_EV = 0.008

# n: (quantum defect, linewidth nm, asymmetry q, peak strength f)
BULK_PEAKS = {
    2: (0.0096, 0.66, 3.23, 0.185),
    3: (0.043, 0.249, 4.51, 0.0956),
    4: (0.0436, 0.129, 3.64, 0.0458),
    5: (0.0789, 0.0992, 5.469, 0.0246),
    6: (0.0942, 0.0787, 9.1153, 0.0127),
    7: (0.0919, 0.0611, 9.1415, 0.006),
    8: (0.0986, 0.0414, 9.359, 0.003),
    9: (0.0907, 0.0217, 7.4665, 0.0014),
    10: (0.0909, 0.0103, 7.2898, 0.00076),
    11: (0.09, 0.0051, 6.666, 0.00014),
}

# Peak strengths are tabulated against energies in meV; C in eV units is 1e-3 f.
STRENGTH_TO_EV = 1e-3


def bulk_series():
    return RydbergSeriesParams(
        BULK_BANDGAP_EV,
        BULK_RYDBERG_EV,
        {n: row[0] for n, row in BULK_PEAKS.items()},
    )


def bulk_peak_model(n_max=11, broadening=True):
    """The 10-peak (n = 2..11) bulk model with widths converted to eV.

    Widths and the instrumental sigma are converted from nm at each peak
    centre and at the bandgap respectively.
    """
    series = bulk_series()
    peaks = []
    for n in range(2, n_max + 1):
        _, width_nm, q, strength = BULK_PEAKS[n]
        center = rydberg_energy(series, n)
        peaks.append(FanoPeakParams(center, width_nm_to_ev(width_nm, center),
                                    strength * STRENGTH_TO_EV, q))
    urbach = UrbachParams(BULK_URBACH_MAGNITUDE, BULK_URBACH_ENERGY_EV, BULK_BANDGAP_EV)
    sigma = width_nm_to_ev(BULK_SIGMA_NM, BULK_BANDGAP_EV) if broadening else 0.0
    return PeakModel(series, peaks, urbach, sigma)
