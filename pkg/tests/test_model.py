import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rydspec.errors import DomainError
from rydspec.model import (
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
    elliott_level,
    exciton_radius,
    fano_lineshape,
    gaussian_broaden,
    linewidth_law,
    rydberg_energy,
    urbach_tail,
)
from rydspec.published import ELLIOTT_THIN_FILM, bulk_peak_model


# -- Rydberg series ------------------------------------------------------

@pytest.mark.example
def test_rydberg_n2_bulk_values():
    series = RydbergSeriesParams(2.173, 0.0949, {2: 0.0096})
    expected = 2.173 - 0.0949 / (2 - 0.0096) ** 2
    assert rydberg_energy(series, 2) == pytest.approx(expected, rel=1e-15)
    assert rydberg_energy(series, 2) == pytest.approx(2.14905, abs=5e-6)


@pytest.mark.example
def test_rydberg_large_n_approaches_gap():
    series = RydbergSeriesParams(2.173, 0.0949)
    assert abs(rydberg_energy(series, 10**6) - 2.173) < 1e-9


@pytest.mark.example
def test_rydberg_zero_binding_energy():
    series = RydbergSeriesParams(2.173, 0.0)
    assert all(rydberg_energy(series, n) == 2.173 for n in range(2, 20))


def test_rydberg_rejects_small_n():
    with pytest.raises(DomainError):
        rydberg_energy(RydbergSeriesParams(2.173, 0.0949), 1)


@settings(max_examples=60, deadline=None)
@given(eg=st.floats(1.0, 3.0), ry=st.floats(1e-3, 0.2), delta=st.floats(-0.4, 0.4))
def test_rydberg_monotone_with_shrinking_gaps(eg, ry, delta):
    series = RydbergSeriesParams(eg, ry, {n: delta for n in range(2, 30)})
    e = np.array([rydberg_energy(series, n) for n in range(2, 30)])
    gaps = np.diff(e)
    assert np.all(gaps > 0)
    assert np.all(np.diff(gaps) < 0)


# -- Fano ----------------------------------------------------------------

@pytest.mark.example
def test_fano_peak_value_at_center():
    peak = FanoPeakParams(2.0, 0.2, 1.0, 0.0)
    assert fano_lineshape(peak, 2.0) == pytest.approx(10.0, rel=1e-15)


@pytest.mark.example
def test_fano_hand_value():
    peak = FanoPeakParams(0.0, 0.1, 1.0, 1.0)
    assert fano_lineshape(peak, 0.05) == pytest.approx(30.0, rel=1e-14)


@pytest.mark.example
@settings(max_examples=50, deadline=None)
@given(d=st.floats(0.0, 0.5), width=st.floats(1e-4, 0.1))
def test_fano_symmetric_without_asymmetry(d, width):
    peak = FanoPeakParams(2.1, width, 0.3, 0.0)
    assert fano_lineshape(peak, 2.1 + d) == pytest.approx(fano_lineshape(peak, 2.1 - d), rel=1e-12)


def test_fano_rejects_nonpositive_width():
    with pytest.raises(DomainError):
        FanoPeakParams(2.0, 0.0, 1.0)


# -- Urbach --------------------------------------------------------------

@pytest.mark.example
def test_urbach_at_gap_is_magnitude():
    u = UrbachParams(0.2864, 0.008, 2.173)
    assert urbach_tail(u, 2.173) == 0.2864


@pytest.mark.example
def test_urbach_hand_value():
    u = UrbachParams(0.2864, 0.008, 2.173)
    assert urbach_tail(u, 2.173 - 0.016) == pytest.approx(0.2864 * np.exp(-2.0), rel=1e-12)
    assert urbach_tail(u, 2.173 - 0.016) == pytest.approx(0.03876, abs=5e-6)


@pytest.mark.example
def test_urbach_zero_magnitude():
    u = UrbachParams(0.0, 0.008, 2.173)
    assert np.all(urbach_tail(u, np.linspace(2.0, 2.2, 11)) == 0.0)


# -- composite -----------------------------------------------------------

def _model(peaks=(), alpha0=0.0, sigma=0.0):
    series = RydbergSeriesParams(2.2, 0.1)
    return PeakModel(series, list(peaks), UrbachParams(alpha0, 0.01, 2.2), sigma)


@pytest.mark.example
def test_composite_empty_model_is_zero():
    grid = np.linspace(2.0, 2.1, 50)
    assert np.all(composite_spectrum(_model(), grid).values == 0.0)


@pytest.mark.example
def test_composite_single_peak_is_additive():
    grid = np.linspace(2.0, 2.1, 101)
    peak = FanoPeakParams(2.05, 0.004, 0.002, 1.5)
    model = _model([peak], alpha0=0.3)
    expected = fano_lineshape(peak, grid) + urbach_tail(model.urbach, grid)
    np.testing.assert_array_equal(composite_spectrum(model, grid).values, expected)


@pytest.mark.example
def test_bulk_model_resolves_low_n_resonances():
    grid = np.linspace(2.14, 2.18, 4001)
    y = composite_spectrum(bulk_peak_model(), grid).values
    d = np.diff(y)
    maxima = np.sum((d[:-1] > 0) & (d[1:] <= 0))
    assert maxima >= 5


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_composite_linear_in_amplitudes(seed):
    rng = np.random.default_rng(seed)
    grid = np.linspace(2.0, 2.1, 201)
    centers = np.sort(rng.uniform(2.01, 2.09, 3))
    widths = rng.uniform(1e-3, 1e-2, 3)
    qs = rng.uniform(-5, 5, 3)
    a1, a2 = rng.uniform(0, 1, (2, 3))
    s1, s2 = rng.uniform(0, 1, 2)
    c1, c2 = rng.uniform(0, 2, 2)

    def curve(amps, alpha0):
        peaks = [FanoPeakParams(c, w, a, q) for c, w, a, q in zip(centers, widths, amps, qs)]
        return composite_spectrum(_model(peaks, alpha0, sigma=3e-4), grid).values

    lhs = curve(c1 * a1 + c2 * a2, c1 * s1 + c2 * s2)
    rhs = c1 * curve(a1, s1) + c2 * curve(a2, s2)
    assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10 * np.max(np.abs(lhs)))


def test_broadening_preserves_integral():
    step = 1e-4
    x = np.arange(-0.05, 0.05 + step / 2, step)
    sigma = 1e-3
    y = 1.0 / (1.0 + (x / 2e-3) ** 2) * (np.abs(x) < 0.05 - 6 * sigma)
    out = gaussian_broaden(y, step, sigma)
    assert abs(out.sum() - y.sum()) <= 1e-3 * y.sum()


def test_broadening_requires_uniform_grid():
    grid = np.array([2.0, 2.01, 2.03, 2.04])
    with pytest.raises(DomainError):
        composite_spectrum(_model(sigma=1e-3), grid)


def test_energy_grid_validation():
    with pytest.raises(DomainError):
        EnergyGrid([2.0], [1.0])
    with pytest.raises(DomainError):
        EnergyGrid([2.0, 1.9], [1.0, 1.0])
    g = EnergyGrid([2.0, 2.1], [1.0, 2.0])
    with pytest.raises(ValueError):
        g.values[0] = 5.0


def test_peak_model_requires_ordered_centers_below_gap():
    p1, p2 = FanoPeakParams(2.05, 1e-3, 1.0), FanoPeakParams(2.03, 1e-3, 1.0)
    with pytest.raises(DomainError):
        _model([p1, p2])
    with pytest.raises(DomainError):
        _model([FanoPeakParams(2.25, 1e-3, 1.0)])


# -- Elliott -------------------------------------------------------------

@pytest.mark.example
def test_elliott_zero_temperature():
    assert elliott_bandgap(ELLIOTT_THIN_FILM, 0.0) == 2171.7
    assert elliott_binding(ELLIOTT_THIN_FILM, 0.0) == 96.8


@pytest.mark.example
def test_elliott_150k_against_high_precision():
    mp.mp.dps = 40
    kb, hw = mp.mpf("0.08617333262"), mp.mpf("13.6")
    bracket = mp.coth(hw / (2 * kb * 150)) - 1
    oracle = float(mp.mpf("2171.7") + mp.mpf("-29.5") * bracket)
    assert elliott_bandgap(ELLIOTT_THIN_FILM, 150.0) == pytest.approx(oracle, rel=1e-14)
    assert elliott_bandgap(ELLIOTT_THIN_FILM, 150.0) == pytest.approx(2140.0, abs=0.05)


@pytest.mark.example
def test_elliott_no_temperature_term():
    p = ElliottParams(2171.7, 0.0, 96.8, 0.0)
    t = np.linspace(0, 400, 9)
    assert np.all(elliott_bandgap(p, t) == 2171.7)
    assert np.all(elliott_binding(p, t) == 96.8)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(1e-3, 400.0), egt=st.floats(-50, 50).filter(lambda v: abs(v) > 1e-6))
def test_elliott_shift_has_sign_of_coefficient(t, egt):
    p = ElliottParams(2171.7, egt, 96.8, -20.9)
    shift = elliott_bandgap(p, t) - elliott_bandgap(p, 0.0)
    assert shift == 0.0 or np.sign(shift) == np.sign(egt)


def test_elliott_low_temperature_is_finite():
    t = np.array([1e-6, 0.01, 0.5, 1.0])
    assert np.all(np.isfinite(elliott_bandgap(ELLIOTT_THIN_FILM, t)))


def test_elliott_level_composition():
    e = elliott_level(ELLIOTT_THIN_FILM, 2, 0.0)
    assert e == pytest.approx(2171.7 - 96.8 / 4, rel=1e-15)


# -- radius and linewidth law -------------------------------------------

@pytest.mark.example
@pytest.mark.parametrize("n, ab, expected", [(1, 1.11, 1.11), (7, 1.11, 160.95), (2, 1.0, 10.0)])
def test_exciton_radius(n, ab, expected):
    assert exciton_radius(n, ab) == pytest.approx(expected, rel=1e-14)


@pytest.mark.example
def test_linewidth_law_limits_and_value():
    p = LinewidthLawParams(1.0, 0.05)
    assert linewidth_law(p, 1) == 0.05
    assert linewidth_law(p, 2) == pytest.approx(3 / 32 + 0.05, rel=1e-15)
    assert linewidth_law(p, 2) == pytest.approx(0.14375, rel=1e-15)
    assert linewidth_law(LinewidthLawParams(2.0, 0.061), 10**6) == pytest.approx(0.061, abs=1e-11)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(1e-3, 100.0), beta=st.floats(0.0, 1.0))
def test_linewidth_law_peaks_early_then_decreases(alpha, beta):
    p = LinewidthLawParams(alpha, beta)
    w = linewidth_law(p, np.arange(1, 60))
    assert np.argmax(w) <= 2
    assert np.all(np.diff(w[1:]) < 0)
    assert np.all(w[1:] > beta)
