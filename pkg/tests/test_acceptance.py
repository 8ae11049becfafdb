"""End-to-end acceptance checks, one group per numbered criterion.

The conftest prints a PASS/FAIL line for each criterion in the terminal
summary. Optional long studies are marked slow and run with --runslow.
"""
import os
import re
import shutil
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import ks_2samp

from rydspec.cli import main
from rydspec.io import write_table
from rydspec.lsq import fit_elliott, fit_linewidth_law, fit_peaks, fit_power_law, initial_peak_model, peak_space
from rydspec.model import (
    FanoPeakParams,
    LinewidthLawParams,
    PeakModel,
    RydbergSeriesParams,
    UrbachParams,
    composite_spectrum,
    linewidth_law,
    rydberg_energy,
)
from rydspec.published import (
    BULK_BANDGAP_EV,
    BULK_PEAKS,
    BULK_RYDBERG_EV,
    ELLIOTT_THIN_FILM,
    LINEWIDTH_FLOOR_NM,
    bulk_peak_model,
)
from rydspec.rng import make_stream
from rydspec.rxmc import (
    FanoUrbachModel,
    NoiseLadder,
    ReplicaExchange,
    RunConfig,
    SpectralPrior,
    default_ladder,
    free_energy_curve_for_model,
    metropolis_chains,
    select_model,
)
from rydspec.synth import NoiseSpec, SeriesScenario, synth_center_table, synth_spectrum

from oracles import (
    T95_8DOF,
    TABLE_STRENGTH_EXPONENT,
    amplitude_model,
    constant_model_free_energy,
    constant_toy,
    grid_posterior,
    oracle_power_law,
    peak,
)

ROOT = Path(__file__).resolve().parents[1]


# -- 1: Elliott round trip ----------------------------------------------

@pytest.mark.criterion(1)
def test_elliott_round_trip(record_property):
    start = time.perf_counter()
    temps = np.arange(5.0, 151.0, 5.0)
    table = synth_center_table(SeriesScenario(ELLIOTT_THIN_FILM, temps, (2, 4)), NoiseSpec())
    report, fit = fit_elliott(table)
    rel = max(abs(getattr(fit, k) / getattr(ELLIOTT_THIN_FILM, k) - 1) for k in ("E_g0", "E_gT", "Ry_0", "Ry_T"))
    spread = []
    for seed in range(10):
        noisy = synth_center_table(SeriesScenario(ELLIOTT_THIN_FILM, temps, (2, 4)), NoiseSpec(0.1, seed))
        spread.append(fit_elliott(noisy)[1].E_g0 - ELLIOTT_THIN_FILM.E_g0)
    spread = float(np.max(np.abs(spread)))
    elapsed = time.perf_counter() - start
    record_property("detail", f"max relative error {rel:.1e}, noisy E_g0 spread {spread:.3f} meV, {elapsed:.1f} s")
    assert report.converged and rel < 1e-6
    assert spread <= 0.5
    assert elapsed < 10


# -- 2: ten-peak least-squares round trip --------------------------------

@pytest.mark.criterion(2)
def test_ten_peak_least_squares_round_trip(record_property):
    grid = np.linspace(2.14, 2.18, 4001)
    truth = bulk_peak_model(broadening=False)
    ymax = composite_spectrum(truth, grid).values.max()
    want_c = np.array([rydberg_energy(truth.series, n) for n in range(2, 12)])
    want_d = np.array([truth.series.defect(n) for n in range(2, 12)])
    worst_c = worst_d = slowest = 0.0
    for seed in range(10):
        start = time.perf_counter()
        spectrum = synth_spectrum(truth, grid, NoiseSpec(1e-3 * ymax, seed))
        guess = initial_peak_model(spectrum, 10)
        # bandgap and Rydberg energy held at the published values; the defects are free
        guess = PeakModel(RydbergSeriesParams(BULK_BANDGAP_EV, BULK_RYDBERG_EV), guess.peaks,
                          UrbachParams(guess.urbach.magnitude, guess.urbach.urbach_energy, BULK_BANDGAP_EV))
        report, fit = fit_peaks(spectrum, 10, peak_space(guess, tied=True), tied=True)
        slowest = max(slowest, time.perf_counter() - start)
        assert report.converged
        worst_c = max(worst_c, np.max(np.abs([p.center for p in fit.peaks] - want_c)))
        worst_d = max(worst_d, np.max(np.abs([fit.series.defect(n) for n in range(2, 12)] - want_d)))
    record_property("detail", f"10 seeds: worst centre error {worst_c * 1e3:.5f} meV, worst defect error "
                              f"{worst_d:.5f}, slowest fit {slowest:.1f} s")
    assert worst_c < 0.05e-3
    assert worst_d < 0.005
    assert slowest < 60


# -- 3: model selection --------------------------------------------------

STUDY_SIGMA = 0.01
STUDY_PRIOR = SpectralPrior(asymmetry=(-5, 5), urbach_energy=(1e-3, 0.05), width=(0, 0.04))


def _four_peak_spectrum(seed):
    # the broad low peak has height equal to the noise sigma
    grid = np.linspace(1.94, 2.1, 400)
    peaks = [peak(1.98, 0.03, STUDY_SIGMA, 0.0), peak(2.02, 0.004, 1.0, 0.2),
             peak(2.04, 0.005, 0.6, 0.1), peak(2.06, 0.006, 0.3, 0.3)]
    truth = PeakModel(RydbergSeriesParams(2.1, 0.1), peaks, UrbachParams(0.05, 0.01, 2.1))
    return synth_spectrum(truth, grid, NoiseSpec(STUDY_SIGMA, seed))


@pytest.mark.criterion(3)
def test_model_selection_study(record_property):
    start = time.perf_counter()
    chosen = []
    for seed in range(10):
        spectrum = _four_peak_spectrum(seed)
        wide = FanoUrbachModel(spectrum.points, spectrum.values, 5, STUDY_PRIOR)
        ladder = default_ladder(wide, spectrum.values, sigma_min=0.5 * STUDY_SIGMA, spacing=2)
        cfg = RunConfig(burn_in=4000, samples=1000, seed=seed, exchange_interval=1)
        chosen.append(select_model(spectrum, [3, 4, 5], ladder, cfg, STUDY_PRIOR).selected)
    elapsed = time.perf_counter() - start
    hits = chosen.count(4)
    record_property("detail", f"K=4 chosen in {hits}/10 runs {chosen}, {elapsed:.0f} s")
    assert hits >= 8
    assert elapsed < 15 * 60


@pytest.mark.slow
@pytest.mark.criterion(3)
def test_ten_peak_selection_at_reduced_samples(record_property):
    truth = bulk_peak_model()
    sigma_instr = truth.instrumental_sigma
    grid = np.linspace(2.145, 2.176, 1000)
    ymax = composite_spectrum(truth, grid).values.max()
    spectrum = synth_spectrum(truth, grid, NoiseSpec(1e-3 * ymax, 0))
    prior = SpectralPrior(width=(0, 0.004), asymmetry=(-12, 12), defect=(-0.2, 0.3), bandgap=(2.17, 2.176),
                          rydberg=(0.09, 0.1), urbach_energy=(1e-3, 0.02))
    # each candidate starts from its least-squares optimum, reached from the published
    # peaks truncated to K or padded with empty higher-n peaks
    starts = {}
    for k in (9, 10, 11):
        peaks = list(truth.peaks[:k])
        while len(peaks) < k:
            peaks.append(FanoPeakParams(rydberg_energy(truth.series, 2 + len(peaks)), peaks[-1].width, 0.0, 0.0))
        guess = PeakModel(truth.series, peaks, truth.urbach, sigma_instr)
        starts[k] = fit_peaks(spectrum, k, peak_space(guess, tied=True), tied=True)[1]
    wide = FanoUrbachModel(spectrum.points, spectrum.values, 11, prior, tied=True, sigma_instr=sigma_instr)
    ladder = default_ladder(wide, spectrum.values, sigma_min=0.5e-3 * ymax, spacing=2)
    cfg = RunConfig(burn_in=1000, samples=300, seed=0, exchange_interval=1)
    sel = select_model(spectrum, [9, 10, 11], ladder, cfg, prior, tied=True, sigma_instr=sigma_instr,
                       starts=starts)
    record_property("detail", "ten-peak case, minimum F by K: " + ", ".join(
        f"{k}: {c.min_free_energy:.1f} +/- {c.min_stderr:.1f}" for k, c in sel.curves.items()))
    assert sel.selected == 10


# -- 4: free energy against a closed-form evidence ------------------------

@pytest.mark.criterion(4)
def test_free_energy_matches_closed_form_evidence(record_property):
    model, y = constant_toy(sigma_true=0.05)
    ladder = default_ladder(model, y, sigma_min=0.01)
    curve = free_energy_curve_for_model(model, y, ladder, RunConfig(burn_in=1000, samples=100_000, seed=3))
    exact = constant_model_free_energy(y, ladder.sigmas)
    rel = float(np.max(np.abs(curve.free_energy - exact) / np.abs(exact)))
    true_step = int(np.argmin(np.abs(np.log(ladder.sigmas / 0.05))))
    record_property("detail", f"max relative error {rel:.1e} over {len(ladder)} levels, argmin step "
                              f"{curve.argmin} vs true-noise step {true_step}")
    assert rel < 0.02
    assert abs(curve.argmin - true_step) <= 1


# -- 5: sampler validity -------------------------------------------------

@pytest.mark.criterion(5)
def test_metropolis_total_variation(record_property):
    model, data = amplitude_model()
    beta = 1.0 / 0.2 ** 2
    h, p = grid_posterior(model, data, beta)
    mean = p @ h
    sd = np.sqrt(p @ (h - mean) ** 2)
    theta0 = np.tile(model.lower, (1000, 1))
    theta0[:, 2] = make_stream(0, 999).uniform(0.0, 2.0, 1000)
    samples, _ = metropolis_chains(model, data, beta, theta0, np.array([2.4 * sd]), 1000, seed=1, burn_in=100)
    draws = samples[:, :, 2].ravel()
    edges = np.linspace(mean - 5 * sd, mean + 5 * sd, 51)
    emp = np.histogram(draws, edges)[0] / draws.size
    exact = np.diff(np.interp(edges, h, np.cumsum(p)))
    tv = 0.5 * np.sum(np.abs(emp - exact)) + 0.5 * abs(emp.sum() - exact.sum())
    record_property("detail", f"TV {tv:.4f} with {draws.size} samples")
    assert draws.size == 10 ** 6
    assert tv < 0.02


@pytest.mark.criterion(5)
def test_exchange_keeps_level_marginals(record_property):
    model, data = amplitude_model()
    ladder = NoiseLadder(np.array([1.0, 0.6, 0.35, 0.2]))
    on = ReplicaExchange(model, data, ladder, RunConfig(2000, 20000, exchange_interval=1, seed=2)).run()
    off = ReplicaExchange(model, data, ladder, RunConfig(2000, 20000, exchange_interval=10 ** 9, seed=3)).run()
    ks = max(ks_2samp(on.eps[:, k], off.eps[:, k]).statistic for k in range(1, len(ladder) + 1))
    record_property("detail", f"max KS {ks:.4f} over {len(ladder)} levels")
    assert np.all(on.swap_accepts > 0)
    assert ks < 0.05


# -- 6: trends -----------------------------------------------------------

@pytest.mark.criterion(6)
def test_strength_power_law_and_inverse_square(record_property):
    n = np.array(sorted(BULK_PEAKS))
    f = np.array([BULK_PEAKS[k][3] for k in n])
    k, _, se = oracle_power_law(n, f)
    fit = fit_power_law(n, f)
    half = T95_8DOF * float(se)
    series = bulk_peak_model().series
    scaled = np.array([(series.bandgap_energy - rydberg_energy(series, m)) * (m - series.defect(m)) ** 2 for m in n])
    inv_sq = float(np.max(np.abs(scaled / series.binding_energy - 1)))
    record_property("detail", f"exponent {fit.exponent:.12f} vs oracle {float(k):.12f}, 95% band "
                              f"{fit.exponent:.3f} +/- {half:.3f} covers -3, inverse-square deviation {inv_sq:.1e}")
    assert float(k) == pytest.approx(TABLE_STRENGTH_EXPONENT, abs=1e-15)
    assert fit.exponent == pytest.approx(float(k), rel=1e-6)
    assert abs(fit.exponent + 3.0) <= half
    assert inv_sq <= 1e-12


# -- 7: linewidth law ----------------------------------------------------

@pytest.mark.criterion(7)
def test_linewidth_law_exact_recovery(record_property):
    floor = LINEWIDTH_FLOOR_NM["bulk_od"][0]
    n = np.arange(2, 12)
    _, fit = fit_linewidth_law(n, linewidth_law(LinewidthLawParams(2.0, floor), n))
    rel = max(abs(fit.scale / 2.0 - 1), abs(fit.floor / floor - 1))
    limits = (linewidth_law(fit, 1), linewidth_law(fit, 1e200), linewidth_law(fit, np.inf))
    record_property("detail", f"max relative error {rel:.1e}, n=1 and large-n limits {limits}")
    assert rel < 1e-8
    assert limits == (fit.floor,) * 3


# -- 8: formula examples and gradient checks ------------------------------

def _run_marked(expr):
    cmd = [sys.executable, "-m", "pytest", "-q", "-rxX", "-p", "no:cacheprovider", "-m", expr,
           "--ignore", str(Path(__file__)), str(ROOT / "tests")]
    proc = subprocess.run(cmd, capture_output=True, text=True, cwd=ROOT, env=dict(os.environ))
    counts = {word: int(num) for num, word in re.findall(r"(\d+) (passed|failed|xfailed|xpassed|error)", proc.stdout)}
    xfailed = re.findall(r"^XFAIL (\S+)", proc.stdout, re.M)
    return proc.returncode, counts, xfailed


@pytest.mark.criterion(8)
def test_gradients_match_finite_differences(record_property):
    code, counts, _ = _run_marked("gradient")
    record_property("detail", f"gradient checks {counts}")
    assert code == 0 and counts.get("passed", 0) > 0
    assert set(counts) == {"passed"}


@pytest.mark.criterion(8)
@pytest.mark.xfail(strict=True, reason="two worked examples contradict their own formulas; they are kept as "
                                        "strict xfails in the unit suites")
def test_worked_examples_pass_as_stated(record_property):
    code, counts, xfailed = _run_marked("example")
    record_property("detail", f"worked examples {counts}; not reproducible as stated: {', '.join(xfailed)}")
    assert counts.get("failed", 0) == 0 and counts.get("error", 0) == 0
    assert counts.get("xfailed", 0) == 0


# -- 9: determinism ------------------------------------------------------

def _snapshot(path):
    return {p.relative_to(path).as_posix(): p.read_bytes() for p in sorted(path.rglob("*")) if p.is_file()}


@pytest.mark.criterion(9)
def test_every_task_rerun_is_byte_identical(tmp_path, monkeypatch, record_property):
    monkeypatch.chdir(tmp_path)
    n = np.arange(2, 11)
    write_table(tmp_path / "w.csv", ["n", "width_nm"], [n, 2.0 * (n * n - 1.0) / n ** 5 + 0.061])
    write_table(tmp_path / "p.csv", ["n", "power_uW", "E_eV"], [[2, 2, 2], [10, 100, 1000], [2.1475, 2.147, 2.146]])
    assert main(["simulate", "--kind", "centers", "--noise_sigma", "0.1", "--seed", "4", "--out_dir", "c"]) == 0
    assert main(["simulate", "--n_max", "4", "--grid_min", "2.14", "--grid_max", "2.165", "--grid_points", "400",
                 "--noise_rel", "0.01", "--seed", "4", "--out_dir", "s"]) == 0
    runs = {
        "simulate": ["simulate", "--noise_rel", "0.002", "--seed", "11"],
        "fit": ["fit", "--input", "s/spectrum.csv", "--peaks", "3"],
        "select-model": ["select-model", "--input", "s/spectrum.csv", "--candidates", "2,3", "--burn_in", "100",
                         "--samples", "100", "--ladder", "geometric", "--ladder_levels", "6", "--seed", "8"],
        "elliott": ["elliott", "--input", "c/centers.csv"],
        "trends": ["trends", "--input", "w.csv", "--trend", "linewidth"],
        "invert-temp": ["invert-temp", "--input", "p.csv"],
    }
    same = []
    for task, args in runs.items():
        out = tmp_path / "out"
        assert main(args) == 0, task
        first = _snapshot(out)
        shutil.rmtree(out)
        assert main(args) == 0, task
        second = _snapshot(out)
        shutil.rmtree(out)
        assert first and first == second, task
        same.append(f"{task} ({len(first)} files)")
    record_property("detail", "byte-identical reruns: " + ", ".join(same))
