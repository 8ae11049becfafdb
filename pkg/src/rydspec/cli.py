"""Batch command line: ``rydspec <task> [--key value ...]``.

Every task reads a flat configuration (defaults < ``--config`` file < flags),
writes delimited-text artifacts into ``out_dir`` and echoes the effective
configuration into each file header. Artifacts of a failed task go to
``out_dir/quarantine``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 non-convergence.
"""
from __future__ import annotations

import argparse
import hashlib
import os
import sys
import warnings

import numpy as np

from . import __version__
from .errors import DataError, DomainError
from .io import Table, parse_spectrum, read_table, render_table, atomic_write
from .model import (
    ElliottParams,
    FanoPeakParams,
    PeakModel,
    RydbergSeriesParams,
    UrbachParams,
    composite_spectrum,
    elliott_level,
)
from .published import ELLIOTT_THIN_FILM, bulk_peak_model
from .rng import RNG_NAME

TASKS = ("simulate", "fit", "select-model", "elliott", "trends", "invert-temp")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NONCONVERGED = 0, 2, 3, 4

# key: (default, help). Defaults are strings so the echoed configuration is
# exactly what a config file would contain.
DEFAULTS = {
    "task": ("", "one of " + ", ".join(TASKS)),
    "seed": ("0", "master seed for noise and Monte Carlo streams"),
    "out_dir": ("out", "artifact directory"),
    "input": ("", "input spectrum or table"),
    # simulate
    "kind": ("spectrum", "simulate: spectrum | centers"),
    "model": ("bulk", "peak model: bulk | path to a peak table"),
    "n_max": ("11", "highest n of the bulk model"),
    "broadening": ("true", "apply the instrumental Gaussian of the model"),
    "grid_min": ("2.14", "simulate: lowest energy (eV)"),
    "grid_max": ("2.18", "simulate: highest energy (eV)"),
    "grid_points": ("4001", "simulate: number of grid points"),
    "noise_sigma": ("0", "absolute Gaussian noise sigma (spectrum units, or meV for centers)"),
    "noise_rel": ("0", "Gaussian noise sigma relative to the spectrum maximum"),
    "temperatures": ("5:150:5", "centers: start:stop:step or a comma list (K)"),
    "levels": ("2:4", "centers: n range lo:hi"),
    "eg0": (repr(ELLIOTT_THIN_FILM.E_g0), "Elliott E_g0 (meV)"),
    "egt": (repr(ELLIOTT_THIN_FILM.E_gT), "Elliott E_gT (meV)"),
    "ry0": (repr(ELLIOTT_THIN_FILM.Ry_0), "Elliott Ry_0 (meV)"),
    "ryt": (repr(ELLIOTT_THIN_FILM.Ry_T), "Elliott Ry_T (meV)"),
    "phonon_energy": (repr(ELLIOTT_THIN_FILM.phonon_energy), "phonon energy (meV)"),
    # fit
    "peaks": ("10", "fit: number of peaks K"),
    "init": ("auto", "fit: auto | bulk | path to a peak table"),
    "tied": ("false", "peak centres follow the Rydberg series"),
    "n_start": ("2", "principal number of the first peak"),
    "bandgap": ("", "fit: E_g (eV) of the starting model (default: estimated)"),
    "rydberg": ("", "fit: Ry (eV) of the starting model (default: estimated)"),
    "fit_bandgap": ("false", "fit: free E_g"),
    "fit_rydberg": ("false", "fit: free Ry (tied mode)"),
    "fit_sigma": ("false", "fit: free instrumental sigma"),
    "sigma_instr": ("0", "instrumental sigma (eV) when no model supplies it"),
    "max_width": ("0.02", "upper bound on peak widths (eV)"),
    "q_bound": ("20", "bound on |q|"),
    "max_iter": ("10000", "fit: maximum function evaluations"),
    # select-model
    "candidates": ("3,4,5", "select-model: candidate peak counts"),
    "ladder": ("bridged", "select-model: bridged | geometric"),
    "ladder_levels": ("24", "geometric ladder: level count"),
    "ladder_max_rel": ("0.1", "geometric ladder: hottest sigma / data max"),
    "ladder_min_rel": ("1e-4", "coldest sigma / data max"),
    "ladder_spacing": ("1.0", "bridged ladder: spacing factor"),
    "burn_in": ("1000", "sweeps discarded per level"),
    "samples": ("2000", "sweeps recorded per level"),
    "exchange_interval": ("10", "sweeps between exchange rounds"),
    "adapt_interval": ("50", "burn-in sweeps between scale updates"),
    "thin": ("10", "keep every thin-th parameter sample"),
    "estimator": ("bar", "free-energy estimator: bar | stepping"),
    "prior_q": ("20", "prior bound on |q|"),
    "prior_width_max": ("0.02", "prior upper bound on widths (eV)"),
    "prior_urbach_min": ("1e-4", "prior lower bound on the Urbach energy (eV)"),
    "prior_urbach_max": ("0.05", "prior upper bound on the Urbach energy (eV)"),
    # elliott / invert-temp
    "assume_zero_defect": ("true", "elliott: all quantum defects 0"),
    "t_max": ("400", "invert-temp: upper temperature (K)"),
    # trends
    "trend": ("power", "trends: power | linewidth"),
    "column": ("", "trends: value column (default: second column)"),
    "fixed_exponent": ("", "trends: fix the power-law exponent"),
    "unit": ("nm", "trends: linewidth unit"),
}


class UsageError(Exception):
    pass


class NotConverged(Exception):
    pass


# -- configuration -------------------------------------------------------

def read_config_file(path):
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}: line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def effective_config(overrides):
    cfg = {k: v for k, (v, _) in DEFAULTS.items()}
    for key, value in overrides.items():
        if key not in cfg:
            raise UsageError(f"unknown configuration key {key!r}")
        cfg[key] = str(value)
    if cfg["task"] not in TASKS:
        raise UsageError(f"unknown task {cfg['task']!r}; expected one of {', '.join(TASKS)}")
    return cfg


def config_hash(cfg):
    text = "\n".join(f"{k}={cfg[k]}" for k in sorted(cfg))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _get(cfg, key, kind):
    value = cfg[key]
    try:
        if kind is bool:
            low = value.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return low in ("true", "1", "yes")
        return kind(value)
    except ValueError:
        raise UsageError(f"bad value for {key}: {value!r}") from None


def _int_list(cfg, key):
    try:
        return [int(v) for v in cfg[key].split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad integer list for {key}: {cfg[key]!r}") from None


def _range(cfg, key, kind=float):
    text = cfg[key]
    try:
        if ":" in text:
            parts = [kind(p) for p in text.split(":")]
            if len(parts) == 2:
                lo, hi = parts
                return list(range(int(lo), int(hi) + 1)) if kind is int else [lo, hi]
            lo, hi, step = parts
            count = int(round((hi - lo) / step)) + 1
            return [lo + i * step for i in range(count)]
        return [kind(v) for v in text.split(",") if v.strip()]
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad range for {key}: {text!r}") from None


# -- artifacts -----------------------------------------------------------

class Artifacts:
    """Tables collected in memory and flushed atomically at the end."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.files = {}
        self.header = {
            "toolkit": f"rydspec {__version__}",
            "task": cfg["task"],
            "seed": cfg["seed"],
            "config_hash": config_hash(cfg),
            "rng": RNG_NAME,
        }

    def table(self, name, names, columns, **extra):
        meta = dict(self.header)
        meta.update(extra)
        meta.update({f"config.{k}": v for k, v in self.cfg.items()})
        self.files[name] = render_table(names, columns, meta)

    def flush(self, directory):
        for name, text in self.files.items():
            atomic_write(os.path.join(directory, name), text)
        return sorted(self.files)


# -- peak tables ---------------------------------------------------------

PEAK_COLUMNS = ["index", "center_eV", "width_eV", "amplitude", "asymmetry", "defect"]


def peak_table_columns(model: PeakModel, n_start=2):
    k = len(model.peaks)
    defects = [model.series.defect(n_start + i) for i in range(k)]
    return [list(range(k)), [p.center for p in model.peaks], [p.width for p in model.peaks],
            [p.amplitude for p in model.peaks], [p.asymmetry for p in model.peaks], defects]


def peak_table_meta(model: PeakModel, n_start=2):
    return {
        "bandgap_eV": model.series.bandgap_energy,
        "rydberg_eV": model.series.binding_energy,
        "alpha0": model.urbach.magnitude,
        "urbach_energy_eV": model.urbach.urbach_energy,
        "sigma_instr_eV": model.instrumental_sigma,
        "n_start": n_start,
    }


def read_peak_table(path) -> PeakModel:
    table = read_table(path)
    missing = [c for c in PEAK_COLUMNS[1:5] if c not in table]
    keys = ("bandgap_eV", "rydberg_eV", "alpha0", "urbach_energy_eV")
    missing += [k for k in keys if k not in table.metadata]
    if missing:
        raise DataError(f"{path}: peak table lacks {', '.join(missing)}")
    try:
        meta = {k: float(table.metadata[k]) for k in keys}
        sigma = float(table.metadata.get("sigma_instr_eV", 0.0))
        n_start = int(float(table.metadata.get("n_start", 2)))
    except ValueError as exc:
        raise DataError(f"{path}: bad header value: {exc}") from None
    defects = {}
    if "defect" in table:
        defects = {n_start + i: float(d) for i, d in enumerate(table["defect"])}
    try:
        peaks = [FanoPeakParams(float(c), float(w), float(a), float(q)) for c, w, a, q in zip(
            table["center_eV"], table["width_eV"], table["amplitude"], table["asymmetry"])]
        series = RydbergSeriesParams(meta["bandgap_eV"], meta["rydberg_eV"], defects)
        urbach = UrbachParams(meta["alpha0"], meta["urbach_energy_eV"], meta["bandgap_eV"])
        return PeakModel(series, peaks, urbach, sigma)
    except DomainError as exc:
        raise DataError(f"{path}: {exc}") from exc


def _model_from(cfg, key="model"):
    which = cfg[key]
    if which == "bulk":
        return bulk_peak_model(_get(cfg, "n_max", int), _get(cfg, "broadening", bool))
    model = read_peak_table(which)
    if not _get(cfg, "broadening", bool):
        model = PeakModel(model.series, model.peaks, model.urbach, 0.0)
    return model


def _elliott(cfg):
    return ElliottParams(_get(cfg, "eg0", float), _get(cfg, "egt", float),
                         _get(cfg, "ry0", float), _get(cfg, "ryt", float),
                         phonon_energy=_get(cfg, "phonon_energy", float))


def _spectrum(cfg):
    if not cfg["input"]:
        raise UsageError(f"task {cfg['task']} needs --input")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        parsed = parse_spectrum(cfg["input"])
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    return parsed.grid


def _table(cfg) -> Table:
    if not cfg["input"]:
        raise UsageError(f"task {cfg['task']} needs --input")
    return read_table(cfg["input"])


def _column(table: Table, *names):
    for name in names:
        if name in table:
            return table[name]
    raise DataError(f"input table needs one of the columns {', '.join(names)}; "
                    f"found {', '.join(table.names)}")


# -- tasks ---------------------------------------------------------------

def task_simulate(cfg, out: Artifacts):
    from .synth import NoiseSpec, SeriesScenario, synth_center_table

    seed = _get(cfg, "seed", int)
    if cfg["kind"] == "centers":
        levels = _range(cfg, "levels", int)
        if not levels:
            raise UsageError("levels must name at least one n")
        scenario = SeriesScenario(_elliott(cfg), _range(cfg, "temperatures"),
                                  (levels[0], levels[-1]))
        table = synth_center_table(scenario, NoiseSpec(_get(cfg, "noise_sigma", float), seed))
        out.table("centers.csv", ["n", "T_K", "E_meV"], [table.n, table.temperature, table.energy])
        return
    if cfg["kind"] != "spectrum":
        raise UsageError(f"unknown simulate kind {cfg['kind']!r}")
    model = _model_from(cfg)
    n = _get(cfg, "grid_points", int)
    if n < 2:
        raise UsageError("grid_points must be >= 2")
    grid = np.linspace(_get(cfg, "grid_min", float), _get(cfg, "grid_max", float), n)
    clean = composite_spectrum(model, grid)
    sigma = _get(cfg, "noise_sigma", float) + _get(cfg, "noise_rel", float) * float(
        np.max(np.abs(clean.values)))
    noisy = clean.values + NoiseSpec(sigma, seed).draw(n)
    out.table("spectrum.csv", ["energy_eV", "intensity"], [grid, noisy],
              abscissa="energy_eV", noise_sigma=sigma)
    out.table("model_curve.csv", ["energy_eV", "intensity"], [grid, clean.values])
    out.table("model_peaks.csv", PEAK_COLUMNS, peak_table_columns(model),
              **peak_table_meta(model))


def task_fit(cfg, out: Artifacts):
    from .lsq import fit_peaks, initial_peak_model, peak_space

    spectrum = _spectrum(cfg)
    k = _get(cfg, "peaks", int)
    tied = _get(cfg, "tied", bool)
    n_start = _get(cfg, "n_start", int)
    if cfg["init"] == "auto":
        guess = initial_peak_model(spectrum, k, n_start=n_start)
        guess = PeakModel(guess.series, guess.peaks, guess.urbach, _get(cfg, "sigma_instr", float))
    else:
        guess = _model_from({**cfg, "n_max": str(n_start + k - 1)}, "init")
    if cfg["bandgap"] or cfg["rydberg"]:
        eg = _get(cfg, "bandgap", float) if cfg["bandgap"] else guess.series.bandgap_energy
        ry = _get(cfg, "rydberg", float) if cfg["rydberg"] else guess.series.binding_energy
        u = guess.urbach
        guess = PeakModel(RydbergSeriesParams(eg, ry), guess.peaks,
                          UrbachParams(u.magnitude, u.urbach_energy, eg), guess.instrumental_sigma)
    if len(guess.peaks) != k:
        raise DataError(f"initial model has {len(guess.peaks)} peaks, expected {k}")
    space = peak_space(guess, tied=tied, n_start=n_start,
                       fit_bandgap=_get(cfg, "fit_bandgap", bool),
                       fit_rydberg=_get(cfg, "fit_rydberg", bool),
                       fit_sigma=_get(cfg, "fit_sigma", bool),
                       energy_range=(spectrum.points[0], spectrum.points[-1]),
                       max_width=_get(cfg, "max_width", float), q_bound=_get(cfg, "q_bound", float))
    report, model = fit_peaks(spectrum, k, space, tied=tied, n_start=n_start,
                              max_iter=_get(cfg, "max_iter", int))
    names = list(report.best_params)
    out.table("fit_params.csv", ["name", "value", "stderr", "free"],
              [names, [report.best_params[n] for n in names], [report.stderr[n] for n in names],
               [n in report.free_names for n in names]],
              converged=report.converged, residual_mse=report.residual_mse,
              iterations=report.iterations, message=report.message)
    curve = composite_spectrum(model, spectrum.points).values
    out.table("fit_curve.csv", ["energy_eV", "data", "model", "residual"],
              [spectrum.points, spectrum.values, curve, spectrum.values - curve])
    out.table("fit_peaks.csv", PEAK_COLUMNS, peak_table_columns(model, n_start),
              **peak_table_meta(model, n_start))
    if not report.converged:
        raise NotConverged(f"least squares did not converge: {report.message}")


def task_select_model(cfg, out: Artifacts):
    from .rxmc import NoiseLadder, RunConfig, SpectralPrior, default_ladder, select_model
    from .rxmc.free_energy import spectral_model

    spectrum = _spectrum(cfg)
    candidates = _int_list(cfg, "candidates")
    if len(candidates) < 2:
        raise UsageError("select-model needs at least two candidates")
    seed = _get(cfg, "seed", int)
    q = _get(cfg, "prior_q", float)
    prior = SpectralPrior(width=(0.0, _get(cfg, "prior_width_max", float)), asymmetry=(-q, q),
                          urbach_energy=(_get(cfg, "prior_urbach_min", float),
                                         _get(cfg, "prior_urbach_max", float)))
    tied = _get(cfg, "tied", bool)
    n_start = _get(cfg, "n_start", int)
    sigma_instr = _get(cfg, "sigma_instr", float)
    top = float(np.max(np.abs(spectrum.values)))
    sigma_min = _get(cfg, "ladder_min_rel", float) * top
    if cfg["ladder"] == "geometric":
        ladder = NoiseLadder.geometric(_get(cfg, "ladder_max_rel", float) * top, sigma_min,
                                       _get(cfg, "ladder_levels", int))
    elif cfg["ladder"] == "bridged":
        widest = spectral_model(spectrum, max(candidates), prior, tied, n_start, sigma_instr)
        ladder = default_ladder(widest, spectrum.values, sigma_min, seed,
                                _get(cfg, "ladder_spacing", float))
    else:
        raise UsageError(f"unknown ladder {cfg['ladder']!r}")
    run = RunConfig(burn_in=_get(cfg, "burn_in", int), samples=_get(cfg, "samples", int),
                    exchange_interval=_get(cfg, "exchange_interval", int),
                    adapt_interval=_get(cfg, "adapt_interval", int),
                    thin=_get(cfg, "thin", int), seed=seed)
    selection = select_model(spectrum, candidates, ladder, run, prior, tied, n_start,
                             sigma_instr, estimator=cfg["estimator"])
    ks = list(selection.curves)
    curves = [selection.curves[k] for k in ks]
    out.table("selection.csv",
              ["K", "min_free_energy", "stderr", "sigma_star", "min_swap_rate", "equilibrated",
               "selected"],
              [ks, [c.min_free_energy for c in curves], [c.min_stderr for c in curves],
               [c.sigma_star for c in curves], [float(c.swap_rate.min()) for c in curves],
               [c.equilibrated for c in curves], [k == selection.selected for k in ks]],
              selected=selection.selected,
              tied_with=",".join(str(k) for k in selection.tied_with) or "none",
              estimator=cfg["estimator"])
    for k, c in zip(ks, curves):
        out.table(f"free_energy_K{k}.csv", ["sigma", "free_energy", "stderr"],
                  [c.sigmas, c.free_energy, c.stderr], equilibrated=c.equilibrated)
        swap = np.concatenate([[np.nan], c.swap_rate])
        out.table(f"swap_rates_K{k}.csv", ["level", "beta", "swap_rate_with_hotter"],
                  [list(range(c.chain.betas.size)), c.chain.betas, swap])
        names = list(c.posterior)
        stats = ["mean", "sd", "q025", "median", "q975"]
        out.table(f"posterior_K{k}.csv", ["name"] + stats,
                  [names] + [[c.posterior[n][s] for n in names] for s in stats],
                  sigma_star=c.sigma_star)
        model = spectral_model(spectrum, k, prior, tied, n_start, sigma_instr)
        theta = np.array([[c.posterior[n]["median"] for n in model.names]])
        curve = model.curve(theta)[0]
        out.table(f"model_curve_K{k}.csv", ["energy_eV", "data", "model", "residual"],
                  [spectrum.points, spectrum.values, curve, spectrum.values - curve])


def task_elliott(cfg, out: Artifacts):
    from .lsq import fit_elliott
    from .synth import CenterTable

    table = _table(cfg)
    n = _column(table, "n")
    t = _column(table, "T_K", "temperature_K")
    e = _column(table, "E_meV", "energy_meV")
    w = table["weight"] if "weight" in table else None
    defects = None
    if "defect" in table:
        defects = {int(k): float(d) for k, d in zip(n, table["defect"])}
    zero = _get(cfg, "assume_zero_defect", bool)
    centers = CenterTable(n.astype(int), t, e, w)
    report, params = fit_elliott(centers, assume_zero_defect=zero and defects is None,
                                 defects=defects, phonon_energy=_get(cfg, "phonon_energy", float))
    names = list(report.best_params)
    out.table("elliott_params.csv", ["name", "value", "stderr"],
              [names, [report.best_params[k] for k in names], [report.stderr[k] for k in names]],
              converged=report.converged, residual_mse_meV2=report.residual_mse)
    d = np.array([0.0 if defects is None else defects.get(int(k), 0.0) for k in n])
    model = elliott_level(params, centers.n, t, d)
    out.table("elliott_fit.csv", ["n", "T_K", "E_meV", "model_meV", "residual_meV"],
              [centers.n, t, e, model, e - model])
    if not report.converged:
        raise NotConverged(f"Elliott fit did not converge: {report.message}")


def task_trends(cfg, out: Artifacts):
    from .lsq import fit_linewidth_law, fit_power_law
    from .model import linewidth_law

    table = _table(cfg)
    n = _column(table, "n")
    col = cfg["column"] or next((c for c in table.names if c != "n"), None)
    if col is None or col not in table:
        raise DataError(f"value column {col!r} not found in {', '.join(table.names)}")
    y = table[col]
    if cfg["trend"] == "power":
        fixed = _get(cfg, "fixed_exponent", float) if cfg["fixed_exponent"] else None
        fit = fit_power_law(n, y, fixed)
        out.table("trend_params.csv", ["name", "value", "stderr"],
                  [["exponent", "prefactor"], [fit.exponent, fit.prefactor],
                   [fit.exponent_stderr, float("nan")]],
                  law="y = A n^k", column=col, fixed_exponent=fit.fixed_exponent)
        out.table("trend_fit.csv", ["n", col, "model", "log_residual"],
                  [n, y, fit.predict(n), fit.log_residuals])
    elif cfg["trend"] == "linewidth":
        report, params = fit_linewidth_law(n, y, cfg["unit"])
        out.table("trend_params.csv", ["name", "value", "stderr"],
                  [["alpha", "beta"], [params.scale, params.floor],
                   [report.stderr["alpha"], report.stderr["beta"]]],
                  law="w = alpha (n^2 - 1) / n^5 + beta", column=col, unit=cfg["unit"],
                  converged=report.converged)
        model = linewidth_law(params, n)
        out.table("trend_fit.csv", ["n", col, "model", "residual"], [n, y, model, y - model])
        if not report.converged:
            raise NotConverged(f"linewidth fit did not converge: {report.message}")
    else:
        raise UsageError(f"unknown trend {cfg['trend']!r}")


def task_invert_temp(cfg, out: Artifacts):
    from .lsq import invert_effective_temperature

    table = _table(cfg)
    n = _column(table, "n").astype(int)
    e = _column(table, "E_eV", "energy_eV")
    d = table["defect"] if "defect" in table else np.zeros_like(e)
    elliott = _elliott(cfg)
    t_max = _get(cfg, "t_max", float)
    temps = [invert_effective_temperature(elliott, int(k), float(dd), float(ee), t_max)
             for k, dd, ee in zip(n, d, e)]
    names = ["n", "E_eV", "defect", "T_eff_K"]
    cols = [n, e, d, temps]
    if "power_uW" in table:
        names.insert(1, "power_uW")
        cols.insert(1, table["power_uW"])
    out.table("effective_temperature.csv", names, cols)


RUNNERS = {
    "simulate": task_simulate,
    "fit": task_fit,
    "select-model": task_select_model,
    "elliott": task_elliott,
    "trends": task_trends,
    "invert-temp": task_invert_temp,
}


def run_task(cfg) -> int:
    """Run one task from an effective configuration; return the exit code."""
    out = Artifacts(cfg)
    out_dir = cfg["out_dir"]
    try:
        RUNNERS[cfg["task"]](cfg, out)
    except UsageError as exc:
        print(f"usage error ({cfg['task']}): {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NotConverged as exc:
        written = out.flush(os.path.join(out_dir, "quarantine"))
        print(f"{cfg['task']}: {exc}; {len(written)} partial artifacts in "
              f"{os.path.join(out_dir, 'quarantine')}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except (DataError, DomainError) as exc:
        if out.files:
            out.flush(os.path.join(out_dir, "quarantine"))
        print(f"data error ({cfg['task']}): {exc}", file=sys.stderr)
        return EXIT_DATA
    for name in out.flush(out_dir):
        print(os.path.join(out_dir, name))
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rydspec", description="Rydberg exciton spectrum analysis",
        epilog="Any configuration key may be given as --key value.")
    parser.add_argument("task", help=" | ".join(TASKS))
    parser.add_argument("--config", help="flat key = value file; flags override it")
    parser.add_argument("--version", action="version", version=f"rydspec {__version__}")
    return parser


def parse_overrides(extra):
    overrides = {}
    it = iter(extra)
    for token in it:
        if not token.startswith("--"):
            raise UsageError(f"unexpected argument {token!r}")
        key = token[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            value = next(it, None)
            if value is None:
                raise UsageError(f"flag {token} needs a value")
        overrides[key.replace("-", "_")] = value
    return overrides


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = read_config_file(args.config) if args.config else {}
        overrides.update(parse_overrides(extra))
        overrides["task"] = args.task
        cfg = effective_config(overrides)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"rydspec: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run_task(cfg)


if __name__ == "__main__":
    sys.exit(main())
