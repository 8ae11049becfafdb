"""Least-squares decomposition of a spectrum into Fano peaks on an Urbach tail."""
from __future__ import annotations

import numpy as np
from scipy.signal import find_peaks, peak_widths

from ..errors import DataError, DomainError
from ..model import (
    EnergyGrid,
    FanoPeakParams,
    PeakModel,
    RydbergSeriesParams,
    UrbachParams,
    fano_values,
    is_uniform,
)
from .space import MAX_ITER, FitReport, Param, ParamSpace, solve

SHARED = ("alpha0", "urbach_energy", "bandgap", "rydberg", "sigma_instr")
MSE_TIE = 1e-12
# Below 0.5 so adjacent tied levels can never coincide.
DEFECT_BOUND = 0.45


def peak_names(k, tied=False):
    first = "defect" if tied else "center"
    return [f"{first}_{k}", f"width_{k}", f"amp_{k}", f"q_{k}"]


class PeakObjective:
    """Residuals and Jacobian of a K-peak model against one spectrum.

    In tied mode peak ``k`` has principal number ``n_start + k`` and its
    centre is E_g - Ry / (n - delta)**2; otherwise centres are free.
    """

    def __init__(self, spectrum: EnergyGrid, n_peaks: int, tied=False, n_start=2):
        self.energy = spectrum.points
        self.data = spectrum.values
        self.n_peaks = int(n_peaks)
        self.tied = tied
        self.n_start = n_start
        self.names = [n for k in range(self.n_peaks) for n in peak_names(k, tied)] + list(SHARED)
        self.step = self.energy[1] - self.energy[0]
        self._uniform = is_uniform(self.energy)

    def unpack(self, theta):
        k = self.n_peaks
        per = np.asarray(theta[:4 * k]).reshape(k, 4)
        alpha0, eu, eg, ry, sigma = theta[4 * k:4 * k + 5]
        if self.tied:
            nq = self.n_start + np.arange(k) - per[:, 0]
            centers = eg - ry / nq ** 2
        else:
            centers = per[:, 0]
        return centers, per[:, 1], per[:, 2], per[:, 3], alpha0, eu, eg, ry, sigma

    def raw_curve(self, theta):
        centers, widths, amps, qs, alpha0, eu, eg, _, _ = self.unpack(theta)
        e = self.energy
        total = alpha0 * np.exp((e - eg) / eu)
        for c, w, a, q in zip(centers, widths, amps, qs):
            total = total + fano_values(e, c, w, a, q)
        return total

    def _kernels(self, sigma):
        if sigma <= 0:
            return None, None
        if not self._uniform:
            raise DomainError("instrumental broadening requires a uniform energy grid")
        w = sigma / self.step
        half = max(int(np.ceil(8.0 * w)), 0)
        i = np.arange(-half, half + 1, dtype=float)
        g = np.exp(-0.5 * (i / w) ** 2)
        dg = g * i * i * self.step ** 2 / sigma ** 3
        s, ds = g.sum(), dg.sum()
        return g / s, (dg * s - g * ds) / (s * s)

    @staticmethod
    def _conv(values, kernel):
        full = np.convolve(values, kernel, mode="full")
        half = (kernel.size - 1) // 2
        return full[half:half + values.size]

    def curve(self, theta):
        raw = self.raw_curve(theta)
        kernel, _ = self._kernels(theta[4 * self.n_peaks + 4])
        return raw if kernel is None else self._conv(raw, kernel)

    def residuals(self, theta):
        return self.curve(theta) - self.data

    def jacobian(self, theta):
        e = self.energy
        k = self.n_peaks
        centers, widths, amps, qs, alpha0, eu, eg, ry, sigma = self.unpack(theta)
        jac = np.zeros((e.size, len(self.names)))
        x = e[:, None] - centers[None, :]
        h = 0.5 * widths[None, :]
        num = h + 2.0 * qs[None, :] * x
        den = h * h + x * x
        d_center = -amps * (2.0 * qs * den - 2.0 * x * num) / den ** 2
        d_width = 0.5 * amps * (den - 2.0 * h * num) / den ** 2
        d_amp = num / den
        d_q = amps * 2.0 * x / den
        if self.tied:
            nq = self.n_start + np.arange(k) - theta[0:4 * k:4]
            jac[:, 0:4 * k:4] = d_center * (-2.0 * ry / nq ** 3)
            jac[:, 4 * k + 2] += d_center.sum(axis=1)
            jac[:, 4 * k + 3] = (d_center * (-1.0 / nq ** 2)).sum(axis=1)
        else:
            jac[:, 0:4 * k:4] = d_center
        jac[:, 1:4 * k:4] = d_width
        jac[:, 2:4 * k:4] = d_amp
        jac[:, 3:4 * k:4] = d_q
        edge = np.exp((e - eg) / eu)
        jac[:, 4 * k] = edge
        jac[:, 4 * k + 1] = -alpha0 * edge * (e - eg) / eu ** 2
        jac[:, 4 * k + 2] += -alpha0 * edge / eu
        kernel, dkernel = self._kernels(sigma)
        if kernel is not None:
            for col in range(4 * k + 4):
                jac[:, col] = self._conv(jac[:, col], kernel)
            jac[:, 4 * k + 4] = self._conv(self.raw_curve(theta), dkernel)
        return jac

    def to_model(self, theta) -> PeakModel:
        centers, widths, amps, qs, alpha0, eu, eg, ry, sigma = self.unpack(theta)
        order = np.argsort(centers, kind="stable")
        defects = {}
        if self.tied:
            for i in range(self.n_peaks):
                defects[self.n_start + i] = float(theta[4 * i])
        peaks = [FanoPeakParams(float(centers[i]), float(widths[i]), float(amps[i]), float(qs[i]))
                 for i in order]
        series = RydbergSeriesParams(float(eg), float(ry), defects)
        try:
            return PeakModel(series, peaks, UrbachParams(float(alpha0), float(eu), float(eg)),
                             float(sigma))
        except DomainError as exc:
            raise DataError(f"fitted parameters do not form a valid peak model: {exc}") from exc


def peak_space(model: PeakModel, *, tied=False, n_start=2, fit_bandgap=False,
               fit_rydberg=False, fit_sigma=False, energy_range=None,
               max_width=0.02, q_bound=20.0, amp_max=None) -> ParamSpace:
    """Parameter space seeded from ``model`` with physically-motivated bounds."""
    eg = model.series.bandgap_energy
    lo, hi = energy_range if energy_range is not None else (-np.inf, np.inf)
    items = []
    ry = model.series.binding_energy
    for k, p in enumerate(model.peaks):
        if tied:
            n = n_start + k
            lo_d, hi_d = -DEFECT_BOUND, min(DEFECT_BOUND, n - 0.5)
            if n in model.series.quantum_defects or ry <= 0 or p.center >= eg:
                delta = model.series.defect(n)
            else:
                # Defect that puts level n at the seeded centre.
                delta = n - np.sqrt(ry / (eg - p.center))
            items.append((f"defect_{k}", Param(float(np.clip(delta, lo_d, hi_d)), lo_d, hi_d)))
        else:
            items.append((f"center_{k}", Param(p.center, max(lo, p.center - 0.05), min(hi, eg))))
        items.append((f"width_{k}", Param(p.width, 1e-9, max(max_width, 2 * p.width))))
        amp_hi = amp_max if amp_max is not None else max(10 * p.amplitude, 1e-12)
        items.append((f"amp_{k}", Param(p.amplitude, 0.0, amp_hi)))
        items.append((f"q_{k}", Param(p.asymmetry, -q_bound, q_bound)))
    u = model.urbach
    items += [
        ("alpha0", Param(u.magnitude, 0.0, np.inf)),
        ("urbach_energy", Param(u.urbach_energy, 1e-6, 1.0)),
        ("bandgap", Param(eg, 0.0, np.inf, frozen=not fit_bandgap)),
        ("rydberg", Param(model.series.binding_energy, 0.0, np.inf, frozen=not (tied and fit_rydberg))),
        ("sigma_instr", Param(model.instrumental_sigma, 0.0, 0.01, frozen=not fit_sigma)),
    ]
    return ParamSpace(items)


def _series_match(maxima, prominence, ns, tol_floor):
    """Best (E_g, Ry) explaining the detected maxima as levels ``ns``.

    Every pair of maxima assigned to every pair of levels defines a
    candidate series; candidates are scored by the prominence of the maxima
    lying within a quarter level spacing of a predicted level.
    """
    best = None
    inv = 1.0 / ns.astype(float) ** 2
    for a in range(maxima.size):
        for b in range(a + 1, maxima.size):
            for i in range(ns.size):
                for j in range(i + 1, ns.size):
                    ry = (maxima[b] - maxima[a]) / (inv[i] - inv[j])
                    eg = maxima[a] + ry * inv[i]
                    levels = eg - ry * inv
                    spacing = np.abs(np.gradient(levels)) if ns.size > 1 else np.array([ry])
                    tol = np.maximum(0.25 * spacing, tol_floor)
                    dist = np.abs(levels[:, None] - maxima[None, :])
                    hit = dist <= tol[:, None]
                    score = float(np.sum(np.max(np.where(hit, prominence[None, :], 0.0), axis=1)))
                    if best is None or score > best[0]:
                        best = (score, eg, ry, levels, hit)
    return best


def initial_peak_model(spectrum: EnergyGrid, n_peaks: int, n_start=2) -> PeakModel:
    """Deterministic starting point for a K-peak fit.

    Local maxima are located with their prominences. If a Rydberg series
    ``n_start, n_start + 1, ...`` explains them, centres are the matched
    maxima (predicted levels where none matched); otherwise the ``n_peaks``
    most prominent maxima are used. Heights and widths are read off the
    data around each centre.
    """
    e, y = spectrum.points, spectrum.values
    span = e[-1] - e[0]
    step = float(np.median(np.diff(e)))
    ns = n_start + np.arange(n_peaks)
    idx, props = find_peaks(y, prominence=0.0)
    maxima, prom = e[idx], props["prominences"]
    keep = np.argsort(prom, kind="stable")[::-1][:max(3 * n_peaks, 8)]
    maxima, prom = maxima[keep], prom[keep]
    order = np.argsort(maxima)
    maxima, prom = maxima[order], prom[order]

    eg, ry, centers = None, 0.0, None
    if n_peaks >= 2 and maxima.size >= 2:
        score, eg, ry, levels, hit = _series_match(maxima, prom, ns, 2 * step)
        matched = hit.any(axis=1)
        if ry > 0 and matched.sum() >= max(2, n_peaks // 2) and levels[0] >= e[0] - span:
            centers = levels.copy()
            for k in np.flatnonzero(matched):
                cand = np.flatnonzero(hit[k])
                centers[k] = maxima[cand[np.argmax(prom[cand])]]
        else:
            eg = None
    if centers is None:
        top = np.sort(maxima[np.argsort(prom, kind="stable")[::-1][:n_peaks]])
        if top.size < n_peaks:
            extra = np.linspace(e[0], e[-1], n_peaks - top.size + 2)[1:-1]
            top = np.sort(np.concatenate([top, extra]))
        centers = top
        eg = e[-1] + step
        ry = float((eg - centers[0]) * n_start ** 2) if n_peaks else 0.0
    # Keep centres distinct, ascending and below the gap.
    centers = np.minimum(centers, eg - step)
    for k in range(1, centers.size):
        centers[k] = max(centers[k], centers[k - 1] + 0.5 * step)
    eg = max(eg, centers[-1] + step) if centers.size else eg

    baseline = min(float(np.min(y)), 0.0)
    peaks = []
    for c in centers:
        i = int(np.clip(np.searchsorted(e, c), 1, e.size - 2))
        height = max(y[i] - baseline, 1e-12)
        width = 4 * step
        if idx.size:
            j = idx[np.argmin(np.abs(e[idx] - c))]
            if abs(e[j] - c) <= 2 * step:
                half, *_ = peak_widths(y, [j], rel_height=0.5)
                width = half[0] * step
        width = float(np.clip(width, 2 * step, 0.25 * span))
        peaks.append(FanoPeakParams(float(c), width, 0.5 * height * width, 0.0))
    tail = max(float(y[-1] - baseline), 1e-12)
    eu = max(0.1 * span, step)
    alpha0 = tail * np.exp(min((eg - e[-1]) / eu, 50.0))
    series = RydbergSeriesParams(float(eg), float(max(ry, 0.0)))
    return PeakModel(series, peaks, UrbachParams(float(alpha0), float(eu), float(eg)))


def fit_peaks(spectrum: EnergyGrid, n_peaks: int, space: ParamSpace | None = None, *,
              tied=False, n_start=2, starts=None, staged=True,
              max_iter=MAX_ITER) -> tuple[FitReport, PeakModel]:
    """Fit ``n_peaks`` Fano peaks plus an Urbach tail to ``spectrum``.

    ``starts`` may supply several parameter spaces; the lowest-MSE result
    wins, ties going to the smaller total |q|. With ``staged`` each start
    is first refined with peak positions held fixed, which keeps weak
    peaks from drifting onto their neighbours while shapes are still poor.
    """
    if n_peaks < 0:
        raise DataError("peak count must be non-negative")
    objective = PeakObjective(spectrum, n_peaks, tied=tied, n_start=n_start)
    if starts is None:
        if space is None:
            guess = initial_peak_model(spectrum, n_peaks, n_start=n_start)
            space = peak_space(guess, tied=tied, n_start=n_start,
                               energy_range=(spectrum.points[0], spectrum.points[-1]))
        starts = [space]
    n_free = min(len(s.free_names) for s in starts)
    if n_free > len(spectrum):
        raise DataError(f"{n_free} free parameters exceed {len(spectrum)} data points")

    best = None
    for start in starts:
        if start.names != objective.names:
            raise DataError(f"parameter space names {start.names} do not match {objective.names}")
        nfev = 0
        positions = [n for n in objective.names[0:4 * n_peaks:4] if not start[n].frozen]
        if staged and positions:
            pre = solve(objective.residuals, start.freeze(*positions), objective.jacobian,
                        max_iter=max_iter)
            start = start.with_values(pre.best_params)
            nfev = pre.iterations
        report = solve(objective.residuals, start, objective.jacobian, max_iter=max_iter)
        report.iterations += nfev
        theta = np.array([report.best_params[n] for n in objective.names])
        total_q = float(np.abs(theta[3:4 * n_peaks:4]).sum())
        key = (report.residual_mse, total_q)
        if best is None or _better(key, best[0]):
            best = (key, report, theta)
    _, report, theta = best
    model = objective.to_model(theta)
    report.extra["canonical_order"] = "ascending center"
    return report, model


def _better(key, incumbent):
    mse, q = key
    mse0, q0 = incumbent
    if abs(mse - mse0) <= MSE_TIE * max(abs(mse), abs(mse0), 1e-300):
        return q < q0
    return mse < mse0
