"""Forward models with box priors, evaluated in batches of replicas.

A model splits its curve into additive components so that a single
parameter update only re-evaluates the component it touches. Every
method takes ``theta`` of shape (R, P) and returns arrays with a leading
replica axis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import convolve1d

from ..errors import DomainError
from ..model import gaussian_kernel, is_uniform

ALL = -1


class ForwardModel:
    names: list
    lower: np.ndarray
    upper: np.ndarray
    n_components = 1
    # combine() is a plain sum, so one component can be swapped in place.
    additive = True

    def __init__(self, x, names, lower, upper, component_of=None):
        self.x = np.asarray(x, dtype=float)
        self.names = list(names)
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != (len(self.names),) or self.upper.shape != self.lower.shape:
            raise DomainError("bounds must have one entry per parameter")
        if np.any(self.lower > self.upper) or not np.all(np.isfinite(self.lower)) \
                or not np.all(np.isfinite(self.upper)):
            raise DomainError("prior bounds must be finite with lower <= upper")
        self.component_of = (np.full(len(self.names), ALL) if component_of is None
                             else np.asarray(component_of))

    @property
    def n_params(self):
        return len(self.names)

    @property
    def sampled(self):
        """Indices of parameters with a non-degenerate prior interval."""
        return np.flatnonzero(self.upper > self.lower)

    def in_support(self, theta):
        return np.all((theta >= self.lower) & (theta <= self.upper), axis=1)

    def draw_prior(self, rng, size):
        return self.lower + (self.upper - self.lower) * rng.random((size, self.n_params))

    def components(self, theta):
        raise NotImplementedError

    def component(self, theta, c):
        return self.components(theta)[:, c]

    def combine(self, comps):
        return comps.sum(axis=1)

    def curve(self, theta):
        theta = np.atleast_2d(theta)
        return self.combine(self.components(theta))


class ConstantModel(ForwardModel):
    """y = c with a uniform prior on c."""

    def __init__(self, x, lower, upper):
        super().__init__(x, ["offset"], [lower], [upper])

    def components(self, theta):
        return np.repeat(theta[:, None, :1], self.x.size, axis=2)


class LinearModel(ForwardModel):
    """y = a + b (x - x0), uniform box prior on (a, b)."""

    n_components = 2

    def __init__(self, x, lower, upper, x0=0.0):
        super().__init__(x, ["intercept", "slope"], lower, upper, component_of=[0, 1])
        self.x0 = x0

    def components(self, theta):
        ones = np.ones_like(self.x)
        return np.stack([theta[:, :1] * ones, theta[:, 1:2] * (self.x - self.x0)], axis=1)

    def component(self, theta, c):
        if c == 0:
            return theta[:, :1] * np.ones_like(self.x)
        return theta[:, 1:2] * (self.x - self.x0)


@dataclass(frozen=True)
class SpectralPrior:
    """Uniform prior bounds for the Fano + Urbach layout.

    Peak heights are sampled instead of raw Fano amplitudes: C = H G / 2,
    so ``height`` bounds are in spectrum-value units. ``None`` entries are
    derived from the data (centres span the grid, heights reach twice the
    data maximum).
    """

    center: tuple | None = None
    width: tuple = (0.0, 0.020)
    height: tuple | None = None
    asymmetry: tuple = (-20.0, 20.0)
    defect: tuple = (-0.5, 0.5)
    alpha0: tuple | None = None
    urbach_energy: tuple = (1e-4, 0.05)
    bandgap: tuple | None = None
    rydberg: tuple = (0.05, 0.15)

    def resolve(self, energy, values):
        span = float(np.max(np.abs(values)))
        top = 2.0 * span if span > 0 else 1.0
        center = self.center or (float(energy[0]), float(energy[-1]))
        bandgap = self.bandgap or (float(energy[-1]), float(energy[-1]))
        return dict(
            center=center, width=self.width, height=self.height or (0.0, top),
            asymmetry=self.asymmetry, defect=self.defect,
            alpha0=self.alpha0 or (0.0, top), urbach_energy=self.urbach_energy,
            bandgap=bandgap, rydberg=self.rydberg,
        )


class FanoUrbachModel(ForwardModel):
    """K Fano peaks plus an Urbach tail, optionally broadened.

    Layout per peak ``k``: (center_k | defect_k, width_k, height_k, q_k),
    then alpha0, urbach_energy, bandgap, and rydberg in tied mode. The
    instrumental sigma is held fixed (it is applied to every component).
    """

    def __init__(self, energy, values, n_peaks, prior: SpectralPrior | None = None,
                 tied=False, n_start=2, sigma_instr=0.0, pinned=None):
        energy = np.asarray(energy, dtype=float)
        bounds = (prior or SpectralPrior()).resolve(energy, values)
        self.n_peaks = int(n_peaks)
        self.tied = tied
        self.n_start = n_start
        first = "defect" if tied else "center"
        names, lo, hi, comp = [], [], [], []
        for k in range(self.n_peaks):
            for name, key in ((first, first), ("width", "width"), ("height", "height"), ("q", "asymmetry")):
                names.append(f"{name}_{k}")
                lo.append(bounds[key][0])
                hi.append(bounds[key][1])
                comp.append(k)
        tail = [("alpha0", "alpha0", self.n_peaks), ("urbach_energy", "urbach_energy", self.n_peaks),
                ("bandgap", "bandgap", ALL)]
        if tied:
            tail.append(("rydberg", "rydberg", ALL))
        for name, key, c in tail:
            names.append(name)
            lo.append(bounds[key][0])
            hi.append(bounds[key][1])
            comp.append(c)
        lo = np.array(lo, dtype=float)
        hi = np.array(hi, dtype=float)
        for name, value in (pinned or {}).items():
            i = names.index(name)
            lo[i] = hi[i] = value
        super().__init__(energy, names, lo, hi, component_of=comp)
        self.n_components = self.n_peaks + 1
        self.sigma_instr = float(sigma_instr)
        self._kernel = None
        if self.sigma_instr > 0:
            if not is_uniform(energy):
                raise DomainError("instrumental broadening requires a uniform energy grid")
            self._kernel = gaussian_kernel(energy[1] - energy[0], self.sigma_instr)
        self._eg = names.index("bandgap")
        self._ry = names.index("rydberg") if tied else None

    def centers(self, theta):
        per = theta[:, :4 * self.n_peaks:4]
        if not self.tied:
            return per
        nq = self.n_start + np.arange(self.n_peaks) - per
        return theta[:, self._eg, None] - theta[:, self._ry, None] / nq ** 2

    def in_support(self, theta):
        ok = super().in_support(theta)
        if self.n_peaks:
            ok &= np.all(theta[:, 1:4 * self.n_peaks:4] > 0, axis=1)
            ok &= np.all(self.centers(theta) < theta[:, self._eg, None], axis=1)
        return ok & (theta[:, self.n_peaks * 4 + 1] > 0)

    def _peak(self, theta, k, centers):
        width = theta[:, 4 * k + 1, None]
        height = theta[:, 4 * k + 2, None]
        q = theta[:, 4 * k + 3, None]
        half = 0.5 * width
        dx = self.x[None, :] - centers[:, k, None]
        # C = H * G / 2, so C (h + 2 q dx) / (h^2 + dx^2) with C = H h.
        num = dx * (2.0 * q)
        num += half
        num *= height * half
        dx *= dx
        dx += half * half
        with np.errstate(divide="ignore", invalid="ignore"):
            num /= dx
        return num

    def _tail(self, theta):
        i = 4 * self.n_peaks
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return theta[:, i, None] * np.exp((self.x[None, :] - theta[:, self._eg, None])
                                               / theta[:, i + 1, None])

    def _broaden(self, rows):
        if self._kernel is None:
            return rows
        return convolve1d(rows, self._kernel, axis=-1, mode="constant")

    def components(self, theta):
        centers = self.centers(theta) if self.n_peaks else None
        parts = [self._peak(theta, k, centers) for k in range(self.n_peaks)]
        parts.append(self._tail(theta))
        return self._broaden(np.stack(parts, axis=1))

    def component(self, theta, c):
        if c == self.n_peaks:
            return self._broaden(self._tail(theta))
        return self._broaden(self._peak(theta, c, self.centers(theta)))

    def canonical(self, theta):
        """Reorder peak blocks of each sample by ascending centre."""
        theta = np.array(theta, dtype=float, copy=True)
        if self.n_peaks < 2 or self.tied:
            return theta
        order = np.argsort(self.centers(theta), axis=1, kind="stable")
        blocks = theta[:, :4 * self.n_peaks].reshape(theta.shape[0], self.n_peaks, 4)
        blocks = np.take_along_axis(blocks, order[:, :, None], axis=1)
        theta[:, :4 * self.n_peaks] = blocks.reshape(theta.shape[0], -1)
        return theta

    def vector(self, model):
        """Parameter vector of a ``PeakModel``, e.g. a least-squares warm start.

        Peaks beyond those of ``model`` enter with zero height at the middle
        of their prior box. Pinned entries keep their pinned values.
        """
        theta = 0.5 * (self.lower + self.upper)
        for k in range(self.n_peaks):
            theta[4 * k + 2] = 0.0
            if k >= len(model.peaks):
                continue
            p = model.peaks[k]
            first = model.series.defect(self.n_start + k) if self.tied else p.center
            theta[4 * k:4 * k + 4] = (first, p.width, 2.0 * p.amplitude / p.width, p.asymmetry)
        i = 4 * self.n_peaks
        theta[i:i + 3] = (model.urbach.magnitude, model.urbach.urbach_energy, model.series.bandgap_energy)
        if self.tied:
            theta[i + 3] = model.series.binding_energy
        fixed = self.lower == self.upper
        theta[fixed] = self.lower[fixed]
        return theta
