"""Free energy across the noise ladder and peak-count selection.

The free energy at level l is F_l = -log Z(b_l), where Z includes the
Gaussian normalisation (b / 2 pi)^(n/2). Z is built by stepping from the
prior replica (b = 0, Z-factor 1) through the ratios

    z(b_{l+1}) / z(b_l) = < exp(-(b_{l+1} - b_l) n eps) >_{b_l}.

Two estimators of each ratio are available: the one-sided average above
("stepping") and Bennett's acceptance ratio ("bar"), which also uses the
samples of level l+1 and is far less biased when neighbouring energy
distributions overlap poorly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logsumexp

from ..errors import DataError, DomainError
from .likelihood import LOG_2PI
from .models import FanoUrbachModel, ForwardModel, SpectralPrior
from .sampler import ChainResult, NoiseLadder, ReplicaExchange, RunConfig, default_ladder

ESTIMATORS = ("bar", "stepping")
MIN_SWAP_RATE = 0.01
N_BATCHES = 8


def stepping_log_z(eps, betas, n):
    """Log z(b_l) for every level from samples ``eps`` of shape (S, R)."""
    eps = np.asarray(eps, dtype=float)
    steps = np.diff(betas)
    a = -(steps[None, :] * n) * eps[:, :-1]
    ratios = logsumexp(a, axis=0) - np.log(eps.shape[0])
    return np.concatenate([[0.0], np.cumsum(ratios)])


def _bar_step(w_fwd, w_rev):
    """Bennett estimate of log z1/z0 from forward and reverse work samples.

    ``w_fwd`` = -log(q1/q0) on draws from level 0, ``w_rev`` = -log(q0/q1)
    on draws from level 1. Equal sample sizes are assumed.
    """
    def balance(df):
        return expit(df - w_fwd).sum() - expit(-df - w_rev).sum()

    lo = min(w_fwd.min(), -w_rev.max()) - 1.0
    hi = max(w_fwd.max(), -w_rev.min()) + 1.0
    while balance(lo) > 0:
        lo -= 2.0 * (hi - lo)
    while balance(hi) < 0:
        hi += 2.0 * (hi - lo)
    return -brentq(balance, lo, hi, xtol=1e-12, rtol=1e-14)


def bar_log_z(eps, betas, n):
    """Log z(b_l) for every level using Bennett's acceptance ratio."""
    eps = np.asarray(eps, dtype=float)
    steps = np.diff(betas)
    ratios = [_bar_step(d * n * eps[:, l], -d * n * eps[:, l + 1]) for l, d in enumerate(steps)]
    return np.concatenate([[0.0], np.cumsum(ratios)])


def free_energy_from_samples(eps, betas, n, estimator="bar"):
    """F for every non-prior level (betas[0] must be 0)."""
    if betas[0] != 0:
        raise DomainError("the first level must be the prior (b = 0)")
    if estimator not in ESTIMATORS:
        raise DomainError(f"unknown free-energy estimator {estimator!r}")
    log_z = (bar_log_z if estimator == "bar" else stepping_log_z)(eps, betas, n)[1:]
    b = np.asarray(betas[1:])
    return -(0.5 * n * (np.log(b) - LOG_2PI) + log_z)


@dataclass
class FreeEnergyCurve:
    label: object
    sigmas: np.ndarray
    free_energy: np.ndarray
    stderr: np.ndarray
    swap_rate: np.ndarray
    estimator: str = "bar"
    posterior: dict = field(default_factory=dict)
    chain: ChainResult | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.free_energy.shape != self.sigmas.shape or not np.all(np.isfinite(self.free_energy)):
            raise DataError(f"free energy curve for {self.label!r} is not finite over the ladder")

    @property
    def argmin(self):
        return int(np.argmin(self.free_energy))

    @property
    def sigma_star(self):
        return float(self.sigmas[self.argmin])

    @property
    def min_free_energy(self):
        return float(self.free_energy[self.argmin])

    @property
    def min_stderr(self):
        return float(self.stderr[self.argmin])

    @property
    def equilibrated(self):
        return bool(np.all(self.swap_rate >= MIN_SWAP_RATE))


def posterior_summary(model: ForwardModel, theta):
    """Mean, sd and 2.5/50/97.5 percentiles per parameter."""
    theta = np.asarray(theta, dtype=float)
    if hasattr(model, "canonical"):
        theta = model.canonical(theta)
    q = np.percentile(theta, [2.5, 50.0, 97.5], axis=0)
    return {
        name: {"mean": float(theta[:, i].mean()), "sd": float(theta[:, i].std()),
               "q025": float(q[0, i]), "median": float(q[1, i]), "q975": float(q[2, i])}
        for i, name in enumerate(model.names)
    }


def curve_from_chain(label, model, chain: ChainResult, ladder: NoiseLadder, estimator="bar"):
    n = chain.n_points
    f = free_energy_from_samples(chain.eps, chain.betas, n, estimator)
    batches = np.array_split(chain.eps, N_BATCHES)
    per_batch = np.array([free_energy_from_samples(b, chain.betas, n, estimator) for b in batches])
    stderr = per_batch.std(axis=0, ddof=1) / np.sqrt(N_BATCHES)
    curve = FreeEnergyCurve(label, np.array(ladder.sigmas), f, stderr, chain.swap_rate,
                            estimator=estimator, chain=chain)
    curve.posterior = posterior_summary(model, chain.theta[:, curve.argmin + 1])
    return curve


def free_energy_curve_for_model(model: ForwardModel, data, ladder: NoiseLadder | None = None,
                                config: RunConfig = RunConfig(), label=None, initial=None,
                                estimator="bar"):
    data = np.asarray(data, dtype=float)
    if ladder is None:
        ladder = default_ladder(model, data, seed=config.seed)
    chain = ReplicaExchange(model, data, ladder, config, initial=initial).run()
    return curve_from_chain(label, model, chain, ladder, estimator)


def spectral_model(spectrum, n_peaks, prior=None, tied=False, n_start=2, sigma_instr=0.0,
                   pinned=None):
    return FanoUrbachModel(spectrum.points, spectrum.values, n_peaks, prior, tied=tied,
                           n_start=n_start, sigma_instr=sigma_instr, pinned=pinned)


def free_energy_curve(spectrum, n_peaks, ladder: NoiseLadder | None = None,
                      config: RunConfig = RunConfig(), prior: SpectralPrior | None = None,
                      tied=False, n_start=2, sigma_instr=0.0, pinned=None,
                      estimator="bar", start=None) -> FreeEnergyCurve:
    """F(sigma) of the ``n_peaks`` Fano + Urbach model for ``spectrum``.

    ``start`` is an optional ``PeakModel`` (e.g. a least-squares fit) that
    every replica starts from, clipped into the prior box.
    """
    if n_peaks < 1:
        raise DomainError("free-energy curves need at least one peak")
    model = spectral_model(spectrum, n_peaks, prior, tied, n_start, sigma_instr, pinned)
    initial = None
    if start is not None:
        initial = np.clip(model.vector(start), model.lower, model.upper)
    return free_energy_curve_for_model(model, spectrum.values, ladder, config, label=n_peaks,
                                       initial=initial, estimator=estimator)


@dataclass
class ModelSelection:
    selected: int
    tied_with: list
    curves: dict

    @property
    def ambiguous(self):
        return bool(self.tied_with)


def select_model(spectrum, candidates, ladder: NoiseLadder | None = None,
                 config: RunConfig = RunConfig(), prior: SpectralPrior | None = None,
                 tied=False, n_start=2, sigma_instr=0.0, estimator="bar",
                 starts=None) -> ModelSelection:
    """Pick the peak count whose curve reaches the lowest free energy.

    Candidates whose minimum lies within the combined Monte-Carlo error of
    the winner are reported in ``tied_with``. ``starts`` optionally maps a
    peak count to a ``PeakModel`` used as that candidate's starting point.
    """
    candidates = list(candidates)
    if len(candidates) < 2:
        raise DomainError("model selection needs at least two candidates")
    if ladder is None:
        widest = spectral_model(spectrum, max(candidates), prior, tied, n_start, sigma_instr)
        ladder = default_ladder(widest, spectrum.values, seed=config.seed)
    curves = []
    for k in candidates:
        curves.append((k, free_energy_curve(spectrum, k, ladder, config, prior, tied,
                                            n_start, sigma_instr, estimator=estimator,
                                            start=(starts or {}).get(k))))
    best_i = min(range(len(curves)), key=lambda i: (curves[i][1].min_free_energy, i))
    best_k, best = curves[best_i]
    tied_with = []
    for i, (k, c) in enumerate(curves):
        if i == best_i:
            continue
        err = np.hypot(best.min_stderr, c.min_stderr)
        if abs(c.min_free_energy - best.min_free_energy) <= err:
            tied_with.append(k)
    by_k = {}
    for k, c in curves:
        by_k.setdefault(k, c)
    return ModelSelection(best_k, tied_with, by_k)
