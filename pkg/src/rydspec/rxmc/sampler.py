"""Replica-exchange Metropolis sampling over a ladder of noise levels.

Replica ``l`` samples exp(-b_l n eps(theta)) prior(theta) with
b_l = 1 / sigma_l**2 and eps half the mean squared residual. An extra
replica at b = 0 samples the prior itself and anchors the free energy.
Each level owns a counter-based stream keyed by (seed, level + 1); the
exchange schedule uses stream 0. Results are therefore fixed by
(seed, ladder) whatever order the replicas are advanced in.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import DomainError
from ..rng import make_stream
from .likelihood import error_energy
from .models import ALL, ForwardModel


@dataclass(frozen=True)
class NoiseLadder:
    """Strictly decreasing noise levels sigma_l (hot to cold)."""

    sigmas: np.ndarray

    def __post_init__(self):
        s = np.array(self.sigmas, dtype=float)
        if s.ndim != 1 or s.size < 2:
            raise DomainError("a noise ladder needs at least 2 levels")
        if np.any(s <= 0) or np.any(np.diff(s) >= 0):
            raise DomainError("noise levels must be positive and strictly decreasing")
        s.setflags(write=False)
        object.__setattr__(self, "sigmas", s)

    @property
    def betas(self):
        return 1.0 / self.sigmas ** 2

    def __len__(self):
        return self.sigmas.size

    @classmethod
    def geometric(cls, sigma_max, sigma_min, count):
        return cls(np.geomspace(sigma_max, sigma_min, int(count)))

    @classmethod
    def bridged(cls, sigma_hot, sigma_min, n_params, spacing=1.0):
        """Geometric ladder with spacing set by the parameter count.

        Adjacent inverse temperatures differ by a factor
        1 + spacing / sqrt(P / 2), which keeps the energy overlap between
        neighbours at order one.
        """
        ratio = 1.0 + spacing / np.sqrt(max(n_params, 1) / 2.0)
        span = 2.0 * np.log(sigma_hot / sigma_min)
        count = max(int(np.ceil(span / np.log(ratio))) + 1, 2)
        return cls.geometric(sigma_hot, sigma_min, count)


def hot_sigma(model: ForwardModel, data, seed=0, draws=512):
    """Noise level at which the likelihood barely moves prior samples.

    Chosen so that b n std_prior(eps) = 0.5 at the hottest level.
    """
    rng = make_stream(seed, (1 << 64) - 1)
    theta = model.draw_prior(rng, draws)
    theta = theta[model.in_support(theta)]
    if theta.shape[0] < 2:
        raise DomainError("could not draw from the prior support")
    eps = error_energy(data, model.curve(theta))
    spread = float(np.std(eps[np.isfinite(eps)]))
    n = np.asarray(data).size
    return float(np.sqrt(max(spread, 1e-300) * n / 0.5))


def default_ladder(model: ForwardModel, data, sigma_min=None, seed=0, spacing=1.0):
    """Ladder from a prior-calibrated hot level down to ``sigma_min``.

    ``sigma_min`` defaults to 1e-4 of the data maximum.
    """
    data = np.asarray(data, dtype=float)
    if sigma_min is None:
        sigma_min = 1e-4 * float(np.max(np.abs(data)))
    hot = max(hot_sigma(model, data, seed), 10.0 * sigma_min)
    return NoiseLadder.bridged(hot, sigma_min, model.sampled.size, spacing)


@dataclass(frozen=True)
class RunConfig:
    burn_in: int = 1000
    samples: int = 2000
    exchange_interval: int = 10
    adapt_interval: int = 50
    target_acceptance: float = 0.25
    initial_scale: float = 0.05
    thin: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.burn_in < 0 or self.samples <= 0:
            raise DomainError("burn-in must be >= 0 and sample count positive")
        if self.exchange_interval <= 0 or self.adapt_interval <= 0 or self.thin <= 0:
            raise DomainError("intervals must be positive")


@dataclass
class ReplicaState:
    """One chain: its level, position, cached error and stream."""

    level: int
    beta: float
    theta: np.ndarray
    eps: float
    rng: np.random.Generator
    accepted: int = 0
    rejected_support: int = 0


def metropolis_step(state: ReplicaState, model: ForwardModel, data, scales) -> ReplicaState:
    """One sweep of single-parameter Gaussian random-walk updates.

    Proposals outside the prior support are rejected and counted. The
    returned state is new; ``state`` keeps its values but shares the stream.
    """
    theta = np.array(state.theta, dtype=float)[None, :]
    comps = model.components(theta)
    eps = np.array([state.eps])
    draws = _draw_block(state.rng, model.sampled.size)
    acc, out_of_support = _sweep(model, np.asarray(data, float), theta, comps, eps,
                                 np.array([state.beta]), np.atleast_2d(scales), draws[None])
    return ReplicaState(state.level, state.beta, theta[0], float(eps[0]), state.rng,
                        state.accepted + int(acc.sum()),
                        state.rejected_support + int(out_of_support.sum()))


def exchange_log_acceptance(beta_lo, beta_hi, n, eps_lo, eps_hi):
    """Log swap probability between a hotter (lo) and a colder (hi) level."""
    return (beta_hi - beta_lo) * n * (eps_hi - eps_lo)


def replica_exchange(hot: ReplicaState, cold: ReplicaState, n, u):
    """Attempt a swap of positions between adjacent levels.

    ``u`` is a uniform variate in [0, 1). Returns the (possibly swapped)
    pair and whether the swap was accepted.
    """
    if cold.level != hot.level + 1:
        raise DomainError(f"levels {hot.level} and {cold.level} are not adjacent")
    log_a = exchange_log_acceptance(hot.beta, cold.beta, n, hot.eps, cold.eps)
    if np.log(u) < min(0.0, log_a):
        new_hot = ReplicaState(hot.level, hot.beta, cold.theta, cold.eps, hot.rng,
                               hot.accepted, hot.rejected_support)
        new_cold = ReplicaState(cold.level, cold.beta, hot.theta, hot.eps, cold.rng,
                                cold.accepted, cold.rejected_support)
        return new_hot, new_cold, True
    return hot, cold, False


def _draw_block(rng, p):
    # One block per replica per sweep: normals for the steps, uniforms for
    # the accept tests.
    z = rng.standard_normal(p)
    u = rng.random(p)
    return np.stack([z, u])


def _sweep(model, data, theta, comps, eps, betas, scales, draws):
    """Vectorised sweep over the sampled parameters of every replica.

    Updates ``theta``, ``comps`` and ``eps`` in place and returns per
    replica/parameter acceptance and out-of-support flags.
    """
    n = data.size
    sampled = model.sampled
    acc = np.zeros((theta.shape[0], sampled.size), dtype=bool)
    outside = np.zeros_like(acc)
    # Residual of the current curve; refreshed from the components once per
    # sweep so incremental updates cannot drift.
    resid = model.combine(comps) - data
    for i, j in enumerate(sampled):
        prop = theta.copy()
        prop[:, j] += scales[:, i] * draws[:, 0, i]
        ok = model.in_support(prop)
        c = model.component_of[j]
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            if c == ALL or not model.additive:
                new_comps = model.components(prop)
                new_resid = model.combine(new_comps) - data
            else:
                new_comp = model.component(prop, c)
                new_resid = resid + (new_comp - comps[:, c])
            new_eps = 0.5 * np.mean(new_resid * new_resid, axis=-1)
            log_a = -betas * n * (new_eps - eps)
            take = ok & (np.log(draws[:, 1, i]) < np.minimum(log_a, 0.0))
        theta[take] = prop[take]
        eps[take] = new_eps[take]
        resid[take] = new_resid[take]
        if c == ALL or not model.additive:
            comps[take] = new_comps[take]
        else:
            comps[take, c] = new_comp[take]
        acc[:, i] = take
        outside[:, i] = ~ok
    return acc, outside


def metropolis_chains(model: ForwardModel, data, beta, theta0, scales, sweeps, seed=0,
                      burn_in=0):
    """Independent random-walk chains sharing one inverse temperature.

    ``theta0`` has shape (R, P); chain ``r`` reads stream ``r + 1``.
    Returns the sampled parameters after every post-burn-in sweep, shape
    (sweeps, R, P), and the per-parameter acceptance rate.
    """
    data = np.asarray(data, dtype=float)
    theta = np.array(theta0, dtype=float, copy=True)
    r = theta.shape[0]
    if not np.all(model.in_support(theta)):
        raise DomainError("initial parameters lie outside the prior support")
    streams = [make_stream(seed, i + 1) for i in range(r)]
    comps = model.components(theta)
    eps = error_energy(data, model.combine(comps))
    betas = np.full(r, float(beta))
    p = model.sampled.size
    scales = np.broadcast_to(np.asarray(scales, dtype=float), (r, p))
    out = np.empty((sweeps, r, model.n_params))
    acc = np.zeros(p)
    for s in range(burn_in + sweeps):
        draws = np.stack([_draw_block(g, p) for g in streams])
        a, _ = _sweep(model, data, theta, comps, eps, betas, scales, draws)
        if s >= burn_in:
            out[s - burn_in] = theta
            acc += a.mean(axis=0)
    return out, acc / max(sweeps, 1)


@dataclass
class ChainResult:
    betas: np.ndarray
    eps: np.ndarray
    theta: np.ndarray
    swap_attempts: np.ndarray
    swap_accepts: np.ndarray
    acceptance: np.ndarray
    scales: np.ndarray
    n_points: int
    config: RunConfig
    final_theta: np.ndarray = field(repr=False, default=None)

    @property
    def swap_rate(self):
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.swap_attempts > 0, self.swap_accepts / self.swap_attempts, 0.0)


class ReplicaExchange:
    """Replica-exchange sampler on ``ladder`` plus a prior replica at b = 0.

    Level 0 of every array is the prior replica; level ``l + 1`` is ladder
    entry ``l``.
    """

    def __init__(self, model: ForwardModel, data, ladder: NoiseLadder, config: RunConfig,
                 initial=None):
        self.model = model
        self.data = np.asarray(data, dtype=float)
        if self.data.shape != model.x.shape:
            raise DomainError("data and model grid differ in length")
        self.ladder = ladder
        self.config = config
        self.betas = np.concatenate([[0.0], ladder.betas])
        r = self.betas.size
        self.streams = [make_stream(config.seed, level + 1) for level in range(r)]
        self.exchange_rng = make_stream(config.seed, 0)
        width = (model.upper - model.lower)[model.sampled]
        self.scales = np.tile(config.initial_scale * width, (r, 1))
        self.max_scales = width
        if initial is None:
            self.theta = np.stack([self._draw_support(rng) for rng in self.streams])
        else:
            initial = np.atleast_2d(np.asarray(initial, dtype=float))
            self.theta = np.broadcast_to(initial, (r, model.n_params)).copy()
            if not np.all(model.in_support(self.theta)):
                raise DomainError("initial parameters lie outside the prior support")
        self.comps = model.components(self.theta)
        self.eps = error_energy(self.data, model.combine(self.comps))
        self.swap_attempts = np.zeros(r - 1, dtype=int)
        self.swap_accepts = np.zeros(r - 1, dtype=int)
        self.sweeps = 0

    def _draw_support(self, rng):
        for _ in range(10_000):
            theta = self.model.draw_prior(rng, 1)
            if self.model.in_support(theta)[0]:
                return theta[0]
        raise DomainError("prior support is (nearly) empty")

    def states(self):
        return [ReplicaState(l, float(b), self.theta[l].copy(), float(self.eps[l]), self.streams[l])
                for l, b in enumerate(self.betas)]

    def advance(self, order=None, sequential=False):
        """One sweep for every replica.

        ``order`` only changes the order in which streams are read (and,
        with ``sequential``, the order replicas are updated one at a time);
        the outcome is the same.
        """
        r = self.betas.size
        order = range(r) if order is None else order
        p = self.model.sampled.size
        draws = np.empty((r, 2, p))
        for level in order:
            draws[level] = _draw_block(self.streams[level], p)
        if not sequential:
            return _sweep(self.model, self.data, self.theta, self.comps, self.eps,
                          self.betas, self.scales, draws)
        acc = np.zeros((r, p), dtype=bool)
        for level in order:
            sl = slice(level, level + 1)
            theta, comps, eps = self.theta[sl].copy(), self.comps[sl].copy(), self.eps[sl].copy()
            a, _ = _sweep(self.model, self.data, theta, comps, eps, self.betas[sl],
                          self.scales[sl], draws[sl])
            self.theta[sl], self.comps[sl], self.eps[sl] = theta, comps, eps
            acc[level] = a[0]
        return acc, None

    def exchange(self):
        parity = int(self.exchange_rng.integers(2))
        n = self.data.size
        for lo in range(parity, self.betas.size - 1, 2):
            hi = lo + 1
            log_a = exchange_log_acceptance(self.betas[lo], self.betas[hi], n,
                                            self.eps[lo], self.eps[hi])
            self.swap_attempts[lo] += 1
            if np.log(self.exchange_rng.random()) < min(0.0, log_a):
                self.swap_accepts[lo] += 1
                for arr in (self.theta, self.comps, self.eps):
                    arr[[lo, hi]] = arr[[hi, lo]]

    def _adapt(self, rate):
        factor = np.exp(np.clip((rate - self.config.target_acceptance) * 4.0, -2.0, 2.0))
        self.scales = np.minimum(self.scales * factor, self.max_scales)

    def run(self) -> ChainResult:
        cfg = self.config
        r = self.betas.size
        p = self.model.sampled.size
        window = np.zeros((r, p))
        for sweep in range(cfg.burn_in):
            acc, _ = self.advance()
            window += acc
            self.sweeps += 1
            if self.sweeps % cfg.exchange_interval == 0:
                self.exchange()
            if (sweep + 1) % cfg.adapt_interval == 0:
                self._adapt(window / cfg.adapt_interval)
                window[:] = 0
        eps_trace = np.empty((cfg.samples, r))
        kept = []
        total_acc = np.zeros((r, p))
        self.swap_attempts[:] = 0
        self.swap_accepts[:] = 0
        for s in range(cfg.samples):
            acc, _ = self.advance()
            total_acc += acc
            self.sweeps += 1
            if self.sweeps % cfg.exchange_interval == 0:
                self.exchange()
            eps_trace[s] = self.eps
            if s % cfg.thin == 0:
                kept.append(self.theta.copy())
        return ChainResult(
            betas=self.betas.copy(), eps=eps_trace, theta=np.array(kept),
            swap_attempts=self.swap_attempts.copy(), swap_accepts=self.swap_accepts.copy(),
            acceptance=total_acc / cfg.samples, scales=self.scales.copy(),
            n_points=self.data.size, config=cfg, final_theta=self.theta.copy(),
        )
