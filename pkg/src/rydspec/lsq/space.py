"""Named, bounded parameter vectors and the trust-region driver."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import least_squares

from ..errors import DataError

STEP_TOL = 1e-10
GRAD_TOL = 1e-10
MAX_ITER = 10_000


@dataclass(frozen=True)
class Param:
    value: float
    lower: float = -np.inf
    upper: float = np.inf
    frozen: bool = False


class ParamSpace:
    """Ordered mapping of parameter name to :class:`Param`."""

    def __init__(self, params: Iterable[tuple[str, Param]] | dict):
        items = params.items() if isinstance(params, dict) else params
        self._params = {}
        for name, p in items:
            if not isinstance(p, Param):
                p = Param(*p) if isinstance(p, tuple) else Param(float(p))
            if not p.frozen and not (p.lower <= p.value <= p.upper):
                raise DataError(
                    f"initial value {p.value} of {name!r} outside bounds [{p.lower}, {p.upper}]")
            if p.lower > p.upper:
                raise DataError(f"empty bounds for {name!r}")
            self._params[name] = p

    def __getitem__(self, name):
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def items(self):
        return self._params.items()

    @property
    def names(self):
        return list(self._params)

    @property
    def free_names(self):
        return [n for n, p in self._params.items() if not p.frozen]

    def values(self):
        return np.array([p.value for p in self._params.values()])

    def with_values(self, values: dict):
        new = dict(self._params)
        for name, v in values.items():
            p = new[name]
            # Clamp into bounds so perturbed starts stay feasible.
            new[name] = replace(p, value=float(min(max(v, p.lower), p.upper)))
        return ParamSpace(new)

    def updated(self, name, **changes):
        new = dict(self._params)
        new[name] = replace(new[name], **changes)
        return ParamSpace(new)

    def freeze(self, *names):
        space = self
        for name in names:
            space = space.updated(name, frozen=True)
        return space


@dataclass
class FitReport:
    best_params: dict
    stderr: dict
    covariance: np.ndarray
    free_names: list
    residual_mse: float
    initial_mse: float
    iterations: int
    converged: bool
    message: str
    gradient_norm: float
    n_points: int
    thresholds: dict = field(default_factory=lambda: {
        "step_tol": STEP_TOL, "grad_tol": GRAD_TOL, "max_iter": MAX_ITER})
    extra: dict = field(default_factory=dict)


def solve(
    residuals: Callable[[np.ndarray], np.ndarray],
    space: ParamSpace,
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None,
    *,
    max_iter: int = MAX_ITER,
) -> FitReport:
    """Bounded trust-region least squares over the free parameters of ``space``.

    ``residuals`` and ``jacobian`` take the full parameter vector (frozen
    entries included); the Jacobian has one column per parameter. Without a
    Jacobian, 2-point finite differences are used.
    """
    names = space.names
    free = np.array([not space[n].frozen for n in names])
    full0 = space.values()
    lower = np.array([space[n].lower for n in names])[free]
    upper = np.array([space[n].upper for n in names])[free]

    def expand(x):
        full = full0.copy()
        full[free] = x
        return full

    def fun(x):
        return residuals(expand(x))

    jac = "2-point"
    if jacobian is not None:
        def jac(x):
            return jacobian(expand(x))[:, free]

    x0 = full0[free]
    r0 = fun(x0)
    m = r0.size
    if free.sum() > m:
        raise DataError(f"{free.sum()} free parameters exceed {m} data points")
    if free.sum() == 0:
        return _report(names, full0, free, r0, r0, np.zeros((m, 0)), 0, True, "nothing to fit")

    res = least_squares(
        fun, x0, jac=jac, bounds=(lower, upper), method="trf",
        xtol=STEP_TOL, gtol=GRAD_TOL, ftol=None, x_scale="jac", max_nfev=max_iter,
    )
    full = expand(res.x)
    return _report(names, full, free, r0, res.fun, res.jac, res.nfev, res.status > 0, res.message)


def _report(names, full, free, r0, r, jac, nfev, converged, message):
    m = r.size
    p = int(free.sum())
    ssr = float(r @ r)
    dof = m - p
    scale = ssr / dof if dof > 0 else 0.0
    if p:
        # Equilibrate columns first: parameter scales differ by many orders
        # of magnitude and pinv truncates relative to the largest value.
        norms = np.linalg.norm(jac, axis=0)
        norms[norms == 0] = 1.0
        js = jac / norms
        cov = np.linalg.pinv(js.T @ js) / np.outer(norms, norms) * scale
    else:
        cov = np.zeros((0, 0))
    cov = 0.5 * (cov + cov.T)
    free_names = [n for n, f in zip(names, free) if f]
    stderr = {n: 0.0 for n in names}
    for i, n in enumerate(free_names):
        stderr[n] = float(np.sqrt(max(cov[i, i], 0.0)))
    grad = jac.T @ r if p else np.zeros(0)
    return FitReport(
        best_params={n: float(v) for n, v in zip(names, full)},
        stderr=stderr,
        covariance=cov,
        free_names=free_names,
        residual_mse=ssr / m,
        initial_mse=float(r0 @ r0) / m,
        iterations=int(nfev),
        converged=bool(converged),
        message=str(message),
        gradient_norm=float(np.max(np.abs(grad))) if p else 0.0,
        n_points=m,
    )
