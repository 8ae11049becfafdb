"""Gaussian likelihood in the error-function form exp(-n eps / sigma**2).

``eps`` is half the mean squared residual, (1 / 2n) sum (y - f)**2, so that
the exponent equals -sum (y - f)**2 / (2 sigma**2) and ``sigma`` is the
standard deviation of the noise.
"""
import numpy as np

from ..errors import DomainError

LOG_2PI = float(np.log(2.0 * np.pi))


def error_energy(data, curve):
    """Half mean squared residual along the last axis."""
    r = np.asarray(curve) - np.asarray(data)
    return 0.5 * np.mean(r * r, axis=-1)


def log_likelihood_from_error(n, eps, sigma, normalized=False):
    """-n eps / sigma**2, plus -n log sigma - (n/2) log 2 pi when normalized."""
    if not np.all(np.asarray(sigma) > 0):
        raise DomainError("noise level must be positive")
    out = -n * np.asarray(eps) / np.asarray(sigma) ** 2
    if normalized:
        out = out - n * np.log(sigma) - 0.5 * n * LOG_2PI
    return out


def log_likelihood(spectrum, model, theta, sigma, normalized=False):
    """Log-likelihood of ``spectrum`` under ``model`` at parameters ``theta``."""
    data = spectrum.values if hasattr(spectrum, "values") else np.asarray(spectrum)
    curve = model.curve(np.atleast_2d(theta))[0]
    return float(log_likelihood_from_error(data.size, error_energy(data, curve), sigma, normalized))
