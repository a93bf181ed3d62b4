"""Natural exponential family models and local likelihood-ratio statistics.

Three one-parameter families are supported: Gaussian with a fixed, known
standard deviation, Bernoulli, and Poisson.  Each model exposes the cumulant
transform ``psi``, the mean map ``mean`` (= psi'), the variance map
``variance`` (= psi''), conversions between the natural and the mean
parametrization, sampling, and the likelihood-ratio statistic of a region of
``size`` observations with empirical mean ``ybar`` against a baseline natural
parameter ``theta0``:

    lrt = sqrt(2 * size * J(ybar, theta0))

where J is the Kullback-Leibler-type discrepancy between the fitted and the
baseline parameter.  ``lrt`` uses the per-family closed form; ``lrt_generic``
evaluates J through the Legendre-Fenchel conjugate of ``psi`` and serves as an
independent route to the same value.

Boundary conventions: ``x*log(x/c)`` is continued by 0 at ``x = 0`` (and the
mirror term at ``x = 1`` for Bernoulli), so the statistic stays finite on the
closure of the mean domain.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit

from .errors import DomainError

__all__ = [
    "GaussianModel",
    "BernoulliModel",
    "PoissonModel",
    "make_model",
    "lrt_stat",
    "lrt_stat_generic",
    "standardize",
    "sample",
]


def _as_float_array(x):
    a = np.asarray(x, dtype=np.float64)
    return a, (a.ndim == 0)


class NefModel:
    """Base class; subclasses implement the family-specific maps."""

    name = "nef"

    # -- family maps -------------------------------------------------------

    def psi(self, theta):
        raise NotImplementedError

    def mean(self, theta):
        raise NotImplementedError

    def variance(self, theta):
        raise NotImplementedError

    def theta_from_mean(self, mu):
        raise NotImplementedError

    def check_mean_in_closure(self, ybar):
        """Raise DomainError if ybar is outside the closure of the mean domain."""

    def _boundary_discrepancy(self, ybar, theta0):
        """J at a boundary mean value, or None when ybar is interior."""
        return None

    # -- statistics --------------------------------------------------------

    def lrt(self, ybar, size, theta0):
        """Closed-form likelihood-ratio statistic; elementwise over ybar/size."""
        raise NotImplementedError

    def lrt_generic(self, ybar, size, theta0):
        """Likelihood-ratio statistic via the conjugate of psi (scalar only)."""
        y = float(ybar)
        self.check_mean_in_closure(y)
        j = self._boundary_discrepancy(y, theta0)
        if j is None:
            th = self.theta_from_mean(y)
            j = th * y - self.psi(th) - (theta0 * y - self.psi(theta0))
        return math.sqrt(2.0 * float(size) * max(j, 0.0))

    def standardize(self, y, theta0):
        return (y - self.mean(theta0)) / math.sqrt(self.variance(theta0))

    def sample(self, theta, rng, size=None):
        raise NotImplementedError


class GaussianModel(NefModel):
    """Normal observations with known standard deviation ``sigma``.

    The natural parameter is theta = mu / sigma^2 with cumulant transform
    psi(theta) = sigma^2 theta^2 / 2, so mean(theta) = sigma^2 theta and
    variance(theta) = sigma^2.  At sigma = 1 the natural parameter equals
    the mean.
    """

    name = "gaussian"

    def __init__(self, sigma=1.0):
        if not (sigma > 0.0) or not math.isfinite(sigma):
            raise DomainError(f"sigma must be positive and finite, got {sigma}")
        self.sigma = float(sigma)

    def psi(self, theta):
        return 0.5 * self.sigma**2 * theta**2

    def mean(self, theta):
        return self.sigma**2 * theta

    def variance(self, theta):
        return self.sigma**2

    def theta_from_mean(self, mu):
        return mu / self.sigma**2

    def lrt(self, ybar, size, theta0):
        y, scalar = _as_float_array(ybar)
        mean0 = self.mean(theta0)
        t = np.sqrt(np.asarray(size, dtype=np.float64)) * np.abs(y - mean0) / self.sigma
        return float(t) if scalar else t

    def sample(self, theta, rng, size=None):
        draw = rng.standard_normal(size) * self.sigma + self.mean(theta)
        return float(draw) if size is None else draw


class BernoulliModel(NefModel):
    """Bernoulli observations; natural parameter theta = log(p / (1 - p))."""

    name = "bernoulli"

    def psi(self, theta):
        # log(1 + exp(theta)), overflow-safe
        return float(np.logaddexp(0.0, theta))

    def mean(self, theta):
        return float(expit(theta))

    def variance(self, theta):
        p = self.mean(theta)
        return p * (1.0 - p)

    def theta_from_mean(self, mu):
        if not (0.0 < mu < 1.0):
            raise DomainError(f"Bernoulli mean must lie in (0, 1), got {mu}")
        return math.log(mu / (1.0 - mu))

    def check_mean_in_closure(self, ybar):
        y = np.asarray(ybar, dtype=np.float64)
        if np.any(y < 0.0) or np.any(y > 1.0):
            raise DomainError("Bernoulli region mean must lie in [0, 1]")

    def _boundary_discrepancy(self, ybar, theta0):
        if ybar == 0.0:
            return self.psi(theta0)
        if ybar == 1.0:
            return self.psi(theta0) - theta0
        return None

    def lrt(self, ybar, size, theta0):
        y, scalar = _as_float_array(ybar)
        self.check_mean_in_closure(y)
        p0 = self.mean(theta0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = np.where(y > 0.0, y * np.log(y / p0), 0.0)
            t2 = np.where(y < 1.0, (1.0 - y) * np.log((1.0 - y) / (1.0 - p0)), 0.0)
        j = np.maximum(t1 + t2, 0.0)
        t = np.sqrt(2.0 * np.asarray(size, dtype=np.float64) * j)
        return float(t) if scalar else t

    def sample(self, theta, rng, size=None):
        p = self.mean(theta)
        if size is None:
            return 1.0 if rng.random() < p else 0.0
        return (rng.random(size) < p).astype(np.float64)


class PoissonModel(NefModel):
    """Poisson observations; natural parameter theta = log(lambda)."""

    name = "poisson"

    def psi(self, theta):
        return math.exp(theta)

    def mean(self, theta):
        return math.exp(theta)

    def variance(self, theta):
        return math.exp(theta)

    def theta_from_mean(self, mu):
        if not (mu > 0.0):
            raise DomainError(f"Poisson mean must be positive, got {mu}")
        return math.log(mu)

    def check_mean_in_closure(self, ybar):
        y = np.asarray(ybar, dtype=np.float64)
        if np.any(y < 0.0):
            raise DomainError("Poisson region mean must be nonnegative")

    def _boundary_discrepancy(self, ybar, theta0):
        if ybar == 0.0:
            return self.psi(theta0)
        return None

    def lrt(self, ybar, size, theta0):
        y, scalar = _as_float_array(ybar)
        self.check_mean_in_closure(y)
        lam0 = self.mean(theta0)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = np.where(y > 0.0, y * np.log(y / lam0), 0.0)
        j = np.maximum(t1 - (y - lam0), 0.0)
        t = np.sqrt(2.0 * np.asarray(size, dtype=np.float64) * j)
        return float(t) if scalar else t

    def sample(self, theta, rng, size=None):
        lam = self.mean(theta)
        draw = rng.poisson(lam, size)
        return float(draw) if size is None else draw.astype(np.float64)


_FAMILIES = {
    "gaussian": GaussianModel,
    "bernoulli": BernoulliModel,
    "poisson": PoissonModel,
}


def make_model(family, sigma=1.0):
    """Build a model by family name; ``sigma`` applies to Gaussian only."""
    try:
        cls = _FAMILIES[family]
    except KeyError:
        raise DomainError(f"unknown family {family!r}") from None
    return cls(sigma) if cls is GaussianModel else cls()


def lrt_stat(model, ybar, region_size, theta0):
    """Penalization-free local statistic sqrt(2 * |R| * J(ybar, theta0))."""
    if np.any(np.asarray(region_size) < 1):
        raise DomainError("region_size must be >= 1")
    return model.lrt(ybar, region_size, theta0)


def lrt_stat_generic(model, ybar, region_size, theta0):
    """Same statistic computed through the conjugate of psi (independent route)."""
    if region_size < 1:
        raise DomainError("region_size must be >= 1")
    return model.lrt_generic(ybar, region_size, theta0)


def standardize(model, y, theta0):
    """Center by mean(theta0) and scale by sqrt(variance(theta0))."""
    return model.standardize(y, theta0)


def sample(model, theta, rng, size=None):
    """Draw from the model at natural parameter ``theta`` using ``rng``."""
    return model.sample(theta, rng, size)
