"""Detection power: asymptotic expansion, detection boundary, and simulation.

The oracle single-scale test (anomaly size known, position unknown) admits a
power expansion through the survival function of a folded normal
distribution; the detection boundary separates anomaly sequences detected
with asymptotic power one from undetectable ones.  Empirical power studies
replay the full pipeline: draw fields with a planted block anomaly, scan, and
compare against a calibrated quantile.  Replicate substreams are independent
of the penalty constant and the level, so power comparisons across v and
alpha run on shared random fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import _kernels
from .calibrate import TAG_POWER, quantile, replicate_generator
from .errors import DomainError
from .families import PoissonModel
from .regions import Region, enumerate_scales
from .scan import penalty_vector, prefix_sums

__all__ = [
    "AnomalySpec",
    "PowerEstimate",
    "folded_normal_sf",
    "oracle_power",
    "boundary_gap",
    "empirical_power",
    "power_study",
]

# Qualitative boundedness guard for the expansion: Poisson intensities must
# stay within [1/B, B] so variances are bounded away from zero and infinity.
DEFAULT_INTENSITY_BOUND = 100.0


@dataclass(frozen=True)
class AnomalySpec:
    """A planted block: elevated natural parameter theta1 on ``block``."""

    block: Region
    theta1: float
    theta0: float

    def __post_init__(self):
        if self.theta1 == self.theta0:
            raise DomainError("anomaly requires theta1 != theta0")


@dataclass(frozen=True)
class PowerEstimate:
    empirical: float
    replicates: int
    std_err: float
    config: dict

    def __post_init__(self):
        if not (0.0 <= self.empirical <= 1.0):
            raise DomainError("empirical power must lie in [0, 1]")


def folded_normal_sf(x, mu, sigma2):
    """Survival function of |N(mu, sigma2)| at x >= 0."""
    if np.any(np.asarray(x) < 0.0):
        raise DomainError("x must be nonnegative")
    if not (sigma2 > 0.0):
        raise DomainError("sigma2 must be positive")
    sigma = math.sqrt(sigma2)
    x = np.asarray(x, dtype=np.float64)
    out = ndtr(-(x + mu) / sigma) + ndtr((mu - x) / sigma)
    return float(out) if out.ndim == 0 else out


def _check_intensity_guard(model, thetas, bound):
    if isinstance(model, PoissonModel):
        for th in thetas:
            lam = model.mean(th)
            if not (1.0 / bound <= lam <= bound):
                raise DomainError(
                    f"Poisson intensity {lam} outside [{1.0 / bound}, {bound}]; "
                    "the power expansion needs uniformly bounded variances"
                )


def _signal_shift(model, theta0, theta1, rel_scale, n, d):
    return (
        n ** (d / 2.0)
        * math.sqrt(rel_scale)
        * (model.mean(theta1) - model.mean(theta0))
        / math.sqrt(model.variance(theta0))
    )


def oracle_power(
    model,
    theta0,
    theta1,
    rel_scale,
    n,
    d,
    v,
    q_oracle,
    alpha,
    intensity_bound=DEFAULT_INTENSITY_BOUND,
):
    """Power expansion of the single-scale test at relative anomaly size ``rel_scale``.

    Evaluates alpha + (1 - alpha) * F(x, mu, sigma2) with the folded-normal
    survival F at x = q_oracle + sqrt(2 v log(1/rel_scale)), signal shift
    mu = n^{d/2} sqrt(rel_scale) (m(theta1) - m(theta0)) / sqrt(variance(theta0))
    and sigma2 = variance(theta1) / variance(theta0).  This is an asymptotic
    approximation: vanishing correction terms are dropped.
    """
    if not (0.0 < rel_scale < 1.0):
        raise DomainError("rel_scale must lie in (0, 1)")
    if not (0.0 < alpha < 1.0):
        raise DomainError("alpha must lie in (0, 1)")
    _check_intensity_guard(model, (theta0, theta1), intensity_bound)
    x = q_oracle + math.sqrt(2.0 * v * math.log(1.0 / rel_scale))
    mu = _signal_shift(model, theta0, theta1, rel_scale, n, d)
    sigma2 = model.variance(theta1) / model.variance(theta0)
    return alpha + (1.0 - alpha) * folded_normal_sf(max(x, 0.0), mu, sigma2)


def boundary_gap(
    model,
    theta0,
    theta1,
    rel_scale,
    n,
    d,
    v,
    intensity_bound=DEFAULT_INTENSITY_BOUND,
):
    """Detection-boundary gap; diverging to -infinity along a sequence means
    the anomaly is detected with asymptotic power one, and a positive gap
    bounded away from zero means it is not."""
    if not (0.0 < rel_scale < 1.0):
        raise DomainError("rel_scale must lie in (0, 1)")
    _check_intensity_guard(model, (theta0, theta1), intensity_bound)
    signal = n ** (d / 2.0) * math.sqrt(rel_scale) * abs(model.mean(theta1) - model.mean(theta0))
    num = math.sqrt(2.0 * v * math.log(1.0 / rel_scale) * model.variance(theta0)) - signal
    return num / math.sqrt(model.variance(theta1))


def _simulate_scan_maxima(model, theta0, anomaly, system, replicates, seed, stream_offset):
    """Per-replicate, per-scale unpenalized maxima of anomaly fields (v-free)."""
    if anomaly is not None and not anomaly.block.fits(system.n):
        raise DomainError("anomaly block does not fit the grid")
    extents = enumerate_scales(system)
    ext = np.asarray(extents, dtype=np.int64)
    sizes = np.prod(ext, axis=1).astype(np.float64)
    shape = (system.n,) * system.d
    maxima = np.empty((replicates, len(extents)))
    for r in range(replicates):
        rng = replicate_generator(seed, stream_offset + r, TAG_POWER)
        values = model.sample(theta0, rng, shape)
        if anomaly is not None:
            block = anomaly.block.slices()
            values[block] = model.sample(anomaly.theta1, rng, values[block].shape)
        mins, maxs = _kernels.scale_minmax(prefix_sums(values), ext)
        maxima[r] = np.maximum(
            model.lrt(mins / sizes, sizes, theta0),
            model.lrt(maxs / sizes, sizes, theta0),
        )
    return maxima, sizes


def power_study(model, theta0, anomalies, system, tables, alphas, replicates, seed):
    """Empirical power over a grid of anomalies x penalty constants x levels.

    ``tables`` maps v to its QuantileTable.  For a fixed anomaly every (v,
    alpha) cell reuses the same simulated fields, so cross-v comparisons are
    paired.  Returns one row dict per (anomaly, v, alpha).
    """
    if replicates < 1:
        raise DomainError("replicates must be >= 1")
    rows = []
    for a_idx, anomaly in enumerate(anomalies):
        maxima, sizes = _simulate_scan_maxima(
            model, theta0, anomaly, system, replicates, seed, a_idx * replicates
        )
        for v, table in tables.items():
            pens = penalty_vector(v, sizes, system.n, system.d)
            stats = np.max(maxima - pens, axis=1)
            for alpha in alphas:
                q = quantile(table, alpha)
                hits = float(np.mean(stats > q))
                block_size = anomaly.block.size if anomaly is not None else 0
                rows.append(
                    {
                        "family": model.name,
                        "n": system.n,
                        "d": system.d,
                        "kind": system.kind,
                        "block_extent": anomaly.block.extent if anomaly is not None else (),
                        "block_size": block_size,
                        "theta0": theta0,
                        "mean0": model.mean(theta0),
                        "theta1": anomaly.theta1 if anomaly is not None else theta0,
                        "mean1": model.mean(anomaly.theta1) if anomaly is not None else model.mean(theta0),
                        "v": float(v),
                        "alpha": float(alpha),
                        "power": hits,
                        "std_err": math.sqrt(hits * (1.0 - hits) / replicates),
                        "replicates": replicates,
                        "seed": int(seed),
                        "boundary_gap": (
                            boundary_gap(
                                model,
                                theta0,
                                anomaly.theta1,
                                block_size / float(system.n) ** system.d,
                                system.n,
                                system.d,
                                float(v),
                            )
                            if anomaly is not None
                            else float("nan")
                        ),
                    }
                )
    return rows


def empirical_power(model, theta0, anomaly, system, table, alpha, replicates, seed):
    """Fraction of replicates in which the planted anomaly triggers a detection."""
    rows = power_study(
        model, theta0, [anomaly], system, {system.v: table}, [alpha], replicates, seed
    )
    row = rows[0]
    return PowerEstimate(
        empirical=row["power"],
        replicates=replicates,
        std_err=row["std_err"],
        config={k: row[k] for k in ("family", "n", "d", "kind", "block_extent", "theta1", "v", "alpha", "seed")},
    )
