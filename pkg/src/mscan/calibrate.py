"""Monte-Carlo calibration of the scan statistic's null distribution.

The null reference is the Gaussian surrogate: the penalized scan of an
i.i.d. standard-normal field.  Its distribution depends only on the region
system, so quantile tables can be simulated once, persisted, and reused for
any data set scanned with the same configuration.

Replicates draw from counter-based substreams indexed by replicate number
(Philox, jumped), so results are bit-identical regardless of execution order
or thread count.  Tables store the full sorted sample; any level is servable
later via the conservative ceiling order statistic.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import __version__, _kernels
from .errors import (
    BudgetExceededError,
    CalibrationMismatchError,
    DomainError,
    GridFormatError,
)
from .families import GaussianModel
from .regions import enumerate_scales
from .scan import penalty_vector, prefix_sums

__all__ = [
    "QuantileTable",
    "replicate_generator",
    "sample_null_statistics",
    "simulate_null",
    "simulate_null_tables",
    "quantile",
    "save_table",
    "load_table",
    "export_text_sample",
    "load_text_sample",
]

TABLE_MAGIC = b"MSCANQT1"

# Stream domain tags keep the calibration noise, family null draws, and the
# power-study data decoupled even under a shared master seed.
TAG_GAUSSIAN_NULL = 0
TAG_FAMILY_NULL = 1
TAG_POWER = 2

# Guard against accidental monster simulations: n^d * replicates cap.
DEFAULT_CELL_BUDGET = 1 << 36

# meta keys that must agree between a table and the scan it calibrates
MATCH_KEYS = ("kind", "n", "d", "min_size", "v", "scales")


@dataclass
class QuantileTable:
    """Sorted Monte-Carlo sample of the null scan statistic plus provenance."""

    meta: dict
    sample: np.ndarray
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        s = np.ascontiguousarray(self.sample, dtype=np.float64)
        if s.ndim != 1:
            raise DomainError("sample must be one-dimensional")
        if int(self.meta.get("replicates", -1)) != s.size:
            raise DomainError("meta replicate count does not match the sample size")
        if np.any(np.diff(s) < 0):
            raise DomainError("sample must be sorted ascending")
        object.__setattr__(self, "sample", s)

    def __eq__(self, other):
        return (
            isinstance(other, QuantileTable)
            and self.meta == other.meta
            and np.array_equal(self.sample, other.sample)
        )


def replicate_generator(seed, index, tag=TAG_GAUSSIAN_NULL):
    """Independent substream for one replicate: Philox keyed by (tag, seed)."""
    key = (int(tag) << 64) | (int(seed) & ((1 << 64) - 1))
    return np.random.Generator(np.random.Philox(key=key).jumped(int(index)))


def system_meta(system, replicates, seed):
    return {
        "kind": system.kind,
        "n": int(system.n),
        "d": int(system.d),
        "min_size": int(system.min_size),
        "v": float(system.v),
        "scales": system.policy_string(),
        "replicates": int(replicates),
        "seed": int(seed),
        "version": __version__,
    }


def _check_budget(system, replicates, budget):
    cells = system.n**system.d * replicates
    if cells > budget:
        raise BudgetExceededError(
            f"simulation needs {cells} cell draws, exceeding the budget {budget}; "
            "raise the budget explicitly to proceed"
        )


def sample_null_statistics(
    system,
    replicates,
    seed,
    model=None,
    theta0=None,
    return_scale_maxima=False,
    budget=DEFAULT_CELL_BUDGET,
):
    """Null draws of the penalized scan statistic.

    With ``model=None`` the Gaussian surrogate is simulated (standard-normal
    noise, unit Gaussian scan at baseline 0); otherwise fields are drawn from
    the model at natural parameter ``theta0`` and the family statistic is
    scanned.  Returns the statistic sample, plus the per-scale unpenalized
    maxima matrix (replicates x scales) when ``return_scale_maxima`` is set.
    The per-scale maxima do not depend on v.
    """
    if replicates < 1:
        raise DomainError("replicates must be >= 1")
    _check_budget(system, replicates, budget)
    if model is None:
        model = GaussianModel(1.0)
        theta0 = 0.0
        tag = TAG_GAUSSIAN_NULL
        draw = lambda rng, shape: rng.standard_normal(shape)
    else:
        if theta0 is None:
            raise DomainError("theta0 is required when a model is given")
        tag = TAG_FAMILY_NULL
        draw = lambda rng, shape: model.sample(theta0, rng, shape)

    extents = enumerate_scales(system)
    ext = np.asarray(extents, dtype=np.int64)
    sizes = np.prod(ext, axis=1).astype(np.float64)
    pens = penalty_vector(system.v, sizes, system.n, system.d)
    shape = (system.n,) * system.d

    stats = np.empty(replicates)
    maxima = np.empty((replicates, len(extents))) if return_scale_maxima else None
    for i in range(replicates):
        rng = replicate_generator(seed, i, tag)
        values = draw(rng, shape)
        mins, maxs = _kernels.scale_minmax(prefix_sums(values), ext)
        t = np.maximum(
            model.lrt(mins / sizes, sizes, theta0),
            model.lrt(maxs / sizes, sizes, theta0),
        )
        if maxima is not None:
            maxima[i] = t
        stats[i] = np.max(t - pens)
    if return_scale_maxima:
        return stats, maxima
    return stats


def simulate_null(system, replicates, seed, budget=DEFAULT_CELL_BUDGET):
    """Simulate the Gaussian surrogate null and return a sorted quantile table."""
    if replicates < 100:
        raise DomainError("need at least 100 replicates for a quantile table")
    stats = sample_null_statistics(system, replicates, seed, budget=budget)
    return QuantileTable(meta=system_meta(system, replicates, seed), sample=np.sort(stats))


def simulate_null_tables(system, v_values, replicates, seed, budget=DEFAULT_CELL_BUDGET):
    """Tables for several penalty constants from one noise pass.

    The per-scale maxima are v-free, so each table is bit-identical to a
    separate simulate_null run with the same seed on the same system.
    """
    if replicates < 100:
        raise DomainError("need at least 100 replicates for a quantile table")
    _, maxima = sample_null_statistics(
        system, replicates, seed, return_scale_maxima=True, budget=budget
    )
    ext = np.asarray(enumerate_scales(system), dtype=np.int64)
    sizes = np.prod(ext, axis=1).astype(np.float64)
    tables = {}
    for v in v_values:
        sys_v = system.with_v(v)
        pens = penalty_vector(sys_v.v, sizes, system.n, system.d)
        stats = np.max(maxima - pens, axis=1)
        tables[float(v)] = QuantileTable(
            meta=system_meta(sys_v, replicates, seed), sample=np.sort(stats)
        )
    return tables


def quantile(table, alpha):
    """Conservative empirical (1 - alpha)-quantile: ceil((1-alpha) N)-th order statistic."""
    if not (0.0 < alpha < 1.0):
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    n = table.sample.size
    k = math.ceil((1.0 - alpha) * n)
    return float(table.sample[k - 1])


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def save_table(table, path):
    """Write magic, JSON meta header, then the sorted sample as little-endian f8."""
    meta_blob = json.dumps(table.meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(TABLE_MAGIC)
        fh.write(struct.pack("<I", len(meta_blob)))
        fh.write(meta_blob)
        fh.write(table.sample.astype("<f8").tobytes())


def load_table(path, expected_meta=None, override=False):
    """Read a table; verify meta against ``expected_meta`` unless overridden."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != TABLE_MAGIC:
            raise GridFormatError(f"{path}: bad magic {magic!r}")
        (meta_len,) = struct.unpack("<I", fh.read(4))
        try:
            meta = json.loads(fh.read(meta_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise GridFormatError(f"{path}: unreadable meta header") from exc
        payload = fh.read()
    if len(payload) % 8 != 0:
        raise GridFormatError(f"{path}: truncated sample payload")
    sample = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    if sample.size != int(meta.get("replicates", -1)):
        raise GridFormatError(f"{path}: sample length does not match meta")
    table = QuantileTable(meta=meta, sample=sample)
    if expected_meta is not None:
        bad = [
            k for k in MATCH_KEYS
            if k in expected_meta and meta.get(k) != expected_meta[k]
        ]
        if bad:
            detail = ", ".join(f"{k}: table={meta.get(k)!r} wanted={expected_meta[k]!r}" for k in bad)
            if not override:
                raise CalibrationMismatchError(f"calibration mismatch ({detail})")
            table.warnings.append(f"calibration mismatch overridden ({detail})")
    return table


def export_text_sample(sample, path, header=None):
    """Plain-text sample for inspection: '#' comment lines, one value per line."""
    with open(path, "w", newline="\n") as fh:
        for line in header or []:
            fh.write(f"# {line}\n")
        for x in np.asarray(sample, dtype=np.float64):
            fh.write(f"{float(x)!r}\n")


def load_text_sample(path):
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                values.append(float(line))
    return np.asarray(values, dtype=np.float64)
