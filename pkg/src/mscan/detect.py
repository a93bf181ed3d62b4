"""The multiple test: threshold penalized local statistics at a calibrated quantile.

A region is significant when its penalized local statistic exceeds the
(1 - alpha)-quantile of the Gaussian surrogate.  Mode "all" reports every
significant region (the object carrying the family-wise error guarantee);
mode "local-maxima" prunes regions that are contained in a significant region
with a strictly larger penalized value, as a readable summary.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .calibrate import MATCH_KEYS, quantile, system_meta
from .errors import CalibrationMismatchError, DomainError, GridFormatError
from .regions import Region, enumerate_scales
from .scan import Field, penalty, prefix_sums

__all__ = ["Detection", "DetectionReport", "detect", "fwer_semantics_check"]

MODES = ("all", "local-maxima")


@dataclass(frozen=True)
class Detection:
    region: Region
    stat: float
    penalized: float
    margin: float


@dataclass
class DetectionReport:
    alpha: float
    q: float
    mode: str
    statistic: float
    significant: list
    provenance: dict = field(default_factory=dict)

    @property
    def detected(self):
        return len(self.significant) > 0

    def to_json(self):
        doc = {
            "alpha": self.alpha,
            "q": self.q,
            "mode": self.mode,
            "statistic": self.statistic,
            "detected": self.detected,
            "regions": [
                {
                    "anchor": list(s.region.anchor),
                    "extent": list(s.region.extent),
                    "stat": s.stat,
                    "penalized": s.penalized,
                    "margin": s.margin,
                }
                for s in self.significant
            ],
            "provenance": self.provenance,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
            significant = [
                Detection(
                    region=Region(tuple(r["anchor"]), tuple(r["extent"])),
                    stat=float(r["stat"]),
                    penalized=float(r["penalized"]),
                    margin=float(r["margin"]),
                )
                for r in doc["regions"]
            ]
            return cls(
                alpha=float(doc["alpha"]),
                q=float(doc["q"]),
                mode=doc["mode"],
                statistic=float(doc["statistic"]),
                significant=significant,
                provenance=doc.get("provenance", {}),
            )
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise GridFormatError("malformed detection report") from exc


def _check_table(system, field_, table, allow_mismatch):
    expected = system_meta(system, table.meta.get("replicates", 0), table.meta.get("seed", 0))
    bad = [k for k in MATCH_KEYS if table.meta.get(k) != expected[k]]
    if field_.n != system.n or field_.d != system.d:
        raise DomainError("field dimensions do not match the region system")
    if bad:
        detail = ", ".join(f"{k}: table={table.meta.get(k)!r} wanted={expected[k]!r}" for k in bad)
        if not allow_mismatch:
            raise CalibrationMismatchError(f"calibration mismatch ({detail})")
        return [f"calibration mismatch overridden ({detail})"]
    return []


def _prune_local_maxima(entries):
    kept = []
    for e in entries:
        dominated = any(
            o is not e and o.region.contains(e.region) and o.penalized > e.penalized
            for o in entries
        )
        if not dominated:
            kept.append(e)
    return kept


def detect(field_, model, theta0, system, table, alpha, mode="all", allow_mismatch=False):
    """Report every region whose penalized statistic exceeds the calibrated quantile."""
    if mode not in MODES:
        raise DomainError(f"mode must be one of {MODES}, got {mode!r}")
    warnings = _check_table(system, field_, table, allow_mismatch)
    q = quantile(table, alpha)

    P = prefix_sums(field_.values)
    n, d = field_.n, field_.d
    statistic = -np.inf
    entries = []
    for extent in enumerate_scales(system):
        size = int(np.prod(extent))
        pen = penalty(system.v, size, n, d)
        sums = _kernels.box_sums_from_prefix(P, extent)
        t = model.lrt(sums / size, float(size), theta0)
        penalized = t - pen
        top = float(np.max(penalized))
        if top > statistic:
            statistic = top
        hits = np.flatnonzero(penalized.ravel() > q)
        for flat in hits:
            anchor0 = np.unravel_index(int(flat), sums.shape)
            entries.append(
                Detection(
                    region=Region(tuple(int(a) + 1 for a in anchor0), tuple(extent)),
                    stat=float(t.ravel()[flat]),
                    penalized=float(penalized.ravel()[flat]),
                    margin=float(penalized.ravel()[flat] - q),
                )
            )
    if mode == "local-maxima":
        entries = _prune_local_maxima(entries)
    provenance = {"table": dict(table.meta), "field_checksum": field_.checksum()}
    if warnings or table.warnings:
        provenance["warnings"] = list(warnings) + list(table.warnings)
    return DetectionReport(
        alpha=float(alpha),
        q=q,
        mode=mode,
        statistic=float(statistic),
        significant=entries,
        provenance=provenance,
    )


def fwer_semantics_check(report, truth):
    """True iff every significant region intersects the anomalous cell set.

    ``truth`` is a boolean mask over the grid (shape (n,)*d).  Used by
    simulation harnesses: under a global null, any detection is a family-wise
    error; under a partial alternative, only detections disjoint from the
    truth count as errors.
    """
    truth = np.asarray(truth, dtype=bool)
    for s in report.significant:
        if not np.any(truth[s.region.slices()]):
            return False
    return True
