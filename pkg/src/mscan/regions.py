"""Candidate-region systems: axis-aligned boxes on a d-dimensional grid.

A :class:`RegionSystem` describes the family of boxes to scan: hypercubes
("cubes") or hyperrectangles ("rects") on the grid {1,...,n}^d, restricted to
regions of at least ``min_size`` grid points, together with the complexity
constant ``v`` that drives the scale penalty.  Enumeration order is fixed and
deterministic: extents ascend by (size, extent tuple); anchors within a scale
are row-major (last axis fastest).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

from .errors import DomainError, EmptyRegionError, EmptyScaleSetError, RegionCapError

__all__ = [
    "Region",
    "RegionSystem",
    "recommended_v",
    "vc_v",
    "v_table",
    "enumerate_scales",
    "count_regions",
    "discretize",
]

KINDS = ("cubes", "rects")

# Hyperrectangle enumeration is O(n^{2d}) regions; refuse to enumerate past
# this many regions unless the caller raises the cap explicitly.
DEFAULT_REGION_CAP = 1 << 26


def recommended_v(kind, d, eps=0.0):
    """Smallest recommended complexity constant for a region family.

    Hypercubes admit v = 1 in every dimension; hyperrectangles need
    v > 2d - 1 (pass ``eps`` to stay strictly above); halfspaces admit v = 2.
    Halfspaces carry no box structure and are not scannable by this engine;
    their constant is provided for external use only.
    """
    if d < 1:
        raise DomainError("dimension must be >= 1")
    if kind == "cubes":
        return 1.0
    if kind == "rects":
        return 2.0 * d - 1.0 + float(eps)
    if kind == "halfspaces":
        return 2.0
    raise DomainError(f"unknown region kind {kind!r}")


def vc_v(kind, d):
    """VC-dimension-based alternative calibration (heavier than recommended_v)."""
    if d < 1:
        raise DomainError("dimension must be >= 1")
    if kind == "cubes":
        return float((3 * d + 1) // 2)
    if kind == "rects":
        return float(2 * d)
    if kind == "halfspaces":
        return float(d + 1)
    raise DomainError(f"unknown region kind {kind!r}")


def v_table(d, eps=0.0):
    """Recommended v per family at dimension d."""
    return {kind: recommended_v(kind, d, eps) for kind in ("cubes", "rects", "halfspaces")}


@dataclass(frozen=True)
class Region:
    """Axis-aligned box: 1-based anchor corner plus per-axis extents."""

    anchor: tuple
    extent: tuple

    def __post_init__(self):
        anchor = tuple(int(a) for a in self.anchor)
        extent = tuple(int(e) for e in self.extent)
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "extent", extent)
        if len(anchor) != len(extent):
            raise DomainError("anchor and extent must have the same dimension")
        if any(a < 1 for a in anchor) or any(e < 1 for e in extent):
            raise DomainError("anchor coordinates and extents must be >= 1")

    @property
    def d(self):
        return len(self.anchor)

    @property
    def size(self):
        return math.prod(self.extent)

    def fits(self, n):
        return all(a + e - 1 <= n for a, e in zip(self.anchor, self.extent))

    def slices(self):
        """0-based numpy slices for this region."""
        return tuple(slice(a - 1, a - 1 + e) for a, e in zip(self.anchor, self.extent))

    def contains(self, other):
        return all(
            sa <= oa and oa + oe <= sa + se
            for sa, se, oa, oe in zip(self.anchor, self.extent, other.anchor, other.extent)
        )


@dataclass(frozen=True)
class RegionSystem:
    """Scannable family of boxes with its penalty constant and scale policy.

    ``scale_policy`` is "all", "dyadic", or an explicit sequence of extents
    (ints for cubes, int tuples for rects).  ``min_size`` defaults to 2**d,
    i.e. side length at least 2 per axis for cubes.
    """

    kind: str
    d: int
    n: int
    min_size: int = None
    v: float = None
    scale_policy: object = "all"
    max_regions: int = field(default=DEFAULT_REGION_CAP, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.d < 1:
            raise DomainError("dimension must be >= 1")
        if self.n < 2:
            raise DomainError("side length n must be >= 2")
        if self.min_size is None:
            object.__setattr__(self, "min_size", min(2**self.d, self.n**self.d))
        object.__setattr__(self, "min_size", int(self.min_size))
        if self.min_size < 1:
            raise DomainError("min_size must be >= 1")
        if self.min_size > self.n**self.d:
            raise EmptyScaleSetError(
                f"empty scale set: min_size {self.min_size} exceeds grid size {self.n**self.d}"
            )
        if self.v is None:
            object.__setattr__(self, "v", recommended_v(self.kind, self.d))
        object.__setattr__(self, "v", float(self.v))
        if not (self.v > 0.0):
            raise DomainError("v must be positive")
        if isinstance(self.scale_policy, str):
            if self.scale_policy not in ("all", "dyadic"):
                raise DomainError(f"unknown scale policy {self.scale_policy!r}")
        else:
            extents = sorted(
                {self._normalize_extent(e) for e in self.scale_policy},
                key=lambda e: (math.prod(e), e),
            )
            object.__setattr__(self, "scale_policy", tuple(extents))

    def _normalize_extent(self, e):
        if isinstance(e, int):
            e = (e,) * self.d
        e = tuple(int(x) for x in e)
        if len(e) != self.d:
            raise DomainError(f"extent {e} does not match dimension {self.d}")
        if self.kind == "cubes" and len(set(e)) != 1:
            raise DomainError(f"cube extents must be equal-sided, got {e}")
        if any(x < 1 or x > self.n for x in e):
            raise DomainError(f"extent {e} does not fit in the grid (n={self.n})")
        if math.prod(e) < self.min_size:
            raise DomainError(f"extent {e} is below min_size {self.min_size}")
        return e

    def with_v(self, v):
        return RegionSystem(self.kind, self.d, self.n, self.min_size, float(v), self.scale_policy, self.max_regions)

    def policy_string(self):
        if isinstance(self.scale_policy, str):
            return self.scale_policy
        parts = []
        for e in self.scale_policy:
            parts.append(str(e[0]) if len(set(e)) == 1 else "x".join(str(x) for x in e))
        return "explicit:" + ",".join(parts)


def _smallest_cube_side(min_size, d):
    h = max(1, int(math.ceil(min_size ** (1.0 / d))))
    while h**d < min_size:
        h += 1
    while h > 1 and (h - 1) ** d >= min_size:
        h -= 1
    return h


def _iter_rect_extents(system):
    n, d = system.n, system.d
    for e in itertools.product(range(1, n + 1), repeat=d):
        if math.prod(e) >= system.min_size:
            yield e


def enumerate_scales(system):
    """All admissible extents of the system, sorted ascending by (size, extent)."""
    n, d = system.n, system.d
    policy = system.scale_policy
    if not isinstance(policy, str):
        extents = sorted(set(policy), key=lambda e: (math.prod(e), e))
    elif system.kind == "cubes":
        if policy == "all":
            sides = range(_smallest_cube_side(system.min_size, d), n + 1)
        else:  # dyadic
            sides = [h for h in (2**k for k in range(n.bit_length())) if h <= n and h**d >= system.min_size]
        extents = [(h,) * d for h in sides]
    else:
        if policy == "all":
            candidates = _iter_rect_extents(system)
        else:  # dyadic
            axis = [2**k for k in range(n.bit_length()) if 2**k <= n]
            candidates = (e for e in itertools.product(axis, repeat=d) if math.prod(e) >= system.min_size)
        extents = []
        total = 0
        for e in candidates:
            total += math.prod(n - x + 1 for x in e)
            if total > system.max_regions:
                raise RegionCapError(
                    f"rect enumeration exceeds max_regions={system.max_regions}; "
                    "raise the cap or restrict the scale policy"
                )
            extents.append(e)
        extents.sort(key=lambda e: (math.prod(e), e))
    if not extents:
        raise EmptyScaleSetError(
            f"empty scale set: no admissible extent for n={n}, d={d}, "
            f"min_size={system.min_size}, policy={system.policy_string()}"
        )
    return extents


def count_regions(system):
    """Exact number of enumerated regions: sum over extents of anchor counts."""
    n = system.n
    return sum(math.prod(n - x + 1 for x in e) for e in enumerate_scales(system))


def discretize(lower, upper, n):
    """Grid trace of the continuum box [lower, upper] in [0,1]^d at resolution n.

    Returns the region of grid points i with lower_k <= i_k / n <= upper_k for
    every axis (closed convention).  Raises EmptyRegionError when no grid
    point falls inside.
    """
    lo = tuple(float(x) for x in lower)
    hi = tuple(float(x) for x in upper)
    if len(lo) != len(hi):
        raise DomainError("lower and upper must have the same dimension")
    if any(not (0.0 <= a <= b <= 1.0) for a, b in zip(lo, hi)):
        raise DomainError("need 0 <= lower <= upper <= 1 componentwise")
    anchor = []
    extent = []
    for a, b in zip(lo, hi):
        first = max(1, int(math.ceil(n * a)))
        last = min(n, int(math.floor(n * b)))
        if first > last:
            raise EmptyRegionError(f"no grid point with {a} <= i/{n} <= {b}")
        anchor.append(first)
        extent.append(last - first + 1)
    return Region(tuple(anchor), tuple(extent))
