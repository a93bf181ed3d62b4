"""Hot per-scale reduction kernels over summed-area tables.

Given the zero-padded prefix-sum array ``P`` of a field (shape (n+1,)*d) and a
batch of box extents, these kernels return, per extent, the minimum and
maximum box sum over all valid anchors, optionally with the first anchor
(row-major) attaining each extremum.  They are the inner loop of every scan
and of the Monte-Carlo calibration.

Two implementations are provided: numba ``@njit`` kernels for d <= 3 and a
pure-NumPy fallback for any d.  The fallback is selected automatically when
numba is unavailable, or forced with the environment variable
``MSCAN_DISABLE_NUMBA=1``.  Both paths use the same corner inclusion-exclusion
expression in the same association order, so results are bit-identical and
independent of the thread count.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "NUMBA_ENABLED",
    "scale_minmax",
    "scale_minmax_arg",
    "box_sums_from_prefix",
    "set_threads",
]

_DISABLE = os.environ.get("MSCAN_DISABLE_NUMBA", "").strip() not in ("", "0")

try:
    if _DISABLE:
        raise ImportError("numba disabled via MSCAN_DISABLE_NUMBA")
    import numba
    from numba import njit, prange

    NUMBA_ENABLED = True
except ImportError:  # pragma: no cover - exercised via MSCAN_DISABLE_NUMBA
    numba = None
    NUMBA_ENABLED = False


def set_threads(k):
    """Cap kernel parallelism; results do not depend on the cap."""
    if NUMBA_ENABLED and k is not None:
        numba.set_num_threads(max(1, min(int(k), numba.config.NUMBA_NUM_THREADS)))


def box_sums_from_prefix(P, extent):
    """Box sums over all valid anchors from a padded prefix array.

    Corner terms are combined in binary-counting order (all-high corner
    first, low side on the last axis toggling fastest), matching the numba
    kernels bit-for-bit.
    """
    d = P.ndim
    extent = tuple(int(e) for e in extent)
    out_shape = tuple(P.shape[k] - extent[k] for k in range(d))
    if any(m < 1 for m in out_shape):
        raise ValueError(f"extent {extent} does not fit in the grid")
    out = None
    for mask in range(2**d):
        sl = []
        for axis in range(d):
            low = (mask >> (d - 1 - axis)) & 1
            start = 0 if low else extent[axis]
            sl.append(slice(start, start + out_shape[axis]))
        term = P[tuple(sl)]
        if out is None:
            out = term.copy()
        elif bin(mask).count("1") % 2:
            out -= term
        else:
            out += term
    return out


# ---------------------------------------------------------------------------
# NumPy fallback
# ---------------------------------------------------------------------------


def _scale_minmax_numpy(P, extents):
    m = extents.shape[0]
    mins = np.empty(m)
    maxs = np.empty(m)
    for j in range(m):
        sums = box_sums_from_prefix(P, extents[j])
        mins[j] = sums.min()
        maxs[j] = sums.max()
    return mins, maxs


def _scale_minmax_arg_numpy(P, extents):
    m = extents.shape[0]
    mins = np.empty(m)
    maxs = np.empty(m)
    imins = np.empty(m, dtype=np.int64)
    imaxs = np.empty(m, dtype=np.int64)
    for j in range(m):
        sums = box_sums_from_prefix(P, extents[j])
        imins[j] = np.argmin(sums)
        imaxs[j] = np.argmax(sums)
        mins[j] = sums.flat[imins[j]]
        maxs[j] = sums.flat[imaxs[j]]
    return mins, maxs, imins, imaxs


# ---------------------------------------------------------------------------
# Numba kernels, d = 1, 2, 3
# ---------------------------------------------------------------------------

if NUMBA_ENABLED:

    # The values-only kernels below split the min/max accumulators four ways to
    # break the loop-carried dependency; min/max are exact, so the result is
    # bit-identical to the sequential scan.  fastmath is enabled only where
    # the box sum is a single subtraction (nothing to reassociate).

    @njit(cache=True, nogil=True, parallel=True, fastmath=True)
    def _minmax_1d(P, extents, mins, maxs):
        n0 = P.shape[0] - 1
        for j in prange(extents.shape[0]):
            h0 = extents[j, 0]
            m = n0 - h0 + 1
            lo0 = np.inf
            lo1 = np.inf
            lo2 = np.inf
            lo3 = np.inf
            hi0 = -np.inf
            hi1 = -np.inf
            hi2 = -np.inf
            hi3 = -np.inf
            a = 0
            while a + 4 <= m:
                s0 = P[a + h0] - P[a]
                s1 = P[a + 1 + h0] - P[a + 1]
                s2 = P[a + 2 + h0] - P[a + 2]
                s3 = P[a + 3 + h0] - P[a + 3]
                lo0 = min(lo0, s0)
                hi0 = max(hi0, s0)
                lo1 = min(lo1, s1)
                hi1 = max(hi1, s1)
                lo2 = min(lo2, s2)
                hi2 = max(hi2, s2)
                lo3 = min(lo3, s3)
                hi3 = max(hi3, s3)
                a += 4
            lo = min(min(lo0, lo1), min(lo2, lo3))
            hi = max(max(hi0, hi1), max(hi2, hi3))
            while a < m:
                s = P[a + h0] - P[a]
                lo = min(lo, s)
                hi = max(hi, s)
                a += 1
            mins[j] = lo
            maxs[j] = hi

    @njit(cache=True, nogil=True, parallel=True)
    def _minmax_2d(P, extents, mins, maxs):
        n0 = P.shape[0] - 1
        n1 = P.shape[1] - 1
        for j in prange(extents.shape[0]):
            h0 = extents[j, 0]
            h1 = extents[j, 1]
            m1 = n1 - h1 + 1
            lo0 = np.inf
            lo1 = np.inf
            lo2 = np.inf
            lo3 = np.inf
            hi0 = -np.inf
            hi1 = -np.inf
            hi2 = -np.inf
            hi3 = -np.inf
            for a in range(n0 - h0 + 1):
                rA = P[a + h0]
                rB = P[a]
                b = 0
                while b + 4 <= m1:
                    s0 = rA[b + h1] - rA[b] - rB[b + h1] + rB[b]
                    s1 = rA[b + 1 + h1] - rA[b + 1] - rB[b + 1 + h1] + rB[b + 1]
                    s2 = rA[b + 2 + h1] - rA[b + 2] - rB[b + 2 + h1] + rB[b + 2]
                    s3 = rA[b + 3 + h1] - rA[b + 3] - rB[b + 3 + h1] + rB[b + 3]
                    lo0 = min(lo0, s0)
                    hi0 = max(hi0, s0)
                    lo1 = min(lo1, s1)
                    hi1 = max(hi1, s1)
                    lo2 = min(lo2, s2)
                    hi2 = max(hi2, s2)
                    lo3 = min(lo3, s3)
                    hi3 = max(hi3, s3)
                    b += 4
                while b < m1:
                    s = rA[b + h1] - rA[b] - rB[b + h1] + rB[b]
                    lo0 = min(lo0, s)
                    hi0 = max(hi0, s)
                    b += 1
            mins[j] = min(min(lo0, lo1), min(lo2, lo3))
            maxs[j] = max(max(hi0, hi1), max(hi2, hi3))

    @njit(cache=True, nogil=True, parallel=True)
    def _minmax_3d(P, extents, mins, maxs):
        n0 = P.shape[0] - 1
        n1 = P.shape[1] - 1
        n2 = P.shape[2] - 1
        for j in prange(extents.shape[0]):
            h0 = extents[j, 0]
            h1 = extents[j, 1]
            h2 = extents[j, 2]
            lo = np.inf
            hi = -np.inf
            for a in range(n0 - h0 + 1):
                for b in range(n1 - h1 + 1):
                    for c in range(n2 - h2 + 1):
                        s = (
                            P[a + h0, b + h1, c + h2]
                            - P[a + h0, b + h1, c]
                            - P[a + h0, b, c + h2]
                            + P[a + h0, b, c]
                            - P[a, b + h1, c + h2]
                            + P[a, b + h1, c]
                            + P[a, b, c + h2]
                            - P[a, b, c]
                        )
                        if s < lo:
                            lo = s
                        if s > hi:
                            hi = s
            mins[j] = lo
            maxs[j] = hi

    @njit(cache=True, nogil=True, parallel=True)
    def _minmax_arg_1d(P, extents, mins, maxs, imins, imaxs):
        n0 = P.shape[0] - 1
        for j in prange(extents.shape[0]):
            h0 = extents[j, 0]
            lo = np.inf
            hi = -np.inf
            ilo = 0
            ihi = 0
            for a in range(n0 - h0 + 1):
                s = P[a + h0] - P[a]
                if s < lo:
                    lo = s
                    ilo = a
                if s > hi:
                    hi = s
                    ihi = a
            mins[j] = lo
            maxs[j] = hi
            imins[j] = ilo
            imaxs[j] = ihi

    @njit(cache=True, nogil=True, parallel=True)
    def _minmax_arg_2d(P, extents, mins, maxs, imins, imaxs):
        n0 = P.shape[0] - 1
        n1 = P.shape[1] - 1
        for j in prange(extents.shape[0]):
            h0 = extents[j, 0]
            h1 = extents[j, 1]
            m1 = n1 - h1 + 1
            lo = np.inf
            hi = -np.inf
            ilo = 0
            ihi = 0
            idx = 0
            for a in range(n0 - h0 + 1):
                for b in range(m1):
                    s = P[a + h0, b + h1] - P[a + h0, b] - P[a, b + h1] + P[a, b]
                    if s < lo:
                        lo = s
                        ilo = idx
                    if s > hi:
                        hi = s
                        ihi = idx
                    idx += 1
            mins[j] = lo
            maxs[j] = hi
            imins[j] = ilo
            imaxs[j] = ihi

    @njit(cache=True, nogil=True, parallel=True)
    def _minmax_arg_3d(P, extents, mins, maxs, imins, imaxs):
        n0 = P.shape[0] - 1
        n1 = P.shape[1] - 1
        n2 = P.shape[2] - 1
        for j in prange(extents.shape[0]):
            h0 = extents[j, 0]
            h1 = extents[j, 1]
            h2 = extents[j, 2]
            m1 = n1 - h1 + 1
            m2 = n2 - h2 + 1
            lo = np.inf
            hi = -np.inf
            ilo = 0
            ihi = 0
            idx = 0
            for a in range(n0 - h0 + 1):
                for b in range(m1):
                    for c in range(m2):
                        s = (
                            P[a + h0, b + h1, c + h2]
                            - P[a + h0, b + h1, c]
                            - P[a + h0, b, c + h2]
                            + P[a + h0, b, c]
                            - P[a, b + h1, c + h2]
                            + P[a, b + h1, c]
                            + P[a, b, c + h2]
                            - P[a, b, c]
                        )
                        if s < lo:
                            lo = s
                            ilo = idx
                        if s > hi:
                            hi = s
                            ihi = idx
                        idx += 1
            mins[j] = lo
            maxs[j] = hi
            imins[j] = ilo
            imaxs[j] = ihi

    _MINMAX = {1: _minmax_1d, 2: _minmax_2d, 3: _minmax_3d}
    _MINMAX_ARG = {1: _minmax_arg_1d, 2: _minmax_arg_2d, 3: _minmax_arg_3d}
else:
    _MINMAX = {}
    _MINMAX_ARG = {}


def _prep(P, extents):
    P = np.ascontiguousarray(P, dtype=np.float64)
    extents = np.ascontiguousarray(np.atleast_2d(np.asarray(extents, dtype=np.int64)))
    if extents.shape[1] != P.ndim:
        raise ValueError("extents do not match the array dimension")
    return P, extents


def scale_minmax(P, extents, use_numba=None):
    """Per-extent (min, max) of box sums over valid anchors."""
    P, extents = _prep(P, extents)
    use = NUMBA_ENABLED if use_numba is None else use_numba
    if use and not NUMBA_ENABLED:
        raise RuntimeError("numba path requested but numba is unavailable")
    kern = _MINMAX.get(P.ndim) if use else None
    if kern is None:
        return _scale_minmax_numpy(P, extents)
    m = extents.shape[0]
    mins = np.empty(m)
    maxs = np.empty(m)
    kern(P, extents, mins, maxs)
    return mins, maxs


def scale_minmax_arg(P, extents, use_numba=None):
    """As scale_minmax, plus first row-major anchor index of each extremum."""
    P, extents = _prep(P, extents)
    use = NUMBA_ENABLED if use_numba is None else use_numba
    if use and not NUMBA_ENABLED:
        raise RuntimeError("numba path requested but numba is unavailable")
    kern = _MINMAX_ARG.get(P.ndim) if use else None
    if kern is None:
        return _scale_minmax_arg_numpy(P, extents)
    m = extents.shape[0]
    mins = np.empty(m)
    maxs = np.empty(m)
    imins = np.empty(m, dtype=np.int64)
    imaxs = np.empty(m, dtype=np.int64)
    kern(P, extents, mins, maxs, imins, imaxs)
    return mins, maxs, imins, imaxs
