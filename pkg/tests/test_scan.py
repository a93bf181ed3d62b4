"""Scan engine: penalties, local sums, backends, and the penalized maximum."""

import math

import numpy as np
import pytest

from mscan import _kernels
from mscan.errors import DomainError
from mscan.families import BernoulliModel, GaussianModel, PoissonModel
from mscan.regions import Region, RegionSystem, enumerate_scales
from mscan.scan import (
    Field,
    gaussian_scan_statistic,
    local_sums_fft,
    local_sums_sat,
    penalty,
    prefix_sums,
    scan_statistic,
)
from oracles import brute_force_scan, loop_local_sums, naive_local_sums


class TestPenalty:
    def test_full_grid(self):
        assert penalty(1.0, 128**2, 128, 2) == pytest.approx(math.sqrt(2), abs=1e-12)

    def test_single_cell(self):
        # direct formula evaluation: sqrt(2 (ln(128^2) + 1))
        expect = math.sqrt(2.0 * (math.log(128.0**2) + 1.0))
        assert penalty(1.0, 1, 128, 2) == pytest.approx(expect, abs=1e-12)
        assert expect == pytest.approx(4.6268911, abs=1e-6)

    def test_scales_with_sqrt_v(self):
        expect = math.sqrt(6.0 * (math.log(128.0**2) + 1.0))
        assert penalty(3.0, 1, 128, 2) == pytest.approx(expect, abs=1e-12)
        assert penalty(3.0, 1, 128, 2) == pytest.approx(math.sqrt(3) * penalty(1.0, 1, 128, 2), rel=1e-12)

    def test_strictly_decreasing(self):
        pens = [penalty(1.0, r, 16, 2) for r in range(1, 16**2 + 1)]
        assert all(b < a for a, b in zip(pens, pens[1:]))

    def test_domain(self):
        with pytest.raises(DomainError):
            penalty(1.0, 17, 4, 1)


class TestLocalSums:
    def test_2x2_total(self):
        f = Field(2, 2, np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert local_sums_sat(f, (2, 2)).tolist() == [[10.0]]

    def test_row_sums(self):
        f = Field(2, 2, np.array([[1.0, 2.0], [3.0, 4.0]]))
        assert local_sums_sat(f, (1, 2)).ravel().tolist() == [3.0, 7.0]

    def test_constant_field(self):
        for d, n in [(1, 6), (2, 5), (3, 4)]:
            f = Field(d, n, np.full((n,) * d, 2.5))
            for e in [(1,) * d, (2,) * d, (n,) * d]:
                sums = local_sums_sat(f, e)
                assert np.allclose(sums, 2.5 * math.prod(e), rtol=1e-12)

    def test_extent_too_large(self):
        f = Field(1, 4, np.zeros(4))
        with pytest.raises(DomainError):
            local_sums_sat(f, (5,))
        with pytest.raises(DomainError):
            local_sums_fft(f, (5,))

    def test_loop_oracle_tiny(self):
        rng = np.random.default_rng(0)
        for d, n in [(1, 5), (2, 4), (3, 3)]:
            values = rng.standard_normal((n,) * d)
            f = Field(d, n, values)
            for extent in [(1,) * d, (2,) * d]:
                expect = loop_local_sums(values, extent)
                assert np.allclose(local_sums_sat(f, extent), expect, rtol=1e-12, atol=1e-12)
                assert np.allclose(local_sums_fft(f, extent), expect, rtol=1e-10, atol=1e-10)

    def test_backend_equivalence_fuzz(self):
        rng = np.random.default_rng(7)
        for d in (1, 2, 3):
            for n in (4, 7, 12, 20, 32):
                for _ in range(5):
                    values = rng.uniform(-1e3, 1e3, size=(n,) * d)
                    f = Field(d, n, values)
                    extent = tuple(int(rng.integers(1, n + 1)) for _ in range(d))
                    sat = local_sums_sat(f, extent)
                    fft = local_sums_fft(f, extent)
                    ref = naive_local_sums(values, extent)
                    scale = np.maximum(np.abs(ref), 1.0)
                    assert np.max(np.abs(sat - ref) / scale) < 1e-8
                    assert np.max(np.abs(fft - ref) / scale) < 1e-8


@pytest.mark.skipif(not _kernels.NUMBA_ENABLED, reason="numba unavailable in this environment")
class TestKernelPaths:
    def test_numba_numpy_bit_identical(self):
        rng = np.random.default_rng(11)
        for d in (1, 2, 3):
            n = {1: 64, 2: 24, 3: 10}[d]
            sides = range(1, n + 1) if d == 1 else range(1, n + 1, 2)
            ext = np.asarray([(h,) * d for h in sides], dtype=np.int64)
            for _ in range(3):
                P = prefix_sums(rng.standard_normal((n,) * d))
                a = _kernels.scale_minmax(P, ext, use_numba=True)
                b = _kernels.scale_minmax(P, ext, use_numba=False)
                for x, y in zip(a, b):
                    assert np.array_equal(x, y)
                a4 = _kernels.scale_minmax_arg(P, ext, use_numba=True)
                b4 = _kernels.scale_minmax_arg(P, ext, use_numba=False)
                for x, y in zip(a4, b4):
                    assert np.array_equal(x, y)

    def test_tie_argmax_is_first(self):
        # constant field: every anchor ties; first (row-major) index must win
        P = prefix_sums(np.ones((5, 5)))
        ext = np.asarray([(2, 2)], dtype=np.int64)
        for flag in (True, False):
            mins, maxs, imins, imaxs = _kernels.scale_minmax_arg(P, ext, use_numba=flag)
            assert imins[0] == 0 and imaxs[0] == 0
            assert mins[0] == maxs[0] == 4.0


def _all_models():
    return [
        (GaussianModel(1.0), 0.0),
        (BernoulliModel(), 0.0),
        (PoissonModel(), 0.0),
    ]


def _random_field(rng, model, theta0, d, n):
    shape = (n,) * d
    return Field(d, n, model.sample(theta0, rng, shape))


class TestScanStatistic:
    def test_zero_field(self):
        sys_ = RegionSystem("cubes", 1, 4, min_size=1, v=1.0)
        res = scan_statistic(Field(1, 4, np.zeros(4)), GaussianModel(1.0), 0.0, sys_)
        assert res.statistic == pytest.approx(-math.sqrt(2), abs=1e-12)
        assert res.argmax == Region((1,), (4,))
        assert res.statistic == max(v for _, v in res.per_scale_max)

    def test_spike_matches_brute_force(self):
        sys_ = RegionSystem("cubes", 1, 4, min_size=1, v=1.0)
        f = Field.from_flat(1, 4, [0.0, 0.0, 10.0, 0.0])
        res = scan_statistic(f, GaussianModel(1.0), 0.0, sys_)
        stat, argmax = brute_force_scan(f, GaussianModel(1.0), 0.0, sys_)
        assert res.statistic == stat
        assert res.argmax == argmax

    def test_poisson_constant_field(self):
        sys_ = RegionSystem("cubes", 2, 5, min_size=1, v=2.0)
        f = Field(2, 5, np.ones((5, 5)))
        res = scan_statistic(f, PoissonModel(), math.log(1.0), sys_)
        assert res.statistic == pytest.approx(-math.sqrt(4.0), abs=1e-12)
        assert res.argmax == Region((1, 1), (5, 5))

    @pytest.mark.parametrize("d,n", [(1, 6), (2, 5)])
    def test_brute_force_fuzz(self, d, n):
        rng = np.random.default_rng(100 + 10 * d + n)
        for model, theta0 in _all_models():
            sys_ = RegionSystem("cubes", d, n, min_size=1, v=1.0)
            for _ in range(20):
                f = _random_field(rng, model, theta0, d, n)
                res = scan_statistic(f, model, theta0, sys_)
                stat, argmax = brute_force_scan(f, model, theta0, sys_)
                assert res.statistic == stat, (model.name, f.values)
                assert res.argmax == argmax, (model.name, f.values)

    def test_rect_system_matches_brute_force(self):
        rng = np.random.default_rng(5)
        sys_ = RegionSystem("rects", 2, 4, min_size=2, v=3.0)
        for _ in range(10):
            f = Field(2, 4, rng.standard_normal((4, 4)))
            res = scan_statistic(f, GaussianModel(1.0), 0.0, sys_)
            stat, argmax = brute_force_scan(f, GaussianModel(1.0), 0.0, sys_)
            assert res.statistic == stat
            assert res.argmax == argmax

    def test_fft_backend_agrees(self):
        rng = np.random.default_rng(6)
        sys_ = RegionSystem("cubes", 2, 8, min_size=1, v=1.0)
        for _ in range(10):
            f = Field(2, 8, rng.standard_normal((8, 8)))
            sat = scan_statistic(f, GaussianModel(1.0), 0.0, sys_, backend="sat")
            fft = scan_statistic(f, GaussianModel(1.0), 0.0, sys_, backend="fft")
            assert fft.statistic == pytest.approx(sat.statistic, rel=1e-10, abs=1e-10)
            assert fft.argmax == sat.argmax

    def test_gaussian_reflection_invariance(self):
        rng = np.random.default_rng(8)
        sys_ = RegionSystem("cubes", 2, 6, min_size=1, v=1.0)
        f = Field(2, 6, rng.standard_normal((6, 6)))
        g = Field(2, 6, -f.values)
        a = scan_statistic(f, GaussianModel(1.0), 0.0, sys_)
        b = scan_statistic(g, GaussianModel(1.0), 0.0, sys_)
        assert a.statistic == b.statistic

    def test_translation_equivariance(self):
        rng = np.random.default_rng(9)
        pattern = rng.standard_normal((3, 3)) + 3.0
        sys_ = RegionSystem("cubes", 2, 12, min_size=1, v=1.0)
        results = []
        for shift in [(0, 0), (2, 5), (7, 1)]:
            values = np.zeros((12, 12))
            values[shift[0] : shift[0] + 3, shift[1] : shift[1] + 3] = pattern
            results.append((shift, scan_statistic(Field(2, 12, values), GaussianModel(1.0), 0.0, sys_)))
        (s0, r0) = results[0]
        for shift, res in results[1:]:
            assert res.statistic == r0.statistic
            assert tuple(a - b for a, b in zip(res.argmax.anchor, r0.argmax.anchor)) == shift
            assert res.argmax.extent == r0.argmax.extent

    def test_v_monotonicity(self):
        rng = np.random.default_rng(10)
        f = Field(2, 8, rng.standard_normal((8, 8)))
        base = RegionSystem("cubes", 2, 8, min_size=1, v=1.0)
        s1 = scan_statistic(f, GaussianModel(1.0), 0.0, base).statistic
        s3 = scan_statistic(f, GaussianModel(1.0), 0.0, base.with_v(3.0)).statistic
        assert s3 <= s1

    def test_gaussian_surrogate_is_gaussian_scan(self):
        rng = np.random.default_rng(12)
        sys_ = RegionSystem("cubes", 2, 7, min_size=1, v=1.0)
        noise = Field(2, 7, rng.standard_normal((7, 7)))
        a = gaussian_scan_statistic(noise, sys_)
        b = scan_statistic(noise, GaussianModel(1.0), 0.0, sys_)
        assert a.statistic == b.statistic
        assert a.argmax == b.argmax
        # all-zero noise: -sqrt(2v) at the full grid
        z = gaussian_scan_statistic(Field(2, 7, np.zeros((7, 7))), sys_)
        assert z.statistic == pytest.approx(-math.sqrt(2.0), abs=1e-12)

    def test_d1_gaussian_brute_force(self):
        rng = np.random.default_rng(13)
        sys_ = RegionSystem("cubes", 1, 3, min_size=1, v=1.0)
        noise = Field(1, 3, rng.standard_normal(3))
        res = gaussian_scan_statistic(noise, sys_)
        stat, argmax = brute_force_scan(noise, GaussianModel(1.0), 0.0, sys_)
        assert res.statistic == stat and res.argmax == argmax

    def test_dimension_mismatch(self):
        sys_ = RegionSystem("cubes", 2, 8)
        with pytest.raises(DomainError):
            scan_statistic(Field(2, 4, np.zeros((4, 4))), GaussianModel(1.0), 0.0, sys_)


class TestField:
    def test_validation(self):
        with pytest.raises(DomainError):
            Field(1, 4, np.zeros(5))
        with pytest.raises(DomainError):
            Field(1, 4, np.array([0.0, np.nan, 0.0, 0.0]))
        with pytest.raises(DomainError):
            Field.from_flat(2, 3, np.zeros(8))

    def test_checksum_changes_with_content(self):
        a = Field(1, 4, np.zeros(4))
        b = Field(1, 4, np.array([0.0, 0.0, 0.0, 1.0]))
        assert a.checksum() != b.checksum()
        assert a.checksum() == Field(1, 4, np.zeros(4)).checksum()
        assert a.checksum().startswith("sha256:")

    def test_flat_round_trip(self):
        f = Field.from_flat(2, 3, np.arange(9.0))
        assert f.flat.tolist() == list(np.arange(9.0))
