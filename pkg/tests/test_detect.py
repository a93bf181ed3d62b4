"""Detection reports: thresholding, modes, FWER harness, serialization."""

import numpy as np
import pytest

from mscan.calibrate import quantile, simulate_null
from mscan.detect import DetectionReport, detect, fwer_semantics_check
from mscan.errors import CalibrationMismatchError, DomainError, GridFormatError
from mscan.families import GaussianModel
from mscan.regions import Region, RegionSystem
from mscan.scan import Field, scan_statistic


@pytest.fixture(scope="module")
def setup16():
    sys_ = RegionSystem("cubes", 1, 16, min_size=1, v=1.0)
    table = simulate_null(sys_, 2000, seed=21)
    return sys_, table


def spike_field():
    values = np.zeros(16)
    values[4:8] = 100.0  # grid points 5..8
    return Field(1, 16, values)


class TestDetect:
    def test_zero_field_empty(self, setup16):
        sys_, table = setup16
        report = detect(Field(1, 16, np.zeros(16)), GaussianModel(1.0), 0.0, sys_, table, 0.1)
        assert not report.detected
        assert report.significant == []
        assert report.statistic < report.q

    def test_huge_spike_found(self, setup16):
        sys_, table = setup16
        report = detect(spike_field(), GaussianModel(1.0), 0.0, sys_, table, 0.1)
        assert report.detected
        truth = np.zeros(16, dtype=bool)
        truth[4:8] = True
        overlapping = [s for s in report.significant if np.any(truth[s.region.slices()])]
        assert overlapping, "expected a region overlapping the planted block"
        # the brute-force maximum overlaps the block as well
        top = max(report.significant, key=lambda s: s.penalized)
        assert np.any(truth[top.region.slices()])

    def test_margins_and_threshold(self, setup16):
        sys_, table = setup16
        report = detect(spike_field(), GaussianModel(1.0), 0.0, sys_, table, 0.1)
        for s in report.significant:
            assert s.penalized > report.q
            assert s.margin == pytest.approx(s.penalized - report.q, abs=1e-12)

    def test_alpha_monotone(self, setup16):
        sys_, table = setup16
        rng = np.random.default_rng(3)
        field = Field(1, 16, rng.standard_normal(16) + 0.8)
        r_small = detect(field, GaussianModel(1.0), 0.0, sys_, table, 0.02)
        r_large = detect(field, GaussianModel(1.0), 0.0, sys_, table, 0.2)
        keys_small = {(s.region.anchor, s.region.extent) for s in r_small.significant}
        keys_large = {(s.region.anchor, s.region.extent) for s in r_large.significant}
        assert keys_small <= keys_large

    def test_nonempty_iff_statistic_exceeds(self, setup16):
        sys_, table = setup16
        q = quantile(table, 0.1)
        rng = np.random.default_rng(4)
        for _ in range(20):
            field = Field(1, 16, rng.standard_normal(16) + rng.uniform(0, 1.2))
            report = detect(field, GaussianModel(1.0), 0.0, sys_, table, 0.1)
            full = scan_statistic(field, GaussianModel(1.0), 0.0, sys_)
            assert report.detected == (full.statistic > q)
            assert report.statistic == pytest.approx(full.statistic, rel=1e-12, abs=1e-12)

    def test_local_maxima_mode(self, setup16):
        sys_, table = setup16
        report_all = detect(spike_field(), GaussianModel(1.0), 0.0, sys_, table, 0.1, mode="all")
        report_lm = detect(spike_field(), GaussianModel(1.0), 0.0, sys_, table, 0.1, mode="local-maxima")
        keys_all = {(s.region.anchor, s.region.extent) for s in report_all.significant}
        keys_lm = {(s.region.anchor, s.region.extent) for s in report_lm.significant}
        assert keys_lm <= keys_all
        assert len(report_lm.significant) >= 1
        # antichain: no listed region is contained in a listed region with a
        # strictly larger penalized value
        for a in report_lm.significant:
            for b in report_lm.significant:
                if a is not b and b.region.contains(a.region):
                    assert b.penalized <= a.penalized

    def test_mismatch_guard(self, setup16):
        sys_, table = setup16
        other = RegionSystem("cubes", 1, 16, min_size=1, v=3.0)
        with pytest.raises(CalibrationMismatchError):
            detect(spike_field(), GaussianModel(1.0), 0.0, other, table, 0.1)
        report = detect(
            spike_field(), GaussianModel(1.0), 0.0, other, table, 0.1, allow_mismatch=True
        )
        assert any("mismatch" in w for w in report.provenance["warnings"])

    def test_bad_mode(self, setup16):
        sys_, table = setup16
        with pytest.raises(DomainError):
            detect(spike_field(), GaussianModel(1.0), 0.0, sys_, table, 0.1, mode="best")

    def test_provenance(self, setup16):
        sys_, table = setup16
        field = spike_field()
        report = detect(field, GaussianModel(1.0), 0.0, sys_, table, 0.1)
        assert report.provenance["field_checksum"] == field.checksum()
        assert report.provenance["table"]["n"] == 16


class TestFwerSemantics:
    def test_empty_report_ok(self, setup16):
        sys_, table = setup16
        report = detect(Field(1, 16, np.zeros(16)), GaussianModel(1.0), 0.0, sys_, table, 0.1)
        truth = np.zeros(16, dtype=bool)
        assert fwer_semantics_check(report, truth)

    def test_exact_hit_ok(self, setup16):
        sys_, table = setup16
        report = detect(spike_field(), GaussianModel(1.0), 0.0, sys_, table, 0.1)
        truth = np.zeros(16, dtype=bool)
        truth[4:8] = True
        assert fwer_semantics_check(report, truth)

    def test_disjoint_detection_flags(self):
        report = DetectionReport(
            alpha=0.1,
            q=1.0,
            mode="all",
            statistic=2.0,
            significant=[
                type("S", (), {"region": Region((1,), (2,))})(),
            ],
        )
        truth = np.zeros(16, dtype=bool)
        truth[8:10] = True
        assert not fwer_semantics_check(report, truth)


class TestSerialization:
    def test_json_round_trip(self, setup16):
        sys_, table = setup16
        report = detect(spike_field(), GaussianModel(1.0), 0.0, sys_, table, 0.1)
        back = DetectionReport.from_json(report.to_json())
        assert back.alpha == report.alpha and back.q == report.q
        assert back.statistic == report.statistic
        assert len(back.significant) == len(report.significant)
        for a, b in zip(back.significant, report.significant):
            assert a.region == b.region and a.stat == b.stat and a.margin == b.margin
        assert back.to_json() == report.to_json()

    def test_malformed(self):
        with pytest.raises(GridFormatError):
            DetectionReport.from_json("{not json")
        with pytest.raises(GridFormatError):
            DetectionReport.from_json('{"alpha": 0.1}')
