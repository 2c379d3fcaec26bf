import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpad.errors import MpadError
from mpad.metrics import (
    DetCurve,
    apcer_bpcer,
    bpcer_at_apcer,
    d_eer,
    det_curve,
    distribution_stats,
    fmr_fnmr,
    iapmr,
    riapar,
    threshold_at_fmr,
    vulnerability_report,
    write_det_csv,
    write_vulnerability_csv,
)

from oracles import (
    oracle_bpcer_at_apcer,
    oracle_d_eer,
    oracle_threshold_at_fmr,
    two_pass_stats,
)


class TestFmrFnmr:
    def test_threshold_below_everything(self):
        assert fmr_fnmr([0.9, 0.8], [0.1, 0.2], 0.0) == (1.0, 0.0)

    def test_separated(self):
        assert fmr_fnmr([0.9, 0.8], [0.1, 0.2], 0.5) == (0.0, 0.0)

    def test_half_and_half(self):
        assert fmr_fnmr([0.4, 0.9], [0.1, 0.6], 0.5) == (0.5, 0.5)

    def test_empty_rejected(self):
        with pytest.raises(MpadError, match="empty"):
            fmr_fnmr([], [0.1], 0.5)


class TestThresholdAtFmr:
    def test_hundred_evenly_spaced_top_ten(self):
        imp = np.linspace(0.1, 1.0, 100)
        t, achieved = threshold_at_fmr(imp, 0.10)
        assert int(np.count_nonzero(imp >= t)) == 10
        assert achieved == 0.10

    def test_target_one_admits_everything(self):
        imp = [0.3, 0.5, 0.9]
        t, achieved = threshold_at_fmr(imp, 1.0)
        assert t <= min(imp) and achieved == 1.0

    def test_single_score_unreachable_target(self):
        t, achieved = threshold_at_fmr([0.5], 0.5)
        assert t > 0.5 and achieved == 0.0

    def test_target_range_validated(self):
        with pytest.raises(MpadError):
            threshold_at_fmr([0.5], 0.0)


class TestIapmr:
    def test_all_below(self):
        assert iapmr([0.1, 0.2], 0.5) == 0.0

    def test_half(self):
        assert iapmr([0.9, 0.1, 0.8, 0.2], 0.5) == 0.5

    def test_mifs_scale_counts(self):
        # 428 attack comparisons with exactly 73 at or above the threshold
        scores = np.concatenate([np.full(73, 0.8), np.full(355, 0.05)])
        value = iapmr(scores, 0.4)
        assert value == 73 / 428
        assert value * 100 == pytest.approx(17.056, abs=2e-3)


class TestRiapar:
    def test_paper_row_fmr_1_percent(self):
        assert riapar(0.17056, 0.00028) == pytest.approx(0.17084, abs=1e-12)

    def test_paper_row_fmr_0001_percent(self):
        assert riapar(0.0, 0.06274) == pytest.approx(0.06274, abs=1e-12)

    def test_zero_zero(self):
        assert riapar(0.0, 0.0) == 0.0


class TestApcerBpcer:
    def test_separated(self):
        assert apcer_bpcer([0.8, 0.9], [0.1, 0.2], 0.5) == (0.0, 0.0)

    def test_mixed(self):
        assert apcer_bpcer([0.4, 0.9], [0.1, 0.6], 0.5) == (0.5, 0.5)

    def test_threshold_zero(self):
        assert apcer_bpcer([0.4, 0.9], [0.1, 0.6], 0.0) == (0.0, 1.0)


class TestDeer:
    def test_separated_sets(self):
        eer, _ = d_eer([0.8, 0.9], [0.1, 0.2])
        assert eer == 0.0

    def test_eight_score_fixture(self):
        eer, t = d_eer([0.4, 0.7, 0.9, 0.95], [0.1, 0.2, 0.3, 0.8])
        assert eer == 0.25
        assert 0.4 < t <= 0.7

    def test_identical_multisets(self):
        eer, _ = d_eer([0.1, 0.5, 0.9], [0.1, 0.5, 0.9])
        assert eer == 0.5


class TestBpcerAtApcer:
    def test_separated(self):
        assert bpcer_at_apcer([0.8, 0.9], [0.1, 0.2], 0.10) == 0.0
        assert bpcer_at_apcer([0.8, 0.9], [0.1, 0.2], 0.05) == 0.0

    def test_overlapping_matches_oracle(self):
        bona = np.linspace(0.0, 0.9, 10)
        attack = np.linspace(0.45, 1.35, 10)
        for cap in (0.10, 0.05, 0.3):
            assert bpcer_at_apcer(attack, bona, cap) == oracle_bpcer_at_apcer(attack, bona, cap)

    def test_consistent_with_det_curve(self):
        rng = np.random.default_rng(17)
        attack = rng.uniform(0.3, 1.0, 40)
        bona = rng.uniform(0.0, 0.7, 40)
        curve = det_curve(attack, bona)
        for cap in (0.10, 0.05):
            feasible = curve.bpcers[curve.apcers <= cap]
            assert bpcer_at_apcer(attack, bona, cap) == feasible.min()

    def test_cap_validated(self):
        with pytest.raises(MpadError):
            bpcer_at_apcer([0.5], [0.5], 1.0)


class TestDistributionStats:
    def test_single_score(self):
        assert distribution_stats([0.5]) == (0.5, 0.0, 0.5, 0.5)

    def test_two_scores(self):
        assert distribution_stats([0.0, 1.0]) == (0.5, 0.5, 0.0, 1.0)

    def test_matches_two_pass_oracle(self):
        rng = np.random.default_rng(18)
        scores = rng.uniform(0.0, 1.0, 1000)
        got = distribution_stats(scores)
        expected = two_pass_stats(scores)
        assert got.mean == pytest.approx(expected[0], abs=1e-12)
        assert got.st_dev == pytest.approx(expected[1], abs=1e-12)
        assert (got.minimum, got.maximum) == (expected[2], expected[3])


class TestDetCurve:
    def test_endpoints(self):
        curve = det_curve([0.6, 0.9], [0.1, 0.3])
        assert (curve.apcers[0], curve.bpcers[0]) == (1.0, 0.0)  # above max score
        assert (curve.apcers[-1], curve.bpcers[-1]) == (0.0, 1.0)  # at or below min

    def test_pointwise_agreement_with_apcer_bpcer(self):
        rng = np.random.default_rng(19)
        attack = rng.uniform(0.2, 1.0, 30)
        bona = rng.uniform(0.0, 0.8, 30)
        curve = det_curve(attack, bona)
        for t, a, b in zip(curve.thresholds, curve.apcers, curve.bpcers):
            assert apcer_bpcer(attack, bona, t) == (a, b)

    def test_monotonicity_enforced(self):
        with pytest.raises(ValueError, match="monotonicity"):
            DetCurve(
                thresholds=np.array([0.9, 0.5]),
                apcers=np.array([0.2, 0.8]),
                bpcers=np.array([0.0, 1.0]),
            )


class TestOracleEquivalence:
    def test_randomized_sets_match_oracles_exactly(self):
        rng = np.random.default_rng(20)
        for trial in range(40):
            n_a = int(rng.integers(1, 51))
            n_b = int(rng.integers(1, 51))
            if trial % 3 == 0:
                pool = rng.uniform(0, 1, 8)  # duplicates likely
                attack = rng.choice(pool, n_a)
                bona = rng.choice(pool, n_b)
            else:
                attack = rng.uniform(0.0, 1.0, n_a)
                bona = rng.uniform(0.0, 1.0, n_b)
            eer, t = d_eer(attack, bona)
            oe, ot = oracle_d_eer(attack, bona)
            assert abs(eer - oe) <= 1e-9 and abs(t - ot) <= 1e-9
            for cap in (0.10, 0.05):
                assert abs(bpcer_at_apcer(attack, bona, cap) - oracle_bpcer_at_apcer(attack, bona, cap)) <= 1e-9
            target = float(rng.choice([0.01, 0.1, 0.5, 1.0]))
            got = threshold_at_fmr(bona, target)
            want = oracle_threshold_at_fmr(bona, target)
            assert abs(got.threshold - want[0]) <= 1e-9 and abs(got.fmr - want[1]) <= 1e-9


class TestMonotoneInvariance:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(["exp", "affine", "cube"]))
    def test_deer_invariant_under_increasing_transforms(self, seed, kind):
        rng = np.random.default_rng(seed)
        attack = rng.uniform(0.0, 1.0, int(rng.integers(2, 30)))
        bona = rng.uniform(0.0, 1.0, int(rng.integers(2, 30)))
        transform = {
            "exp": np.exp,
            "affine": lambda s: 3.0 * s + 1.0,
            "cube": lambda s: s**3,
        }[kind]
        base_eer, _ = d_eer(attack, bona)
        mapped_eer, _ = d_eer(transform(attack), transform(bona))
        assert base_eer == mapped_eer
        for cap in (0.10, 0.05):
            assert bpcer_at_apcer(attack, bona, cap) == bpcer_at_apcer(transform(attack), transform(bona), cap)


class TestVulnerabilityReport:
    def test_rows_and_stats(self):
        genuine = np.concatenate([np.full(7, 0.2), np.full(24993, 0.95)])
        impostor = np.concatenate([np.full(990, 0.1), np.full(10, 0.7)])
        attack = np.concatenate([np.full(73, 0.8), np.full(355, 0.05)])
        report = vulnerability_report(genuine, impostor, attack, [0.01])
        row = report.rows[0]
        assert row.fnmr == pytest.approx(0.00028, abs=1e-12)
        assert row.iapmr == pytest.approx(73 / 428, abs=1e-12)
        assert row.riapar * 100 == pytest.approx(17.084, abs=1e-3)
        assert report.stats["impostor"].maximum == 0.7

    def test_csv_export(self, tmp_path):
        report = vulnerability_report([0.9, 0.8], [0.1, 0.2], [0.5, 0.6], [0.5, 1.0])
        path = tmp_path / "vuln.csv"
        write_vulnerability_csv(report, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "FMR,FNMR,IAPMR,RIAPAR"
        assert len(lines) == 3

    def test_det_csv_export(self, tmp_path):
        curve = det_curve([0.6, 0.9], [0.1, 0.3])
        path = tmp_path / "det.csv"
        write_det_csv(curve, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "threshold,apcer,bpcer"
        assert len(lines) == len(curve) + 1
