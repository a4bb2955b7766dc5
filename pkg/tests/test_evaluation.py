import math

import numpy as np
import pytest
from helpers_synth import ToyLinearEnsemble, draw_exchangeable, records_from_arrays

from confens.conformal import ConfidenceRegion, alpha_at, calibrate, half_widths
from confens.evaluation import (
    EvalError,
    binned_error_rate,
    coverage,
    global_error_rate,
    interval_width_distribution,
    rmse_summary,
    spread_distribution,
    validity_curve,
)
from confens.mlp import rmse


def regions(centers, hws, cl=0.8):
    return [ConfidenceRegion(c, w, cl) for c, w in zip(centers, hws)]


class TestRmseSummary:
    def test_single_run_zero_std(self):
        truths = np.array([5.0, 6.0])
        s = rmse_summary([np.array([5.5, 6.5])], truths)
        assert s.std == 0.0
        assert s.mean == pytest.approx(0.5)

    def test_identical_runs(self):
        truths = np.array([5.0, 6.0, 7.0])
        preds = np.array([5.1, 6.1, 7.1])
        s = rmse_summary([preds, preds, preds], truths)
        assert s.std == 0.0
        assert s.mean == pytest.approx(rmse(preds, truths))

    def test_per_run_truths(self):
        s = rmse_summary(
            [np.array([1.0, 2.0]), np.array([4.0, 4.0])],
            [np.array([1.0, 2.0]), np.array([3.0, 5.0])],
        )
        assert s.per_run[0] == 0.0
        assert s.per_run[1] == pytest.approx(1.0)
        assert s.mean == pytest.approx(0.5)

    def test_empty(self):
        with pytest.raises(EvalError):
            rmse_summary([], np.array([1.0]))


class TestValidityCurve:
    def test_huge_regions_cover_everything(self):
        truths = np.linspace(0, 10, 50)
        by_cl = {cl: regions(np.zeros(50), np.full(50, 1e9), cl) for cl in (0.2, 0.5, 0.8)}
        curve = validity_curve(by_cl, truths)
        assert curve.coverage == (1.0, 1.0, 1.0)

    def test_zero_width_regions_cover_nothing(self):
        rng = np.random.default_rng(0)
        truths = rng.normal(0, 1, 50)
        by_cl = {cl: regions(truths + 0.001, np.zeros(50), cl) for cl in (0.2, 0.8)}
        curve = validity_curve(by_cl, truths)
        assert curve.coverage == (0.0, 0.0)

    def test_synthetic_pipeline_is_nearly_linear(self):
        rng = np.random.default_rng(7)
        ens = ToyLinearEnsemble(rng)
        cal = calibrate(records_from_arrays(*draw_exchangeable(rng, ens, 800)))
        y, y_hat, sigma = draw_exchangeable(rng, ens, 3000)
        grid = [round(0.05 * i, 10) for i in range(1, 20)]
        by_cl = {cl: (y_hat, half_widths(sigma, alpha_at(cal, cl))) for cl in grid}
        curve = validity_curve(by_cl, y)
        assert curve.r2 > 0.99
        assert all(a <= b + 1e-12 for a, b in zip(curve.coverage, curve.coverage[1:]))

    def test_accepts_array_form(self):
        truths = np.array([1.0, 2.0])
        curve = validity_curve({0.5: (truths, np.array([0.1, 0.1]))}, truths)
        assert curve.coverage == (1.0,)


class TestWidthDistribution:
    def test_zero_spread_means_constant_width(self):
        alpha = 0.8
        r = regions(np.zeros(5), np.full(5, math.exp(0.0) * alpha))
        dist = interval_width_distribution(r)
        assert (dist.samples == 2 * alpha).all()
        assert dist.mean == dist.max == pytest.approx(1.6)

    def test_widths_non_negative(self):
        rng = np.random.default_rng(3)
        r = regions(rng.normal(0, 1, 30), rng.exponential(0.5, 30))
        assert (interval_width_distribution(r).samples >= 0).all()

    def test_quartile_summary(self):
        r = regions(np.zeros(4), np.array([0.5, 1.0, 1.5, 2.0]))
        dist = interval_width_distribution(r)
        assert dist.median == pytest.approx(2.5)
        assert dist.max == 4.0


class TestSpreadDistribution:
    def test_identical_members_zero(self):
        assert spread_distribution(np.zeros(10)).mean == 0.0

    def test_homogeneity(self):
        sig = np.array([0.1, 0.4, 0.9])
        assert spread_distribution(2 * sig).mean == pytest.approx(
            2 * spread_distribution(sig).mean
        )

    def test_mean_matches_raw_samples_bitwise(self):
        rng = np.random.default_rng(5)
        sig = rng.exponential(0.3, 40)
        assert spread_distribution(sig).mean == float(sig.mean())

    def test_rejects_negative(self):
        with pytest.raises(EvalError):
            spread_distribution(np.array([-0.1]))


class TestBinnedErrorRate:
    def test_everything_covered_gives_zero_rates(self):
        truths = np.array([4.2, 5.3, 6.7])
        rows = binned_error_rate(regions(truths, np.full(3, 0.5)), truths)
        assert all(r.error_rate == 0.0 for r in rows)

    def test_hand_counted_example(self):
        truths = np.array([5.2, 5.9, 6.1])
        centers = np.array([5.2, 5.9, 9.0])  # third region misses its truth
        rows = binned_error_rate(regions(centers, np.full(3, 0.2)), truths)
        by_lo = {r.lo: r for r in rows}
        assert by_lo[5.0].count == 2 and by_lo[5.0].error_rate == 0.0
        assert by_lo[6.0].count == 1 and by_lo[6.0].error_rate == 1.0

    def test_bins_anchored_at_integers(self):
        truths = np.array([4.999, 5.0])
        rows = binned_error_rate(regions(truths, np.full(2, 1.0)), truths)
        assert [r.lo for r in rows] == [4.0, 5.0]
        assert all(r.hi == r.lo + 1.0 for r in rows)

    def test_predicted_key_bins_by_center(self):
        truths = np.array([5.5, 5.5])
        centers = np.array([5.4, 8.2])
        rows = binned_error_rate(
            regions(centers, np.full(2, 0.5)), truths, binning_key="predicted"
        )
        assert [r.lo for r in rows] == [5.0, 8.0]
        assert rows[1].error_rate == 1.0

    def test_partition_identity(self):
        rng = np.random.default_rng(9)
        truths = rng.normal(6, 1.5, 400)
        centers = truths + rng.normal(0, 0.7, 400)
        hws = rng.exponential(0.6, 400)
        regs = regions(centers, hws)
        rows = binned_error_rate(regs, truths)
        assert sum(r.count for r in rows) == 400
        assert abs(global_error_rate(rows) - (1.0 - coverage(regs, truths))) <= 1e-12

    def test_bad_inputs(self):
        with pytest.raises(EvalError):
            binned_error_rate(regions(np.zeros(1), np.zeros(1)), np.zeros(1), bin_width=0)
        with pytest.raises(EvalError):
            binned_error_rate(regions(np.zeros(1), np.zeros(1)), np.zeros(1), binning_key="x")
