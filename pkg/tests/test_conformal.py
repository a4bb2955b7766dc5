import math

import numpy as np
import pytest
from helpers_synth import ToyLinearEnsemble, draw_exchangeable, records_from_arrays

from confens.conformal import (
    Calibration,
    ConformalError,
    alpha_at,
    build_ensemble_conformal,
    build_rf_cross_conformal,
    calibrate,
    half_widths,
    nonconformity,
    predict_region,
)
from confens.dataset import Dataset, make_split
from confens.ensembles import SNAPSHOT_V1, train_snapshot_ensemble
from confens.forest import kfold_partition
from confens.mlp import TrainConfig


class TestNonconformity:
    def test_unit_scale_when_spread_zero(self):
        assert nonconformity(7.2, 6.7, 0.0) == pytest.approx(0.5, abs=1e-15)

    def test_zero_residual(self):
        assert nonconformity(5.0, 5.0, 0.3) == 0.0

    def test_log_two_spread_halves_residual(self):
        assert nonconformity(6.0, 7.0, math.log(2)) == pytest.approx(0.5, rel=1e-15)

    def test_rejects_bad_inputs(self):
        with pytest.raises(ConformalError):
            nonconformity(np.inf, 0.0, 0.0)
        with pytest.raises(ConformalError):
            nonconformity(1.0, 0.0, -0.1)

    def test_vectorized(self):
        a = nonconformity(np.array([1.0, 2.0]), np.array([0.0, 2.0]), np.array([0.0, 1.0]))
        assert a.tolist() == [1.0, 0.0]


class TestCalibrate:
    def test_sorts_scores(self):
        # residuals with sigma 0 give raw scores {0.9, 0.1, 0.5}
        cal = calibrate([(0.9, 0.0, 0.0), (0.1, 0.0, 0.0), (0.5, 0.0, 0.0)])
        assert cal.alphas.tolist() == [0.1, 0.5, 0.9]

    def test_all_zero_residuals(self):
        cal = calibrate([(5.0, 5.0, 0.2)] * 4)
        assert (cal.alphas == 0).all()

    def test_empty_rejected(self):
        with pytest.raises(ConformalError):
            calibrate([])

    def test_normalization_bound(self):
        # e^sigma >= 1 caps every score by its own absolute residual
        rng = np.random.default_rng(1)
        recs = records_from_arrays(
            rng.normal(0, 2, 500), rng.normal(0, 2, 500), rng.exponential(0.5, 500)
        )
        cal = calibrate(recs)
        max_residual = max(abs(r.y - r.y_hat) for r in recs)
        assert cal.alphas.max() <= max_residual + 1e-15

    def test_calibration_invariants(self):
        with pytest.raises(ConformalError):
            Calibration(alphas=np.array([0.3, 0.1]))
        with pytest.raises(ConformalError):
            Calibration(alphas=np.array([-0.1, 0.2]))


class TestAlphaAt:
    def test_rank_example(self):
        cal = Calibration(alphas=np.arange(1, 11) / 10.0)
        assert alpha_at(cal, 0.8) == pytest.approx(0.9)  # k = ceil(11*0.8) = 9

    def test_single_score_clamps(self):
        cal = Calibration(alphas=np.array([0.42]))
        assert alpha_at(cal, 0.1) == 0.42
        assert alpha_at(cal, 0.99) == 0.42

    def test_high_cl_clamps_to_max(self):
        cal = Calibration(alphas=np.arange(1, 11) / 10.0)
        assert alpha_at(cal, 0.99) == 1.0  # k = ceil(10.89) = 11 -> clamp to 10

    def test_exact_rational_rank(self):
        # 100 * 0.7 must select rank 70, not drift to 71 via float rounding
        cal = Calibration(alphas=np.arange(1, 100) / 100.0)
        assert alpha_at(cal, 0.7) == pytest.approx(0.70)

    def test_monotone_in_cl(self):
        rng = np.random.default_rng(2)
        cal = calibrate(records_from_arrays(rng.normal(0, 1, 73), np.zeros(73), np.zeros(73)))
        values = [alpha_at(cal, cl) for cl in np.linspace(0.05, 0.95, 19)]
        assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))

    def test_rejects_bad_cl(self):
        cal = Calibration(alphas=np.array([0.1]))
        for cl in (0.0, 1.0, -0.5):
            with pytest.raises(ConformalError):
                alpha_at(cal, cl)


class TestPredictRegion:
    def test_zero_spread(self):
        r = predict_region(6.5, 0.0, 0.8, cl=0.8)
        assert (r.lo, r.hi) == (pytest.approx(5.7), pytest.approx(7.3))

    def test_log_two_spread(self):
        r = predict_region(5.0, math.log(2), 0.5, cl=0.8)
        assert (r.lo, r.hi) == (pytest.approx(4.0), pytest.approx(6.0))

    def test_boundary_round_trip(self):
        # a record's own alpha puts the truth exactly on the region boundary
        rng = np.random.default_rng(3)
        for _ in range(200):
            y = rng.normal(0, 3)
            y_hat = rng.normal(0, 3)
            sigma = rng.exponential(0.4)
            alpha = nonconformity(y, y_hat, sigma)
            region = predict_region(y_hat, sigma, alpha, cl=0.8)
            assert min(abs(region.lo - y), abs(region.hi - y)) <= 1e-12
            assert region.lo - 1e-12 <= y <= region.hi + 1e-12

    def test_half_widths_vectorized_matches_scalar(self):
        sigma = np.array([0.0, 0.3, 1.0])
        hw = half_widths(sigma, 0.7)
        for s, h in zip(sigma, hw):
            assert predict_region(0.0, s, 0.7, 0.8).half_width == h

    def test_rejects_bad_inputs(self):
        with pytest.raises(ConformalError):
            predict_region(np.nan, 0.0, 0.1, 0.8)
        with pytest.raises(ConformalError):
            predict_region(0.0, 0.0, -0.1, 0.8)


def toy_dataset(n=60, d=6, seed=5):
    rng = np.random.default_rng(seed)
    X = (rng.random((n, d)) < 0.5).astype(float)
    y = X[:, 0] + X[:, 1] + X[:, 2]
    return Dataset(ids=tuple(f"i{k}" for k in range(n)), features=X, targets=y)


@pytest.fixture(scope="module")
def toy_model():
    ds = toy_dataset()
    split = make_split(ds, seed=1)
    model = train_snapshot_ensemble(
        ds, split, TrainConfig(), SNAPSHOT_V1, seed=6, n_snapshots=2, epoch_budget=300
    )
    return ds, split, model


class TestBuildEnsembleConformal:

    def test_single_run_cardinality(self, toy_model):
        ds, split, model = toy_model
        vi = np.asarray(split.valid_idx)[:3]
        cal = build_ensemble_conformal((model, ds.features[vi], ds.targets[vi]))
        assert cal.n == 3

    def test_pooled_cardinality(self, toy_model):
        ds, split, model = toy_model
        vi = np.asarray(split.valid_idx)
        runs = [(model, ds.features[vi], ds.targets[vi])] * 4
        cal = build_ensemble_conformal(runs, pooling="pooled")
        assert cal.n == 4 * vi.size
        assert cal.provenance["mode"] == "pooled-across-runs"

    def test_per_run_equals_pooled_multiset(self, toy_model):
        ds, split, model = toy_model
        vi = np.asarray(split.valid_idx)
        runs = [(model, ds.features[vi], ds.targets[vi])] * 2
        pooled = build_ensemble_conformal(runs, pooling="pooled")
        per_run = build_ensemble_conformal(runs, pooling="per-run")
        merged = np.sort(np.concatenate([c.alphas for c in per_run]))
        assert np.array_equal(merged, pooled.alphas)

    def test_empty_validation_rejected(self, toy_model):
        ds, split, model = toy_model
        with pytest.raises(ConformalError):
            build_ensemble_conformal((model, ds.features[:0], ds.targets[:0]))


class TestCrossConformal:
    def test_accounting_each_point_once(self):
        ds = toy_dataset(n=120, seed=9)
        train_idx = list(range(100))
        cal = build_rf_cross_conformal(ds, train_idx, k=10, n_trees=10, seed=4)
        assert cal.n == 100
        assert sorted(cal.provenance["held_out_order"]) == train_idx

    def test_perfectly_learnable_gives_zero_alphas(self):
        # y fully determined by one feature, with heavy duplication so every
        # complement and virtually every bootstrap keeps both classes
        rng = np.random.default_rng(11)
        X = np.zeros((40, 3))
        X[:, 1] = (np.arange(40) % 2).astype(float)
        X[:, 0] = (rng.random(40) < 0.5).astype(float)
        y = np.where(X[:, 1] > 0.5, 8.0, 4.0)
        ds = Dataset(ids=tuple(f"i{k}" for k in range(40)), features=X, targets=y)
        cal = build_rf_cross_conformal(ds, list(range(40)), k=5, n_trees=20, seed=3)
        assert cal.alphas.max() < 1e-12

    def test_hand_oracle_pure_folds(self):
        # two identical blocks; choose a seed whose 2-fold split is class-pure,
        # then every bootstrap tree is the single-leaf constant of the other
        # block and each held-out alpha is |5 - 9| / e^0 = 4
        X = np.array([[0.0], [0.0], [0.0], [1.0], [1.0], [1.0]])
        y = np.array([5.0, 5.0, 5.0, 9.0, 9.0, 9.0])
        ds = Dataset(ids=tuple("abcdef"), features=X, targets=y)
        from confens.dataset import mix_seed

        seed = None
        for candidate in range(200):
            folds = kfold_partition(np.arange(6), k=2, seed=mix_seed(candidate, 0))
            if all(len({int(y[i]) for i in fold}) == 1 for fold in folds):
                seed = candidate
                break
        assert seed is not None, "no class-pure 2-fold seed in range"
        cal = build_rf_cross_conformal(ds, list(range(6)), k=2, n_trees=7, seed=seed)
        assert cal.alphas.tolist() == [4.0] * 6

    def test_too_few_for_folds(self):
        ds = toy_dataset(n=12, seed=2)
        with pytest.raises(Exception):
            build_rf_cross_conformal(ds, list(range(4)), k=10)


class TestMarginalValidity:
    def test_synthetic_exchangeable_coverage(self):
        # smaller version of the acceptance criterion: coverage at three
        # levels stays above cl - 3*sqrt(cl(1-cl)/n_test)
        rng = np.random.default_rng(2024)
        ens = ToyLinearEnsemble(rng)
        y_c, yh_c, sg_c = draw_exchangeable(rng, ens, 500)
        cal = calibrate(records_from_arrays(y_c, yh_c, sg_c))
        n_test = 2000
        y_t, yh_t, sg_t = draw_exchangeable(rng, ens, n_test)
        for cl in (0.7, 0.8, 0.9):
            hw = half_widths(sg_t, alpha_at(cal, cl))
            covered = np.mean((y_t >= yh_t - hw) & (y_t <= yh_t + hw))
            floor = cl - 3 * math.sqrt(cl * (1 - cl) / n_test)
            assert covered >= floor, f"cl={cl}: {covered:.4f} < {floor:.4f}"
