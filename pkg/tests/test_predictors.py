import math

import numpy as np
import pytest

from confee import (
    ClassificationTask,
    Dataset,
    DimensionMismatchError,
    FoldPartition,
    Observation,
    OutOfRangeError,
    PlausibilityTable,
    RegressionTask,
    cross_p_merge,
    cross_predict,
    e_prediction_set,
    e_to_p,
    fit_cross,
    fit_cross_from_partition,
    fit_split,
    full_conformal_e_predict,
    get_scenario,
    harmonic_mean,
    make_fold_partition,
    p_to_e,
    sample,
    split_p_predict,
    split_predict,
    support_set_assignment,
    unit_margin_provider,
)
from confee.predictors import CrossEPredictor, FullEPredictor, OnlineTrace

GRID03 = RegressionTask((0.0, 3.0))


def _ridge_split_example():
    proper = Dataset(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]), GRID03)
    calibration = Dataset(np.array([[2.0]]), np.array([2.0]), GRID03)
    return fit_split(proper, calibration, "ridge", "mean", lam=0.0)


class TestSplit:
    def test_ridge_example_end_to_end(self):
        pred = _ridge_split_example()
        # beta = 1, so sigma(2,2) = 1, sigma(3,3) = 1, sigma(3,0) = 1/4;
        # mean-normalizing (1, 1) and (1, 1/4) gives 1.0 and 0.4
        assert abs(pred.e_at((3.0,), 3.0) - 1.0) <= 1e-9
        assert abs(pred.e_at((3.0,), 0.0) - 0.4) <= 1e-9
        assert pred.alphas_at((3.0,), 0.0).values == (1.6, 0.4)
        table = split_predict(pred, (3.0,))
        assert table.labels == (0.0, 3.0)
        assert table[3.0] == pred.e_at((3.0,), 3.0)

    def test_p_values(self):
        pred = _ridge_split_example()
        # one calibration summary equal to 1: p = (#{<=} + 1) / (c + 1)
        assert pred.p_at((3.0,), 3.0) == 1.0
        assert pred.p_at((3.0,), 0.0) == 0.5
        assert split_p_predict(pred, (3.0,)) == {0.0: 0.5, 3.0: 1.0}

    def test_calibration_order_equivariance_bitwise(self):
        rng = np.random.default_rng(314)
        data = sample(get_scenario("gm2d"), 40, 5)
        proper, calibration = data.subset(range(28)), data.subset(range(28, 40))
        base = fit_split(proper, calibration, "knn", "mean", k=3)
        x = (0.3, -0.2)
        expected = base.predict(x)
        for _ in range(100):
            perm = rng.permutation(12)
            shuffled = fit_split(proper, calibration.subset(perm), "knn", "mean", k=3)
            assert shuffled.predict(x).values == expected.values

    def test_part_compatibility_checks(self):
        proper = Dataset(np.zeros((2, 1)), np.array([0.0, 1.0]), GRID03)
        other_task = Dataset(np.zeros((2, 1)), np.array([0.5, 1.0]), RegressionTask((0.0, 9.0)))
        with pytest.raises(OutOfRangeError):
            fit_split(proper, other_task, "ridge")
        wide = Dataset(np.zeros((2, 2)), np.array([0.0, 1.0]), GRID03)
        with pytest.raises(DimensionMismatchError):
            fit_split(proper, wide, "ridge")


class TestCross:
    def _fitted(self, n=23, seed=8):
        data = sample(get_scenario("gm2d"), n, seed)
        return data, fit_cross(data, 5, 17, "knn", "mean", k=3)

    def test_merge_is_arithmetic_mean(self):
        data, pred = self._fitted()
        z = data.observation(3)
        folds = pred.fold_e_at(z.x, z.y)
        assert len(folds) == 5
        assert pred.e_at(z.x, z.y) == math.fsum(folds) / 5

    def test_size_weighted_merge(self):
        data = sample(get_scenario("gm2d"), 23, 8)
        pred = fit_cross(data, 5, 17, "knn", "mean", weighting="size_proportional", k=3)
        z = data.observation(3)
        folds = pred.fold_e_at(z.x, z.y)
        sizes = [len(f) for f in pred.partition.folds]
        expected = math.fsum(s * a for s, a in zip(sizes, folds)) / 23
        assert pred.e_at(z.x, z.y) == expected

    def test_predict_matches_pointwise_queries(self):
        data, pred = self._fitted()
        x = (0.1, 0.4)
        table = cross_predict(pred, x)
        assert table.values == tuple(pred.e_at(x, y) for y in (0, 1))

    def test_fold_relabelling_symmetry(self):
        data, pred = self._fitted()
        x = (0.1, 0.4)
        base = pred.predict(x).values
        shuffled = CrossEPredictor(
            FoldPartition(
                tuple(pred.partition.folds[i] for i in [1, 2, 0, 4, 3]),
                pred.partition.n,
                pred.partition.seed,
            ),
            tuple(pred.fold_predictors[i] for i in [1, 2, 0, 4, 3]),
            "uniform",
        )
        assert shuffled.predict(x).values == base

    def test_training_order_equivariance_bitwise(self):
        rng = np.random.default_rng(2718)
        data = sample(get_scenario("gm2d"), 20, 12)
        partition = make_fold_partition(20, 4, 99)
        base = fit_cross_from_partition(data, partition, "knn", "mean", k=3)
        x = (0.2, -0.1)
        expected = base.predict(x).values
        for _ in range(50):
            perm = rng.permutation(20)
            inverse = np.empty(20, dtype=int)
            inverse[perm] = np.arange(20)
            moved_folds = tuple(
                tuple(sorted(int(inverse[i]) for i in fold)) for fold in partition.folds
            )
            moved = fit_cross_from_partition(
                data.subset(perm),
                FoldPartition(moved_folds, 20, partition.seed),
                "knn",
                "mean",
                k=3,
            )
            assert moved.predict(x).values == expected

    def test_same_seed_same_predictor(self):
        data = sample(get_scenario("gm2d"), 23, 8)
        a = fit_cross(data, 5, 17, "knn", "mean", k=3)
        b = fit_cross(data, 5, 17, "knn", "mean", k=3)
        assert a.partition == b.partition
        assert a.predict((0.0, 0.0)).values == b.predict((0.0, 0.0)).values

    def test_weighting_validated(self):
        data = sample(get_scenario("gm2d"), 20, 8)
        with pytest.raises(OutOfRangeError):
            fit_cross(data, 4, 1, "knn", "mean", weighting="median", k=3)


class TestFull:
    TRAIN = Dataset.from_observations(
        (
            Observation((-2.0,), -1),
            Observation((-0.5,), -1),
            Observation((0.5,), 1),
            Observation((2.0,), 1),
        ),
        ClassificationTask((-1, 1)),
    )
    ASSIGN = staticmethod(support_set_assignment(unit_margin_provider((1.0,), 0.0, 1)))

    def test_margin_oracle(self):
        table = full_conformal_e_predict(self.TRAIN, (1.5,), (-1, 1), self.ASSIGN)
        assert table[-1] == 5.0 / 3.0
        assert table[1] == 0.0

    def test_training_order_equivariance(self):
        rng = np.random.default_rng(31)
        base = full_conformal_e_predict(self.TRAIN, (1.5,), (-1, 1), self.ASSIGN).values
        for _ in range(50):
            perm = rng.permutation(4)
            moved = full_conformal_e_predict(
                self.TRAIN.subset(perm), (1.5,), (-1, 1), self.ASSIGN
            )
            assert moved.values == base

    def test_brute_force_cross_check(self):
        # recompute the support set from scratch for random queries
        rng = np.random.default_rng(606)
        predictor = FullEPredictor(self.TRAIN, self.ASSIGN)
        for _ in range(200):
            x = float(rng.normal(0, 2))
            y = int(rng.choice((-1, 1)))
            points = [(-2.0, -1), (-0.5, -1), (0.5, 1), (2.0, 1), (x, y)]
            sv = [i for i, (xi, yi) in enumerate(points) if (1 if yi == 1 else -1) * xi <= 1.0]
            expected = (5.0 / len(sv)) if 4 in sv else 0.0
            assert predictor.e_at((x,), y) == expected


class TestScalarOps:
    def test_round_trips(self):
        for p in np.linspace(0.01, 1.0, 50):
            assert abs(e_to_p(p_to_e(p)) - p) <= 1e-12 * p
        for e in np.linspace(1.0, 50.0, 50):
            assert abs(p_to_e(e_to_p(e)) - e) <= 1e-12 * e

    def test_domains(self):
        with pytest.raises(OutOfRangeError):
            p_to_e(0.0)
        with pytest.raises(OutOfRangeError):
            p_to_e(1.5)
        with pytest.raises(OutOfRangeError):
            e_to_p(-0.1)
        with pytest.raises(OutOfRangeError):
            e_to_p(float("inf"))
        assert e_to_p(0.0) == 1.0
        assert e_to_p(0.5) == 1.0  # capped

    def test_harmonic_vs_arithmetic(self):
        rng = np.random.default_rng(404)
        for _ in range(1000):
            m = int(rng.integers(1, 20))
            ps = rng.uniform(1e-6, 1.0, m)
            harm = harmonic_mean(ps)
            arith = math.fsum(ps) / m
            assert harm <= arith + 1e-12
            # harmonic mean of p equals 1 / arithmetic mean of e = 1/p
            inverse_mean = math.fsum(1.0 / p for p in ps) / m
            assert abs(harm - 1.0 / inverse_mean) <= 1e-12

    def test_harmonic_edge_cases(self):
        assert harmonic_mean((0.5, 0.0)) == 0.0
        with pytest.raises(OutOfRangeError):
            harmonic_mean(())
        with pytest.raises(OutOfRangeError):
            harmonic_mean((-1.0,))

    def test_cross_p_merge(self):
        assert cross_p_merge((0.1, 0.3), adjusted=False) == 0.2
        assert cross_p_merge((0.1, 0.3)) == 0.4
        assert cross_p_merge((0.9, 0.9)) == 1.0  # capped
        with pytest.raises(OutOfRangeError):
            cross_p_merge(())
        with pytest.raises(OutOfRangeError):
            cross_p_merge((0.0, 0.5))
        with pytest.raises(OutOfRangeError):
            cross_p_merge((1.2,))


class TestPredictionSets:
    TABLE = PlausibilityTable(("A", "B", "C"), (0.05, 0.5, 1.2))

    def test_threshold_examples(self):
        assert e_prediction_set(self.TABLE, 0.1) == ("B", "C")
        assert e_prediction_set(self.TABLE, 0.5, threshold=0.0) == ("A", "B", "C")
        assert e_prediction_set(self.TABLE, 0.5, threshold=lambda eps: 2 * eps) == ("C",)

    def test_monotone_in_epsilon(self):
        rng = np.random.default_rng(777)
        for _ in range(200):
            values = rng.exponential(0.4, 4)
            table = PlausibilityTable(("a", "b", "c", "d"), tuple(values))
            eps = sorted(rng.uniform(0.01, 0.99, 2))
            larger = set(e_prediction_set(table, eps[0]))
            smaller = set(e_prediction_set(table, eps[1]))
            assert smaller <= larger

    def test_zero_values_are_never_kept(self):
        table = PlausibilityTable(("a", "b"), (0.0, 2.0))
        assert e_prediction_set(table, 0.5, threshold=0.0) == ("b",)

    def test_epsilon_domain(self):
        with pytest.raises(OutOfRangeError):
            e_prediction_set(self.TABLE, 0.0)
        with pytest.raises(OutOfRangeError):
            e_prediction_set(self.TABLE, 1.0)
        with pytest.raises(OutOfRangeError):
            e_prediction_set(self.TABLE, 0.5, threshold=-0.1)


class TestOnlineTrace:
    def test_running_means_exact(self):
        rng = np.random.default_rng(11)
        es = rng.exponential(1.0, 64)
        trace = OnlineTrace.from_e_values(es)
        for i in range(64):
            assert trace.running_means[i] == math.fsum(es[: i + 1]) / (i + 1)

    def test_validation(self):
        with pytest.raises(OutOfRangeError):
            OnlineTrace((1.0,), (1.0, 1.0))
        with pytest.raises(OutOfRangeError):
            OnlineTrace.from_e_values((-1.0,))
        with pytest.raises(OutOfRangeError):
            OnlineTrace.from_e_values(())
