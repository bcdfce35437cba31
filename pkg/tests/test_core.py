import math

import numpy as np
import pytest

from confee import (
    AverageExceedsOneError,
    ClassificationTask,
    Dataset,
    EmptyDatasetError,
    FoldIndexOutOfRangeError,
    FoldPartition,
    LabelOutOfSpaceError,
    NegativeEntryError,
    NonFiniteEntryError,
    Observation,
    OutOfRangeError,
    PlausibilityTable,
    RegressionTask,
    SplitConfig,
    TooFewFoldsError,
    TooFewObservationsError,
    complement_indices,
    derive_seed,
    make_e_vector,
    make_fold_partition,
    spawn_rng,
)


class TestEValueVector:
    def test_boundary_cases(self):
        assert make_e_vector((3.0, 0.0, 0.0)).values == (3.0, 0.0, 0.0)
        assert make_e_vector((1.0, 1.0, 1.0)).mean == 1.0
        with pytest.raises(AverageExceedsOneError):
            make_e_vector((2.0, 1.0, 1.0))

    def test_rejects_bad_entries(self):
        with pytest.raises(NegativeEntryError):
            make_e_vector((-0.1, 0.5))
        with pytest.raises(NonFiniteEntryError):
            make_e_vector((float("nan"),))
        with pytest.raises(NonFiniteEntryError):
            make_e_vector((float("inf"), 0.0))
        with pytest.raises(OutOfRangeError):
            make_e_vector(())

    def test_mean_tolerance_edge(self):
        make_e_vector((1.0 + 5e-13,))  # inside the 1e-12 slack
        with pytest.raises(AverageExceedsOneError):
            make_e_vector((1.0 + 5e-12,))

    def test_fuzz_matches_direct_mean_check(self):
        rng = np.random.default_rng(20240815)
        for _ in range(2000):
            m = int(rng.integers(1, 30))
            values = rng.exponential(1.0, m) * rng.uniform(0.0, 1.5)
            should_pass = math.fsum(values) / m <= 1.0 + 1e-12
            if should_pass:
                assert make_e_vector(values).m == m
            else:
                with pytest.raises(AverageExceedsOneError):
                    make_e_vector(values)


class TestFoldPartition:
    def test_bijection_balance_determinism(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            n = int(rng.integers(2, 150))
            K = int(rng.integers(2, min(n, 9) + 1))
            seed = int(rng.integers(0, 2**32))
            part = make_fold_partition(n, K, seed)
            flat = sorted(i for fold in part.folds for i in fold)
            assert flat == list(range(n))
            sizes = [len(f) for f in part.folds]
            assert max(sizes) - min(sizes) <= 1
            assert part == make_fold_partition(n, K, seed)

    def test_large_folds_come_first(self):
        part = make_fold_partition(23, 5, 3)
        assert [len(f) for f in part.folds] == [5, 5, 5, 4, 4]

    def test_preconditions(self):
        with pytest.raises(TooFewFoldsError):
            make_fold_partition(10, 1, 0)
        with pytest.raises(TooFewObservationsError):
            make_fold_partition(3, 4, 0)
        with pytest.raises(OutOfRangeError):
            make_fold_partition(10, 2, -1)

    def test_direct_construction_is_validated(self):
        FoldPartition(((0, 2), (1, 3)), 4, 0)
        with pytest.raises(OutOfRangeError):
            FoldPartition(((0, 1), (1, 2)), 3, 0)  # overlap
        with pytest.raises(OutOfRangeError):
            FoldPartition(((0,), (2,)), 3, 0)  # index 1 missing
        with pytest.raises(OutOfRangeError):
            FoldPartition(((0, 1, 2), (3,)), 4, 0)  # unbalanced
        with pytest.raises(TooFewFoldsError):
            FoldPartition(((0, 1),), 2, 0)

    def test_complement_is_one_based(self):
        part = make_fold_partition(10, 3, 11)
        for k in range(1, 4):
            comp = complement_indices(part, k)
            assert sorted(comp + part.fold(k)) == list(range(10))
        with pytest.raises(FoldIndexOutOfRangeError):
            complement_indices(part, 0)
        with pytest.raises(FoldIndexOutOfRangeError):
            complement_indices(part, 4)


class TestTasksAndData:
    def test_classification_task(self):
        task = ClassificationTask(("a", "b"))
        assert task.contains("a") and not task.contains("c")
        with pytest.raises(OutOfRangeError):
            ClassificationTask(())
        with pytest.raises(OutOfRangeError):
            ClassificationTask((1, 1))

    def test_regression_task(self):
        task = RegressionTask((-1.0, 0.0, 2.5))
        assert task.candidates == (-1.0, 0.0, 2.5)
        with pytest.raises(OutOfRangeError):
            RegressionTask((0.0, 0.0))
        with pytest.raises(OutOfRangeError):
            RegressionTask(())
        with pytest.raises(NonFiniteEntryError):
            RegressionTask((0.0, float("inf")))

    def test_observation_coerces_types(self):
        z = Observation((np.float64(1.5), 2), np.int64(3))
        assert z.x == (1.5, 2.0)
        assert isinstance(z.y, int) and z.y == 3
        with pytest.raises(NonFiniteEntryError):
            Observation((float("nan"),), 0)

    def test_dataset_invariants(self):
        task = ClassificationTask((0, 1))
        ds = Dataset(np.zeros((3, 2)), np.array([0, 1, 0]), task)
        assert (ds.n, ds.dim) == (3, 2)
        with pytest.raises(EmptyDatasetError):
            Dataset(np.zeros((0, 2)), np.array([]), task)
        with pytest.raises(LabelOutOfSpaceError):
            Dataset(np.zeros((1, 2)), np.array([7]), task)
        with pytest.raises(NonFiniteEntryError):
            Dataset(np.array([[np.nan, 0.0]]), np.array([0]), task)
        with pytest.raises(OutOfRangeError):
            Dataset(np.zeros((2, 2)), np.array([0]), task)
        with pytest.raises(OutOfRangeError):
            Dataset(np.zeros(3), np.array([0, 1, 0]), task)

    def test_dataset_is_frozen(self):
        ds = Dataset(np.zeros((2, 1)), np.array([0.5, 1.5]), RegressionTask((0.0, 2.0)))
        with pytest.raises(ValueError):
            ds.X[0, 0] = 9.0

    def test_subset_and_observations(self):
        task = ClassificationTask((0, 1))
        ds = Dataset(np.arange(8.0).reshape(4, 2), np.array([0, 1, 1, 0]), task)
        sub = ds.subset([2, 0])
        assert sub.n == 2
        assert sub.observation(0) == Observation((4.0, 5.0), 1)
        assert [z.y for z in ds.observations()] == [0, 1, 1, 0]
        with pytest.raises(EmptyDatasetError):
            ds.subset([])

    def test_from_observations_round_trip(self):
        task = ClassificationTask(("x", "y"))
        obs = [Observation((0.0, 1.0), "x"), Observation((2.0, 3.0), "y")]
        ds = Dataset.from_observations(obs, task)
        assert list(ds.observations()) == obs

    def test_split_config(self):
        assert SplitConfig(4, 2).n == 6
        with pytest.raises(OutOfRangeError):
            SplitConfig(0, 3)
        with pytest.raises(OutOfRangeError):
            SplitConfig(3, 0)


class TestPlausibilityTable:
    def test_lookup(self):
        table = PlausibilityTable(("a", "b"), (0.5, 1.25))
        assert table["b"] == 1.25
        assert table.as_dict() == {"a": 0.5, "b": 1.25}
        with pytest.raises(KeyError):
            table["c"]

    def test_validation(self):
        with pytest.raises(OutOfRangeError):
            PlausibilityTable(("a", "a"), (0.5, 0.5))
        with pytest.raises(NegativeEntryError):
            PlausibilityTable(("a",), (-1.0,))
        with pytest.raises(OutOfRangeError):
            PlausibilityTable(("a",), (0.5, 0.5))


class TestSeeding:
    def test_derive_seed_deterministic_and_distinct(self):
        assert derive_seed(3, 1, 4) == derive_seed(3, 1, 4)
        seen = {derive_seed(9, t, part) for t in range(200) for part in range(3)}
        assert len(seen) == 600
        assert all(0 <= s < 2**63 for s in seen)

    def test_spawn_rng_keyed(self):
        a = spawn_rng(5, 2).standard_normal(4)
        b = spawn_rng(5, 2).standard_normal(4)
        c = spawn_rng(5, 3).standard_normal(4)
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)
        with pytest.raises(OutOfRangeError):
            spawn_rng(-1)
