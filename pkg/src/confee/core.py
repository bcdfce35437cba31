"""Domain types, e-vector invariants, fold partitioning, seeded randomness.

Everything here is immutable after construction and safe to share across
threads. Observation indices are 0-based throughout; fold numbers are
1-based to match the usual S_1..S_K naming in reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence, Union

import numpy as np

from .errors import (
    AverageExceedsOneError,
    EmptyDatasetError,
    FoldIndexOutOfRangeError,
    LabelOutOfSpaceError,
    NegativeEntryError,
    NonFiniteEntryError,
    OutOfRangeError,
    TooFewFoldsError,
    TooFewObservationsError,
)

#: Slack on the mean-at-most-one constraint; absorbs float summation error.
E_MEAN_TOLERANCE = 1e-12


def _seed_sequence(parts) -> np.random.SeedSequence:
    key = tuple(int(p) for p in parts)
    if any(p < 0 for p in key):
        raise OutOfRangeError(f"seed parts must be nonnegative, got {key}")
    return np.random.SeedSequence(key)


def derive_seed(*parts: int) -> int:
    """Mix integer key parts into a single 63-bit seed, deterministically.

    Used to give every trial, observation, and fold split its own
    independent stream from one master seed.
    """
    return int(_seed_sequence(parts).generate_state(1, np.uint64)[0] >> np.uint64(1))


def spawn_rng(*parts: int) -> np.random.Generator:
    """Deterministic generator keyed by a tuple of integers."""
    return np.random.default_rng(_seed_sequence(parts))


def _py_scalar(value):
    """numpy scalar -> plain Python scalar; anything else passes through."""
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass(frozen=True)
class ClassificationTask:
    """Finite label set; the tuple order fixes reporting order."""

    labels: tuple

    def __post_init__(self):
        labels = tuple(_py_scalar(v) for v in self.labels)
        if not labels:
            raise OutOfRangeError("classification task needs at least one label")
        if len(set(labels)) != len(labels):
            raise OutOfRangeError("duplicate labels in classification task")
        object.__setattr__(self, "labels", labels)

    @property
    def candidates(self) -> tuple:
        return self.labels

    def contains(self, label) -> bool:
        return _py_scalar(label) in self.labels


@dataclass(frozen=True)
class RegressionTask:
    """Real-valued labels, evaluated on a finite strictly increasing grid."""

    grid: tuple

    def __post_init__(self):
        grid = tuple(float(g) for g in self.grid)
        if not grid:
            raise OutOfRangeError("regression grid is empty")
        if not all(math.isfinite(g) for g in grid):
            raise NonFiniteEntryError("regression grid must be finite")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise OutOfRangeError("regression grid must be strictly increasing")
        object.__setattr__(self, "grid", grid)

    @property
    def candidates(self) -> tuple:
        return self.grid

    def contains(self, label) -> bool:
        try:
            return math.isfinite(float(label))
        except (TypeError, ValueError):
            return False


Task = Union[ClassificationTask, RegressionTask]


@dataclass(frozen=True)
class Observation:
    """One labelled example: finite feature vector plus label."""

    x: tuple
    y: object

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        if not all(math.isfinite(v) for v in x):
            raise NonFiniteEntryError("feature vector must be finite")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", _py_scalar(self.y))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered observations sharing one task.

    X is an (n, d) float array, y the matching labels. Both are frozen
    (writeable=False) on construction; n >= 1 always holds.
    """

    X: np.ndarray
    y: np.ndarray
    task: Task

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2:
            raise OutOfRangeError(f"X must be 2-D, got shape {X.shape}")
        if X.shape[0] == 0:
            raise EmptyDatasetError("dataset has no observations")
        if not np.isfinite(X).all():
            raise NonFiniteEntryError("features must be finite")
        if isinstance(self.task, RegressionTask):
            y = np.array(self.y, dtype=float)
            if y.shape != (X.shape[0],) or not np.isfinite(y).all():
                raise NonFiniteEntryError("labels must be n finite reals")
        else:
            y = np.array(np.asarray(self.y).ravel())
            if y.shape != (X.shape[0],):
                raise OutOfRangeError("y length must match X")
            if y.dtype.kind in "iu" and all(isinstance(v, int) for v in self.task.labels):
                ok = np.isin(y, np.asarray(self.task.labels)).all()
            else:
                ok = all(self.task.contains(v) for v in y)
            if not ok:
                bad = next(v for v in y if not self.task.contains(v))
                raise LabelOutOfSpaceError(f"label {_py_scalar(bad)!r} not in task labels")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def observation(self, i: int) -> Observation:
        return Observation(tuple(self.X[i]), _py_scalar(self.y[i]))

    def observations(self) -> Iterator[Observation]:
        for i in range(self.n):
            yield self.observation(i)

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(list(indices), dtype=int)
        if idx.size == 0:
            raise EmptyDatasetError("subset selects no observations")
        return Dataset(self.X[idx], self.y[idx], self.task)

    @classmethod
    def from_observations(cls, observations: Sequence[Observation], task: Task) -> "Dataset":
        obs = list(observations)
        if not obs:
            raise EmptyDatasetError("no observations given")
        X = np.array([o.x for o in obs], dtype=float)
        return cls(X, np.array([o.y for o in obs]), task)


@dataclass(frozen=True)
class SummaryVector:
    """Conformity summaries (sigma_1, ..., sigma_m); finite, non-empty."""

    values: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise OutOfRangeError("summary vector is empty")
        if not all(math.isfinite(v) for v in values):
            raise NonFiniteEntryError("summaries must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class EValueVector:
    """Nonnegative values averaging to at most one.

    Construction of any violating sequence fails, so holding an
    EValueVector is proof the constraint was checked. The mean uses an
    exactly rounded sum, making the check independent of input order.
    """

    values: tuple

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        if not values:
            raise OutOfRangeError("e-vector is empty")
        if not all(math.isfinite(v) for v in values):
            raise NonFiniteEntryError("e-values must be finite")
        if any(v < 0 for v in values):
            raise NegativeEntryError("e-values must be nonnegative")
        mean = math.fsum(values) / len(values)
        if mean > 1.0 + E_MEAN_TOLERANCE:
            raise AverageExceedsOneError(f"mean {mean} exceeds 1")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def mean(self) -> float:
        return math.fsum(self.values) / len(self.values)


def make_e_vector(values: Sequence[float]) -> EValueVector:
    """Validate a candidate e-vector; raises if any invariant fails."""
    return EValueVector(tuple(values))


@dataclass(frozen=True)
class PlausibilityTable:
    """Candidate label -> e-value for one test object."""

    labels: tuple
    values: tuple

    def __post_init__(self):
        labels = tuple(_py_scalar(v) for v in self.labels)
        values = tuple(float(v) for v in self.values)
        if len(labels) != len(values) or not labels:
            raise OutOfRangeError("labels and values must align and be non-empty")
        if len(set(labels)) != len(labels):
            raise OutOfRangeError("duplicate candidate labels")
        if not all(math.isfinite(v) for v in values):
            raise NonFiniteEntryError("table values must be finite")
        if any(v < 0 for v in values):
            raise NegativeEntryError("table values must be nonnegative")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "values", values)

    def __getitem__(self, label) -> float:
        label = _py_scalar(label)
        for cand, value in zip(self.labels, self.values):
            if cand == label:
                return value
        raise KeyError(label)

    def as_dict(self) -> dict:
        return dict(zip(self.labels, self.values))


@dataclass(frozen=True)
class SplitConfig:
    """Sizes of the two parts of a split training set."""

    proper_size: int
    calibration_size: int

    def __post_init__(self):
        if self.proper_size < 1 or self.calibration_size < 1:
            raise OutOfRangeError("both split parts need at least one observation")

    @property
    def n(self) -> int:
        return self.proper_size + self.calibration_size


@dataclass(frozen=True)
class FoldPartition:
    """Disjoint folds covering 0..n-1 with sizes differing by at most one.

    folds[k] holds the 0-based observation indices of fold k+1 (fold
    numbers are 1-based in the API).
    """

    folds: tuple
    n: int
    seed: int

    def __post_init__(self):
        folds = tuple(tuple(int(i) for i in fold) for fold in self.folds)
        if len(folds) < 2:
            raise TooFewFoldsError("need at least two folds")
        if any(not fold for fold in folds):
            raise TooFewObservationsError("every fold needs at least one observation")
        flat = sorted(i for fold in folds for i in fold)
        if flat != list(range(self.n)):
            raise OutOfRangeError("folds must partition 0..n-1 exactly")
        sizes = [len(fold) for fold in folds]
        if max(sizes) - min(sizes) > 1:
            raise OutOfRangeError(f"fold sizes {sizes} differ by more than one")
        object.__setattr__(self, "folds", folds)

    @property
    def K(self) -> int:
        return len(self.folds)

    def fold(self, k: int) -> tuple:
        """Indices of fold k (1-based)."""
        if not 1 <= k <= self.K:
            raise FoldIndexOutOfRangeError(f"fold {k} not in 1..{self.K}")
        return self.folds[k - 1]


def make_fold_partition(n: int, K: int, seed: int) -> FoldPartition:
    """Randomly partition 0..n-1 into K balanced folds.

    Permutes the indices under the seed and slices contiguously; the first
    n mod K folds get the extra observation. Identical (n, K, seed) give an
    identical partition.
    """
    if K < 2:
        raise TooFewFoldsError(f"K={K}; need at least 2")
    if n < K:
        raise TooFewObservationsError(f"n={n} observations cannot fill K={K} folds")
    if seed < 0:
        raise OutOfRangeError("seed must be nonnegative")
    perm = np.random.default_rng(seed).permutation(n)
    base, extra = divmod(n, K)
    folds = []
    start = 0
    for k in range(K):
        size = base + (1 if k < extra else 0)
        folds.append(tuple(int(i) for i in perm[start:start + size]))
        start += size
    return FoldPartition(tuple(folds), n, seed)


def complement_indices(partition: FoldPartition, k: int) -> tuple:
    """All observation indices outside fold k (1-based), sorted."""
    held_out = set(partition.fold(k))
    return tuple(i for i in range(partition.n) if i not in held_out)
