"""Split, cross, and full conformal e-predictors, plus p-value baselines.

The split predictor trains a conformity rule on the training set proper,
scores the calibration part once at fit time, and for a query (x, y)
normalizes the calibration summaries together with the candidate's summary;
the e-value reported for y is the last component. The cross predictor runs
one split predictor per fold (calibrating on the fold, training on its
complement) and merges fold e-values by an arithmetic mean, which keeps the
result an e-value. The full predictor applies an e-assignment to the
training sequence extended by the candidate example.

p-value counterparts are included for comparison experiments: the split
conformal p-value and the cross-conformal merge, whose arithmetic mean of
fold p-values needs the factor-2 adjustment to be usable at face value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .conformity import ConformityRule, train_conformity
from .core import (
    Dataset,
    EValueVector,
    FoldPartition,
    Observation,
    PlausibilityTable,
    SplitConfig,
    SummaryVector,
    complement_indices,
    make_e_vector,
    make_fold_partition,
)
from .errors import DimensionMismatchError, NonFiniteEntryError, OutOfRangeError
from .normalize import Normalizer, get_normalizer

WEIGHTINGS = ("uniform", "size_proportional")


@dataclass(frozen=True, eq=False)
class SplitEPredictor:
    """Fitted split predictor; query cost is one rule evaluation per label."""

    rule: ConformityRule
    calibration_summaries: SummaryVector
    normalizer: Normalizer
    split: SplitConfig
    task: object

    def _sigmas(self, x: Sequence[float], labels: Sequence) -> np.ndarray:
        X = np.tile(np.asarray(x, dtype=float), (len(labels), 1))
        return np.asarray(self.rule.score_many(X, list(labels)), dtype=float)

    def _alpha_last(self, sigma_y: float) -> float:
        joint = self.normalizer.apply((*self.calibration_summaries.values, sigma_y))
        return joint.values[-1]

    def sigma_at(self, x: Sequence[float], y) -> float:
        """Conformity summary of the candidate example (x, y)."""
        return float(self._sigmas(x, (y,))[0])

    def alphas_at(self, x: Sequence[float], y) -> EValueVector:
        """Full normalized vector (alpha_1..alpha_c, alpha_y) for one candidate."""
        return self.normalizer.apply((*self.calibration_summaries.values, self.sigma_at(x, y)))

    def e_at(self, x: Sequence[float], y) -> float:
        """E-value of candidate label y at object x."""
        return self._alpha_last(float(self._sigmas(x, (y,))[0]))

    def predict(self, x: Sequence[float], labels: Optional[Sequence] = None) -> PlausibilityTable:
        labels = tuple(self.task.candidates if labels is None else labels)
        sigmas = self._sigmas(x, labels)
        return PlausibilityTable(labels, tuple(self._alpha_last(float(s)) for s in sigmas))

    def p_at(self, x: Sequence[float], y) -> float:
        """Split conformal p-value: (#{sigma_i <= sigma_y} + 1) / (c + 1)."""
        sigma_y = float(self._sigmas(x, (y,))[0])
        cal = np.asarray(self.calibration_summaries.values)
        return (int(np.count_nonzero(cal <= sigma_y)) + 1) / (len(cal) + 1)

    def p_predict(self, x: Sequence[float], labels: Optional[Sequence] = None) -> dict:
        labels = tuple(self.task.candidates if labels is None else labels)
        return {y: self.p_at(x, y) for y in labels}


def fit_split(
    proper: Dataset,
    calibration: Dataset,
    kind: str = "knn",
    normalizer: Union[str, Normalizer] = "mean",
    **rule_params,
) -> SplitEPredictor:
    """Train on the proper part, pre-score the calibration part once."""
    if proper.task != calibration.task:
        raise OutOfRangeError("proper and calibration parts must share one task")
    if proper.dim != calibration.dim:
        raise DimensionMismatchError(
            f"proper has {proper.dim} features, calibration {calibration.dim}"
        )
    rule = train_conformity(kind, proper, **rule_params)
    summaries = SummaryVector(tuple(float(v) for v in rule.score_many(calibration.X, calibration.y)))
    return SplitEPredictor(
        rule,
        summaries,
        get_normalizer(normalizer),
        SplitConfig(proper.n, calibration.n),
        proper.task,
    )


@dataclass(frozen=True, eq=False)
class CrossEPredictor:
    """K split predictors, one per fold, merged by an arithmetic mean.

    weighting "uniform" averages fold e-values by 1/K; "size_proportional"
    weights each fold by its size over n (identical when folds are equal).
    Either way the merge is a convex combination of e-values, so validity
    survives the merge.
    """

    partition: FoldPartition
    fold_predictors: tuple
    weighting: str = "uniform"

    def __post_init__(self):
        if self.weighting not in WEIGHTINGS:
            raise OutOfRangeError(f"weighting must be one of {WEIGHTINGS}")
        if len(self.fold_predictors) != self.partition.K:
            raise OutOfRangeError("need exactly one fold predictor per fold")

    @property
    def K(self) -> int:
        return self.partition.K

    @property
    def task(self):
        return self.fold_predictors[0].task

    def _merge(self, fold_alphas: Sequence[float]) -> float:
        if self.weighting == "uniform":
            return math.fsum(fold_alphas) / self.K
        sizes = (len(fold) for fold in self.partition.folds)
        return math.fsum(s * a for s, a in zip(sizes, fold_alphas)) / self.partition.n

    def fold_e_at(self, x: Sequence[float], y) -> tuple:
        return tuple(fp.e_at(x, y) for fp in self.fold_predictors)

    def e_at(self, x: Sequence[float], y) -> float:
        return self._merge(self.fold_e_at(x, y))

    def fold_tables(self, x: Sequence[float], labels: Optional[Sequence] = None) -> tuple:
        labels = tuple(self.task.candidates if labels is None else labels)
        return tuple(fp.predict(x, labels) for fp in self.fold_predictors)

    def predict(self, x: Sequence[float], labels: Optional[Sequence] = None) -> PlausibilityTable:
        labels = tuple(self.task.candidates if labels is None else labels)
        tables = self.fold_tables(x, labels)
        merged = tuple(
            self._merge(tuple(t.values[i] for t in tables)) for i in range(len(labels))
        )
        return PlausibilityTable(labels, merged)

    def fold_p_at(self, x: Sequence[float], y) -> tuple:
        return tuple(fp.p_at(x, y) for fp in self.fold_predictors)


def fit_cross_from_partition(
    training: Dataset,
    partition: FoldPartition,
    kind: str = "knn",
    normalizer: Union[str, Normalizer] = "mean",
    weighting: str = "uniform",
    **rule_params,
) -> CrossEPredictor:
    """Per fold k: calibrate on S_k, train on everything else."""
    if partition.n != training.n:
        raise OutOfRangeError("partition size must match the training set")
    predictors = []
    for k in range(1, partition.K + 1):
        proper = training.subset(complement_indices(partition, k))
        calibration = training.subset(partition.fold(k))
        predictors.append(fit_split(proper, calibration, kind, normalizer, **rule_params))
    return CrossEPredictor(partition, tuple(predictors), weighting)


def fit_cross(
    training: Dataset,
    K: int,
    seed: int,
    kind: str = "knn",
    normalizer: Union[str, Normalizer] = "mean",
    weighting: str = "uniform",
    **rule_params,
) -> CrossEPredictor:
    """Partition the training set into K seeded folds and fit per fold."""
    partition = make_fold_partition(training.n, K, seed)
    return fit_cross_from_partition(training, partition, kind, normalizer, weighting, **rule_params)


@dataclass(frozen=True, eq=False)
class FullEPredictor:
    """Applies an e-assignment to the training sequence plus the candidate.

    The assignment maps a finite observation sequence to an EValueVector of
    the same length; the candidate example goes last, and its component is
    the reported e-value.
    """

    training: Dataset
    assignment: Callable[[Sequence[Observation]], EValueVector]

    def __post_init__(self):
        object.__setattr__(self, "_observations", tuple(self.training.observations()))

    @property
    def task(self):
        return self.training.task

    def vector_at(self, x: Sequence[float], y) -> EValueVector:
        """Assignment over the extended sequence; the candidate is last."""
        extended = (*self._observations, Observation(tuple(x), y))
        return self.assignment(extended)

    def e_at(self, x: Sequence[float], y) -> float:
        return float(self.vector_at(x, y).values[-1])

    def predict(self, x: Sequence[float], labels: Optional[Sequence] = None) -> PlausibilityTable:
        labels = tuple(self.task.candidates if labels is None else labels)
        return PlausibilityTable(labels, tuple(self.e_at(x, y) for y in labels))


def full_conformal_e_predict(
    training: Dataset,
    x: Sequence[float],
    labels: Sequence,
    assignment: Callable[[Sequence[Observation]], EValueVector],
) -> PlausibilityTable:
    """One-shot full conformal prediction at object x over candidate labels."""
    return FullEPredictor(training, assignment).predict(x, labels)


def split_predict(
    predictor: SplitEPredictor, x: Sequence[float], labels: Optional[Sequence] = None
) -> PlausibilityTable:
    return predictor.predict(x, labels)


def split_p_predict(
    predictor: SplitEPredictor, x: Sequence[float], labels: Optional[Sequence] = None
) -> dict:
    return predictor.p_predict(x, labels)


def cross_predict(
    predictor: CrossEPredictor, x: Sequence[float], labels: Optional[Sequence] = None
) -> PlausibilityTable:
    return predictor.predict(x, labels)


def cross_p_merge(p_values: Sequence[float], adjusted: bool = True) -> float:
    """Arithmetic mean of fold p-values, doubled and capped by default.

    The unadjusted mean (adjusted=False) is exposed for comparison but is
    not a p-value in general; the factor-2 version is.
    """
    ps = [float(p) for p in p_values]
    if not ps:
        raise OutOfRangeError("no p-values to merge")
    for p in ps:
        if not 0.0 < p <= 1.0:
            raise OutOfRangeError(f"p-value {p} not in (0, 1]")
    mean = math.fsum(ps) / len(ps)
    return min(1.0, 2.0 * mean) if adjusted else mean


def p_to_e(p: float) -> float:
    """Calibrate a p-value into an e-value: e = 1/p."""
    p = float(p)
    if not 0.0 < p <= 1.0:
        raise OutOfRangeError(f"p-value {p} not in (0, 1]")
    return 1.0 / p


def e_to_p(e: float) -> float:
    """Calibrate an e-value into a p-value: p = min(1, 1/e)."""
    e = float(e)
    if not math.isfinite(e) or e < 0.0:
        raise OutOfRangeError(f"e-value {e} must be finite and nonnegative")
    if e == 0.0:
        return 1.0
    return min(1.0, 1.0 / e)


def harmonic_mean(values: Sequence[float]) -> float:
    """Harmonic mean; zero if any entry is zero. Never beats the arithmetic mean."""
    vals = [float(v) for v in values]
    if not vals:
        raise OutOfRangeError("empty sequence")
    if not all(math.isfinite(v) for v in vals):
        raise NonFiniteEntryError("entries must be finite")
    if any(v < 0 for v in vals):
        raise OutOfRangeError("harmonic mean needs nonnegative entries")
    if any(v == 0 for v in vals):
        return 0.0
    return len(vals) / math.fsum(1.0 / v for v in vals)


def e_prediction_set(
    table: PlausibilityTable,
    epsilon: float,
    threshold: Union[None, float, Callable[[float], float]] = None,
) -> tuple:
    """Labels whose e-value strictly exceeds the threshold t(epsilon).

    threshold None means t = epsilon; a float is used as-is; a callable is
    evaluated at epsilon. t must be nonnegative (t = 0 keeps every label
    with positive plausibility).
    """
    eps = float(epsilon)
    if not 0.0 < eps < 1.0:
        raise OutOfRangeError(f"epsilon {eps} not in (0, 1)")
    if threshold is None:
        t = eps
    elif callable(threshold):
        t = float(threshold(eps))
    else:
        t = float(threshold)
    if not math.isfinite(t) or t < 0.0:
        raise OutOfRangeError(f"threshold {t} must be finite and nonnegative")
    return tuple(lab for lab, v in zip(table.labels, table.values) if v > t)


@dataclass(frozen=True)
class OnlineTrace:
    """Realized e-values at the true labels and their prefix averages."""

    e_values: tuple
    running_means: tuple

    def __post_init__(self):
        if len(self.e_values) != len(self.running_means) or not self.e_values:
            raise OutOfRangeError("trace components must align and be non-empty")

    @classmethod
    def from_e_values(cls, e_values: Sequence[float]) -> "OnlineTrace":
        es = tuple(float(e) for e in e_values)
        if any(not math.isfinite(e) or e < 0 for e in es):
            raise OutOfRangeError("e-values must be finite and nonnegative")
        means = tuple(math.fsum(es[: i + 1]) / (i + 1) for i in range(len(es)))
        return cls(es, means)

    def __len__(self) -> int:
        return len(self.e_values)
