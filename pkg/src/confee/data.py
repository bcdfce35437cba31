"""Seeded synthetic scenarios and CSV round-tripping.

Sampling derives observation i's randomness from the key (seed, i), so a
longer sample extends a shorter one unchanged, and the draw for any single
observation can be reproduced in isolation.

CSV format: header x1,...,xd,y then one observation per row. Floats are
written with repr, so a save/load round trip is exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .core import ClassificationTask, Dataset, RegressionTask, Task, spawn_rng
from .errors import (
    InvalidScenarioError,
    LabelOutOfSpaceError,
    OutOfRangeError,
    ParseError,
    RaggedRowsError,
)

SCENARIO_KINDS = ("gaussian_mixture", "linear_regression")

#: Key part separating the regression weight draw from observation draws.
_WEIGHT_TAG = 1_000_003


@dataclass(frozen=True)
class Scenario:
    """Parametric data-generating process with its own structural seed.

    gaussian_mixture: `classes` isotropic unit-variance Gaussians in
    `dim` dimensions, class means spaced so adjacent means sit
    `separation` apart; labels are 0..classes-1. linear_regression:
    standard normal features, y = w.x + noise_sd * N(0, 1), with w drawn
    once from the scenario seed; labels live on `grid` for prediction.
    """

    kind: str
    classes: int = 2
    dim: int = 2
    separation: float = 3.0
    noise_sd: float = 1.0
    grid: tuple = ()
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise InvalidScenarioError(f"kind must be one of {SCENARIO_KINDS}")
        if self.dim < 1:
            raise InvalidScenarioError("dim must be at least 1")
        if self.seed < 0:
            raise InvalidScenarioError("seed must be nonnegative")
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        if self.kind == "gaussian_mixture":
            if self.classes < 2:
                raise InvalidScenarioError("mixture needs at least 2 classes")
            if not (math.isfinite(self.separation) and self.separation > 0):
                raise InvalidScenarioError("separation must be positive and finite")
        else:
            if not (math.isfinite(self.noise_sd) and self.noise_sd >= 0):
                raise InvalidScenarioError("noise_sd must be nonnegative and finite")
            if not self.grid:
                raise InvalidScenarioError("linear_regression needs a label grid")
            RegressionTask(self.grid)  # validates ordering/finiteness

    @property
    def task(self) -> Task:
        if self.kind == "gaussian_mixture":
            return ClassificationTask(tuple(range(self.classes)))
        return RegressionTask(self.grid)

    def class_means(self) -> np.ndarray:
        """Mixture means, adjacent ones `separation` apart.

        In dim >= 2 the means sit on a circle in the first two coordinates
        (radius separation / (2 sin(pi/C))); in dim 1 they sit on a line.
        """
        if self.kind != "gaussian_mixture":
            raise InvalidScenarioError("class_means applies to gaussian_mixture only")
        means = np.zeros((self.classes, self.dim))
        if self.dim == 1:
            means[:, 0] = np.arange(self.classes) * self.separation
            return means
        radius = self.separation / (2.0 * math.sin(math.pi / self.classes))
        angles = 2.0 * math.pi * np.arange(self.classes) / self.classes
        means[:, 0] = radius * np.cos(angles)
        means[:, 1] = radius * np.sin(angles)
        return means

    def weights(self) -> np.ndarray:
        """Regression weight vector, a pure function of the scenario seed."""
        if self.kind != "linear_regression":
            raise InvalidScenarioError("weights applies to linear_regression only")
        return spawn_rng(self.seed, _WEIGHT_TAG).standard_normal(self.dim)

    def with_seed(self, seed: int) -> "Scenario":
        return replace(self, seed=seed)


def sample(scenario: Scenario, n: int, seed: int) -> Dataset:
    """Draw n IID observations; observation i uses only the key (seed, i)."""
    if n < 1:
        raise OutOfRangeError(f"n={n}; need at least one observation")
    if seed < 0:
        raise OutOfRangeError("seed must be nonnegative")
    task = scenario.task
    X = np.empty((n, scenario.dim))
    if scenario.kind == "gaussian_mixture":
        means = scenario.class_means()
        labels = np.empty(n, dtype=int)
        for i in range(n):
            rng = spawn_rng(seed, i)
            c = int(rng.integers(scenario.classes))
            X[i] = means[c] + rng.standard_normal(scenario.dim)
            labels[i] = c
        return Dataset(X, labels, task)
    w = scenario.weights()
    y = np.empty(n)
    for i in range(n):
        rng = spawn_rng(seed, i)
        X[i] = rng.standard_normal(scenario.dim)
        y[i] = float(w @ X[i]) + scenario.noise_sd * rng.standard_normal()
    return Dataset(X, y, task)


SCENARIO_PRESETS = {
    "gm2d": Scenario("gaussian_mixture", classes=2, dim=2, separation=3.0),
    "gm2d_hard": Scenario("gaussian_mixture", classes=2, dim=2, separation=1.0),
    "gm5c": Scenario("gaussian_mixture", classes=5, dim=2, separation=3.0),
    "linreg10": Scenario(
        "linear_regression", dim=10, noise_sd=1.0, grid=tuple(np.linspace(-15.0, 15.0, 31))
    ),
    "linreg3": Scenario(
        "linear_regression", dim=3, noise_sd=0.5, grid=tuple(np.linspace(-8.0, 8.0, 33))
    ),
}


def get_scenario(name: str) -> Scenario:
    try:
        return SCENARIO_PRESETS[name]
    except KeyError:
        raise InvalidScenarioError(
            f"unknown scenario {name!r}; known: {sorted(SCENARIO_PRESETS)}"
        ) from None


def _format_label(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_rows(dataset: Dataset, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow([f"x{j + 1}" for j in range(dataset.dim)] + ["y"])
    for i in range(dataset.n):
        row = [repr(float(v)) for v in dataset.X[i]]
        row.append(_format_label(dataset.observation(i).y))
        writer.writerow(row)


def save_csv(dataset: Dataset, path) -> None:
    """Write header x1..xd,y then one row per observation; floats via repr.

    `path` may also be an open text stream (the CLI hands sys.stdout in).
    """
    if hasattr(path, "write"):
        _write_rows(dataset, path)
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        _write_rows(dataset, fh)


def load_csv(path, task: Task) -> Dataset:
    """Read an x1..xd,y file back into a Dataset under the given task.

    Classification labels are matched by string form against the task's
    label set; anything else raises LabelOutOfSpaceError with the line.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(1, "header", "file is empty")
    header = [h.strip() for h in rows[0]]
    d = len(header) - 1
    expected = [f"x{j + 1}" for j in range(d)] + ["y"]
    if d < 1 or header != expected:
        raise ParseError(1, "header", f"expected {','.join(expected) if d >= 1 else 'x1..xd,y'}, got {','.join(header)}")

    label_map: Optional[dict] = None
    if isinstance(task, ClassificationTask):
        label_map = {str(lab): lab for lab in task.labels}

    X = np.empty((len(rows) - 1, d))
    labels = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != d + 1:
            raise RaggedRowsError(r, d + 1, len(row))
        for j, token in enumerate(row[:d]):
            try:
                value = float(token)
            except ValueError:
                raise ParseError(r, f"x{j + 1}", f"not a number: {token!r}") from None
            if not math.isfinite(value):
                raise ParseError(r, f"x{j + 1}", f"non-finite value {token!r}")
            X[r - 2, j] = value
        token = row[d]
        if label_map is not None:
            if token not in label_map:
                raise LabelOutOfSpaceError(f"line {r}: label {token!r} not in task labels")
            labels.append(label_map[token])
        else:
            try:
                y = float(token)
            except ValueError:
                raise ParseError(r, "y", f"not a number: {token!r}") from None
            if not math.isfinite(y):
                raise ParseError(r, "y", f"non-finite value {token!r}")
            labels.append(y)
    return Dataset(X, np.array(labels), task)
