"""Normalizing transformations from positive summaries to e-values.

Two variants ship. `sum_normalize` divides each summary by the total, so
the components sum to 1: every component is bounded by 1 and the mean is
1/m, which wastes a factor of m of evidence but keeps outputs on the
familiar unit scale. `mean_normalize` scales that by m, so the mean is
exactly 1 (the constraint is tight) and each component is bounded by m.
The mean variant is the default everywhere downstream.

Both are scale-invariant (multiplying all summaries by c > 0 changes
nothing) and permutation-equivariant at the bit level, because the total
is an exactly rounded sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Union

from .core import EValueVector, SummaryVector, make_e_vector
from .errors import NonPositiveSummaryError, OutOfRangeError

SummaryLike = Union[SummaryVector, Iterable[float]]


def _positive_values(sigma: SummaryLike) -> tuple:
    if isinstance(sigma, SummaryVector):
        values = sigma.values
    else:
        values = SummaryVector(tuple(sigma)).values
    if any(v <= 0 for v in values):
        raise NonPositiveSummaryError("summaries must be strictly positive")
    return values


def sum_normalize(sigma: SummaryLike) -> EValueVector:
    """alpha_i = sigma_i / sum(sigma); mean 1/m, each component <= 1."""
    values = _positive_values(sigma)
    total = math.fsum(values)
    return make_e_vector(tuple(v / total for v in values))


def mean_normalize(sigma: SummaryLike) -> EValueVector:
    """alpha_i = m * sigma_i / sum(sigma); mean exactly 1, components <= m."""
    values = _positive_values(sigma)
    m = len(values)
    total = math.fsum(values)
    return make_e_vector(tuple(v * m / total for v in values))


@dataclass(frozen=True)
class Normalizer:
    """Named normalizing transformation with a declared per-component bound.

    Subclasses may override `component_bound`; returning None declares the
    output unbounded, which the time-average harness refuses to run with.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in ("sum", "mean"):
            raise OutOfRangeError(f"unknown normalizer kind {self.kind!r}")

    def apply(self, sigma: SummaryLike) -> EValueVector:
        if self.kind == "sum":
            return sum_normalize(sigma)
        return mean_normalize(sigma)

    def component_bound(self, m: int) -> Optional[float]:
        """Upper bound on any output component for a length-m input."""
        if m < 1:
            raise OutOfRangeError("m must be positive")
        return 1.0 if self.kind == "sum" else float(m)


def get_normalizer(kind: Union[str, Normalizer]) -> Normalizer:
    """Resolve "sum"/"mean" to a Normalizer; instances pass through."""
    if isinstance(kind, Normalizer):
        return kind
    return Normalizer(kind)
