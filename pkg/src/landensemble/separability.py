"""Gaussian class-separability indices for band subsets.

Bhattacharyya distance::

    B = 1/8 dm' P^-1 dm + 1/2 ln( |P| / sqrt(|Sa| |Sb|) ),  P = (Sa + Sb) / 2

Divergence::

    D = 1/2 tr[(Sa - Sb)(Sb^-1 - Sa^-1)] + 1/2 tr[(Sa^-1 + Sb^-1) dm dm']

Transformed divergence::

    TD = scale * (1 - exp(-D / 8)),  scale = 2000 by default

All determinants and inverses go through Cholesky factors.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import DataError
from .stats import BandSubset, ClassStatistics, StatisticsSet, project_to_subset, regularize

TD_SCALE = 2000.0


class SeparabilityIndex(str, enum.Enum):
    BHATTACHARYYA = "bhattacharyya"
    DIVERGENCE = "divergence"
    TRANSFORMED_DIVERGENCE = "transformed_divergence"

    @classmethod
    def parse(cls, text: str) -> "SeparabilityIndex":
        key = text.strip().lower().replace("-", "_")
        aliases = {"b": "bhattacharyya", "d": "divergence", "td": "transformed_divergence"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            raise DataError(f"unknown separability index {text!r}") from None


class Aggregation(str, enum.Enum):
    MEAN = "mean"
    MIN = "min"


@dataclass(frozen=True)
class SeparabilityScore:
    index: SeparabilityIndex
    value: float


def _chol(c: np.ndarray):
    try:
        return cho_factor(c, lower=True)
    except np.linalg.LinAlgError:
        raise DataError("covariance is singular; regularize before scoring") from None


def _logdet(factor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(factor[0]))))


def _check_pair(a: ClassStatistics, b: ClassStatistics) -> None:
    if a.dim != b.dim:
        raise DataError("class statistics have different dimensions")


def bhattacharyya(a: ClassStatistics, b: ClassStatistics) -> float:
    _check_pair(a, b)
    dm = a.mean - b.mean
    pooled = (a.covariance + b.covariance) / 2.0
    fp = _chol(pooled)
    maha = float(dm @ cho_solve(fp, dm))
    logdet_term = _logdet(fp) - 0.5 * (_logdet(_chol(a.covariance)) + _logdet(_chol(b.covariance)))
    return max(maha / 8.0 + 0.5 * logdet_term, 0.0)


def divergence(a: ClassStatistics, b: ClassStatistics) -> float:
    _check_pair(a, b)
    eye = np.eye(a.dim)
    inv_a = cho_solve(_chol(a.covariance), eye)
    inv_b = cho_solve(_chol(b.covariance), eye)
    dm = a.mean - b.mean
    cov_term = np.trace((a.covariance - b.covariance) @ (inv_b - inv_a))
    mean_term = float(dm @ (inv_a + inv_b) @ dm)
    return max(0.5 * float(cov_term) + 0.5 * mean_term, 0.0)


def transformed_divergence_from(d: float, scale: float = TD_SCALE) -> float:
    return scale * (1.0 - np.exp(-d / 8.0))


def transformed_divergence(
    a: ClassStatistics, b: ClassStatistics, scale: float = TD_SCALE
) -> float:
    return transformed_divergence_from(divergence(a, b), scale)


def pairwise_index(
    a: ClassStatistics,
    b: ClassStatistics,
    idx: SeparabilityIndex,
    td_scale: float = TD_SCALE,
) -> float:
    if idx is SeparabilityIndex.BHATTACHARYYA:
        return bhattacharyya(a, b)
    if idx is SeparabilityIndex.DIVERGENCE:
        return divergence(a, b)
    return transformed_divergence(a, b, td_scale)


def multiclass_separability(
    s: StatisticsSet,
    b: BandSubset,
    idx: SeparabilityIndex,
    aggregation: Aggregation = Aggregation.MEAN,
    td_scale: float = TD_SCALE,
) -> SeparabilityScore:
    """Aggregate the pairwise index over all unordered class pairs of ``s``
    restricted to ``b`` (mean by default, optionally the minimum)."""
    if len(s) < 2:
        raise DataError("separability needs at least 2 classes")
    sub = regularize(project_to_subset(s, b))
    values = [
        pairwise_index(sub[i], sub[j], idx, td_scale)
        for i, j in itertools.combinations(range(len(sub)), 2)
    ]
    agg = min(values) if Aggregation(aggregation) is Aggregation.MIN else float(np.mean(values))
    return SeparabilityScore(idx, float(agg))
