"""Accuracy assessment, kappa agreement, pairwise-kappa diversity, proportion
Z-tests and Pearson correlation."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .io import ClassificationMap

Z_CRITICAL = 1.96


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are reference classes, columns predicted classes."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise DataError("confusion matrix must be square")
        if (counts < 0).any():
            raise DataError("confusion counts must be non-negative")
        if counts.sum() == 0:
            raise DataError("confusion matrix is empty")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class DiversitySummary:
    pairwise_kappas: tuple[float, ...]
    mean: float
    variance: float


@dataclass(frozen=True)
class ZTestResult:
    z: float
    significant: bool


def confusion_matrix(predicted, reference, k: int) -> ConfusionMatrix:
    predicted = np.asarray(predicted, dtype=np.int64).ravel()
    reference = np.asarray(reference, dtype=np.int64).ravel()
    if predicted.shape != reference.shape:
        raise DataError("predicted and reference lengths differ")
    if predicted.size == 0:
        raise DataError("no samples to cross-tabulate")
    for arr in (predicted, reference):
        if arr.min() < 0 or arr.max() >= k:
            raise DataError(f"label outside 0..{k - 1}")
    counts = np.bincount(reference * k + predicted, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts)


def overall_accuracy(c: ConfusionMatrix) -> float:
    return float(np.trace(c.counts)) / c.n


def kappa(c: ConfusionMatrix) -> float:
    n = c.n
    p_o = float(np.trace(c.counts)) / n
    rows = c.counts.sum(axis=1)
    cols = c.counts.sum(axis=0)
    # integer marginal products keep p_e exact before the final division
    p_e = int(np.dot(rows, cols)) / (n * n)
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1.0 - p_e)


def pairwise_kappa(
    a: ClassificationMap, b: ClassificationMap, mask: np.ndarray | None = None
) -> float:
    """Kappa of the cross-tabulation of two maps, optionally restricted to
    the flat pixel indices in ``mask``."""
    if a.labels.shape != b.labels.shape:
        raise DataError("maps are on different grids")
    if a.legend != b.legend:
        raise DataError("maps use different legends")
    la, lb = a.labels.ravel(), b.labels.ravel()
    if mask is not None:
        la, lb = la[mask], lb[mask]
    return kappa(confusion_matrix(lb, la, len(a.legend)))


def diversity_from_labels(label_sets: Sequence[np.ndarray], k: int) -> DiversitySummary:
    if len(label_sets) < 2:
        raise DataError("diversity needs at least 2 classifiers")
    kappas = tuple(
        kappa(confusion_matrix(label_sets[j], label_sets[i], k))
        for i, j in itertools.combinations(range(len(label_sets)), 2)
    )
    arr = np.array(kappas)
    mean = float(arr.mean())
    return DiversitySummary(kappas, mean, float(np.mean((arr - mean) ** 2)))


def diversity_summary(
    base_maps: Sequence[ClassificationMap], mask: np.ndarray | None = None
) -> DiversitySummary:
    """Mean and population variance of the C(m, 2) pairwise kappas, pairs in
    lexicographic order."""
    if len(base_maps) < 2:
        raise DataError("diversity needs at least 2 base maps")
    first = base_maps[0]
    for m in base_maps[1:]:
        if m.labels.shape != first.labels.shape or m.legend != first.legend:
            raise DataError("base maps must share grid and legend")
    labels = [m.labels.ravel() if mask is None else m.labels.ravel()[mask] for m in base_maps]
    return diversity_from_labels(labels, len(first.legend))


def z_test(p1: float, n1: int, p2: float, n2: int) -> ZTestResult:
    """Two-proportion Z statistic for a difference in overall accuracy."""
    if n1 < 1 or n2 < 1:
        raise DataError("sample sizes must be >= 1")
    if not (0.0 <= p1 <= 1.0 and 0.0 <= p2 <= 1.0):
        raise DataError("accuracies must lie in [0, 1]")
    var = p1 * (1.0 - p1) / n1 + p2 * (1.0 - p2) / n2
    if var == 0.0:
        if p1 == p2:
            return ZTestResult(0.0, False)
        return ZTestResult(math.copysign(math.inf, p1 - p2), True)
    z = (p1 - p2) / math.sqrt(var)
    return ZTestResult(z, abs(z) > Z_CRITICAL)


def pearson_correlation(xs: Sequence[float], ys: Sequence[float]) -> float:
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DataError("correlation inputs must be equal-length vectors")
    if x.size < 2:
        raise DataError("correlation needs at least 2 points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if sxx == 0.0 or syy == 0.0:
        raise DataError("correlation is undefined for a constant input")
    r = float(dx @ dy) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))
