"""Plurality-vote fusion of base classification maps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .io import ClassificationMap
from .search import EnsembleConfig


@dataclass(frozen=True)
class EnsembleRun:
    config: EnsembleConfig
    base_maps: tuple[ClassificationMap, ...]
    fused: ClassificationMap


def majority_vote_pixel(labels: Sequence[int]) -> int:
    """Most frequent label; ties go to the lowest class id."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size == 0:
        raise DataError("cannot vote over an empty label list")
    if labels.min() < 0:
        raise DataError("labels must be non-negative")
    return int(np.argmax(np.bincount(labels)))


def majority_vote(label_stack: np.ndarray, n_classes: int) -> np.ndarray:
    """Vectorized vote over axis 0 of an ``(m, ...)`` integer stack."""
    stack = np.asarray(label_stack, dtype=np.int64)
    if stack.shape[0] == 0:
        raise DataError("cannot vote over zero voters")
    counts = np.zeros((n_classes,) + stack.shape[1:], dtype=np.int64)
    for voter in stack:
        for c in range(n_classes):
            counts[c] += voter == c
    return np.argmax(counts, axis=0)


def fuse_maps(base_maps: Sequence[ClassificationMap]) -> ClassificationMap:
    if not base_maps:
        raise DataError("no base maps to fuse")
    first = base_maps[0]
    for m in base_maps[1:]:
        if m.labels.shape != first.labels.shape:
            raise DataError("base maps differ in dimensions")
        if m.legend != first.legend:
            raise DataError("base maps differ in legend")
    stack = np.stack([m.labels for m in base_maps])
    return ClassificationMap(majority_vote(stack, len(first.legend)), first.legend)
