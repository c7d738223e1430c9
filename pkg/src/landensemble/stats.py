"""Per-class Gaussian statistics: estimation, band projection, regularization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .io import ClassLegend, SampleSet

_REG_BASE = 1e-6
_REG_RETRIES = 4


@dataclass(frozen=True)
class BandSubset:
    """Strictly increasing, 0-based band indices."""

    bands: tuple[int, ...]

    def __post_init__(self):
        bands = tuple(int(b) for b in self.bands)
        if not bands:
            raise DataError("band subset is empty")
        if any(b < 0 for b in bands):
            raise DataError("band indices must be non-negative")
        if any(b >= a for b, a in zip(bands, bands[1:])) or len(set(bands)) != len(bands):
            raise DataError("band indices must be unique and strictly increasing")
        object.__setattr__(self, "bands", bands)

    @property
    def k(self) -> int:
        return len(self.bands)

    def check(self, n_bands: int) -> None:
        if self.bands[-1] >= n_bands:
            raise DataError(f"band index {self.bands[-1]} out of range for {n_bands} bands")

    def label(self) -> str:
        """1-based, comma-joined band names, e.g. ``3,5,6``."""
        return ",".join(str(b + 1) for b in self.bands)

    @classmethod
    def parse(cls, text: str, one_based: bool = True, sep: str = ",") -> "BandSubset":
        try:
            vals = [int(t) for t in text.replace("|", sep).split(sep) if t.strip()]
        except ValueError:
            raise DataError(f"cannot parse band list {text!r}") from None
        offset = 1 if one_based else 0
        return cls(tuple(sorted(v - offset for v in vals)))


@dataclass(frozen=True)
class ClassStatistics:
    class_id: int
    count: int
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        cov = np.array(self.covariance, dtype=np.float64)
        d = mean.size
        if cov.shape != (d, d):
            raise DataError(f"covariance must be {d}x{d}, got {cov.shape}")
        scale = max(np.abs(cov).max(initial=0.0), 1e-300)
        if np.abs(cov - cov.T).max(initial=0.0) > 1e-12 * scale:
            raise DataError("covariance is not symmetric")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size


@dataclass(frozen=True)
class StatisticsSet:
    classes: tuple[ClassStatistics, ...]

    def __post_init__(self):
        classes = tuple(self.classes)
        if not classes:
            raise DataError("statistics set is empty")
        dims = {c.dim for c in classes}
        if len(dims) != 1:
            raise DataError("class statistics disagree on dimension")
        if [c.class_id for c in classes] != list(range(len(classes))):
            raise DataError("class statistics must cover ids 0..K-1 in order")
        object.__setattr__(self, "classes", classes)

    @property
    def n_bands(self) -> int:
        return self.classes[0].dim

    def __len__(self) -> int:
        return len(self.classes)

    def __getitem__(self, i: int) -> ClassStatistics:
        return self.classes[i]

    @classmethod
    def from_parameters(
        cls, means: Sequence[Sequence[float]], covariances: Sequence[np.ndarray]
    ) -> "StatisticsSet":
        """Build statistics directly from known Gaussian parameters (count 0)."""
        return cls(
            tuple(
                ClassStatistics(i, 0, np.asarray(m), np.asarray(c))
                for i, (m, c) in enumerate(zip(means, covariances))
            )
        )


def _mean_cov(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # fsum makes every entry correctly rounded, hence independent of which
    # other columns are present: projection commutes with estimation exactly.
    n, d = x.shape
    cols = [x[:, j] for j in range(d)]
    mean = np.array([math.fsum(c) / n for c in cols])
    centred = [c - mu for c, mu in zip(cols, mean)]
    cov = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            cov[i, j] = cov[j, i] = math.fsum(centred[i] * centred[j]) / (n - 1)
    return mean, cov


def estimate_class_statistics(train: SampleSet, legend: ClassLegend) -> StatisticsSet:
    """Sample mean and (n - 1) covariance for every legend class."""
    train.check_legend(legend)
    out = []
    for cid, name in legend.entries():
        x = train.features[train.labels == cid]
        if x.shape[0] < 2:
            raise DataError(f"class {name!r} has {x.shape[0]} sample(s); need at least 2")
        mean, cov = _mean_cov(x)
        out.append(ClassStatistics(cid, x.shape[0], mean, cov))
    return StatisticsSet(tuple(out))


def project_to_subset(s: StatisticsSet, b: BandSubset) -> StatisticsSet:
    b.check(s.n_bands)
    idx = np.array(b.bands)
    return StatisticsSet(
        tuple(
            ClassStatistics(c.class_id, c.count, c.mean[idx], c.covariance[np.ix_(idx, idx)])
            for c in s.classes
        )
    )


_PD_FLOOR = 1e-12


def _is_pd(c: np.ndarray) -> bool:
    # LAPACK accepts exact-zero pivots, so also require every pivot to clear
    # a relative floor; numerically singular matrices then get a ridge
    try:
        L = np.linalg.cholesky(c)
    except np.linalg.LinAlgError:
        return False
    scale = float(np.max(np.abs(np.diag(c)))) if c.size else 0.0
    return bool(np.min(np.diag(L)) ** 2 > _PD_FLOOR * scale)


def regularize_covariance(c: np.ndarray) -> np.ndarray:
    """Return ``c`` if positive definite, else ``c + lam * I``.

    ``lam`` starts at ``1e-6 * trace(c) / d`` (``1e-6`` for a zero trace) and
    grows tenfold for up to four retries.
    """
    c = np.asarray(c, dtype=np.float64)
    if _is_pd(c):
        return c
    d = c.shape[0]
    tr = float(np.trace(c))
    lam = _REG_BASE * tr / d if tr > 0 else _REG_BASE
    eye = np.eye(d)
    for _ in range(_REG_RETRIES + 1):
        r = c + lam * eye
        if _is_pd(r):
            return r
        lam *= 10.0
    raise DataError("covariance is not positive definite even after regularization")


def regularize(s: StatisticsSet) -> StatisticsSet:
    return StatisticsSet(
        tuple(
            ClassStatistics(c.class_id, c.count, c.mean, regularize_covariance(c.covariance))
            for c in s.classes
        )
    )
