"""Exhaustive band-subset search and ensemble composition."""

from __future__ import annotations

import csv
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, DataError
from .separability import TD_SCALE, Aggregation, SeparabilityIndex, multiclass_separability
from .stats import BandSubset, StatisticsSet

MAX_SEARCH_BANDS = 24
DEFAULT_ENSEMBLE_SIZE = 5


@dataclass(frozen=True)
class SubsetRanking:
    index: SeparabilityIndex
    k: int
    entries: tuple[tuple[BandSubset, float], ...]


@dataclass(frozen=True)
class EnsembleConfig:
    ensemble_id: str
    index: SeparabilityIndex | None
    k: int
    members: tuple[BandSubset, ...]

    def __post_init__(self):
        if len(set(self.members)) != len(self.members):
            raise ConfigError(f"ensemble {self.ensemble_id}: members must be distinct")
        if not self.members:
            raise ConfigError(f"ensemble {self.ensemble_id}: no members")


def enumerate_band_subsets(
    n_bands: int, k: int, max_bands: int = MAX_SEARCH_BANDS
) -> list[BandSubset]:
    if n_bands > max_bands:
        raise ConfigError(
            f"exhaustive search over {n_bands} bands exceeds the cap of {max_bands}"
        )
    if not 1 <= k <= n_bands:
        raise ConfigError(f"subset size k={k} out of range for {n_bands} bands")
    return [BandSubset(c) for c in itertools.combinations(range(n_bands), k)]


def sort_ranking(scored: list[tuple[BandSubset, float]]) -> list[tuple[BandSubset, float]]:
    # score descending, ties by ascending lexicographic band order
    return sorted(scored, key=lambda e: (-e[1], e[0].bands))


def rank_subsets(
    s: StatisticsSet,
    k: int,
    idx: SeparabilityIndex,
    aggregation: Aggregation = Aggregation.MEAN,
    td_scale: float = TD_SCALE,
    n_jobs: int = 1,
) -> SubsetRanking:
    """Score every k-band subset and sort best-first."""
    subsets = enumerate_band_subsets(s.n_bands, k)

    def score(b: BandSubset) -> float:
        return multiclass_separability(s, b, idx, aggregation, td_scale).value

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            values = list(pool.map(score, subsets))
    else:
        values = [score(b) for b in subsets]
    return SubsetRanking(idx, k, tuple(sort_ranking(list(zip(subsets, values)))))


def compose_ensemble(r: SubsetRanking, m: int, ensemble_id: str) -> EnsembleConfig:
    if m < 1:
        raise ConfigError("ensemble size m must be >= 1")
    if m > len(r.entries):
        raise ConfigError(
            f"ensemble {ensemble_id}: m={m} exceeds the {len(r.entries)} available subsets"
        )
    return EnsembleConfig(ensemble_id, r.index, r.k, tuple(b for b, _ in r.entries[:m]))


def unranked_ensemble(n_bands: int, k: int, m: int, ensemble_id: str) -> EnsembleConfig:
    """Ensemble built without a separability index: the first ``m`` k-subsets
    in lexicographic order."""
    subsets = enumerate_band_subsets(n_bands, k)
    if m > len(subsets):
        raise ConfigError(
            f"ensemble {ensemble_id}: m={m} exceeds the {len(subsets)} available subsets"
        )
    return EnsembleConfig(ensemble_id, None, k, tuple(subsets[:m]))


def save_ranking(r: SubsetRanking, path: str | Path) -> None:
    """CSV ``rank,bands,score``; bands are ``|``-joined 1-based indices."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "bands", "score"])
        for i, (b, score) in enumerate(r.entries, 1):
            w.writerow([i, "|".join(str(x + 1) for x in b.bands), repr(float(score))])


def load_ranking(path: str | Path, index: SeparabilityIndex) -> SubsetRanking:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or rows[0] != ["rank", "bands", "score"]:
        raise DataError(f"{path}: header must be rank,bands,score")
    entries = []
    for row in rows[1:]:
        b = BandSubset.parse(row[1], one_based=True, sep="|")
        entries.append((b, float(row[2])))
    if not entries:
        raise DataError(f"{path}: empty ranking")
    return SubsetRanking(index, entries[0][0].k, tuple(entries))
