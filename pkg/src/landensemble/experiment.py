"""End-to-end ensemble experiment and report emission."""

from __future__ import annotations

import contextlib
import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .ensemble import fuse_maps, majority_vote
from .errors import ConfigError, ConvergenceError, DataError, LandEnsembleError
from .evaluation import (
    confusion_matrix,
    diversity_summary,
    overall_accuracy,
    pearson_correlation,
    z_test,
)
from .io import (
    ClassificationMap,
    ClassLegend,
    MultibandImage,
    SampleSet,
    load_image,
    load_samples,
    save_classification_map,
    split_samples,
)
from .search import (
    DEFAULT_ENSEMBLE_SIZE,
    EnsembleConfig,
    compose_ensemble,
    rank_subsets,
    unranked_ensemble,
)
from .separability import TD_SCALE, Aggregation, SeparabilityIndex
from .stats import BandSubset, estimate_class_statistics
from .svm import MulticlassSvm, SvmParams, train_multiclass
from .synthgen import generate_scene, load_scene_spec, paper_shaped_spec, stratified_subsample

log = logging.getLogger(__name__)

_ID_PREFIX = {
    SeparabilityIndex.BHATTACHARYYA: "B",
    SeparabilityIndex.DIVERGENCE: "D",
    SeparabilityIndex.TRANSFORMED_DIVERGENCE: "T",
    None: "E",
}


@dataclass(frozen=True)
class PlanItem:
    index: SeparabilityIndex | None
    k: int

    @classmethod
    def parse(cls, text: str) -> "PlanItem":
        try:
            name, k = text.strip().split(":")
            k = int(k)
        except ValueError:
            raise ConfigError(f"plan entries look like index:k, got {text!r}") from None
        if name.strip().lower() == "none":
            return cls(None, k)
        try:
            return cls(SeparabilityIndex.parse(name), k)
        except DataError as exc:
            raise ConfigError(str(exc)) from None

    def __str__(self) -> str:
        return f"{'none' if self.index is None else self.index.value}:{self.k}"


def default_plan() -> tuple[PlanItem, ...]:
    """Each index at k = 2, 3, 4, then five-band subsets without an index."""
    plan = [
        PlanItem(idx, k)
        for idx in (
            SeparabilityIndex.BHATTACHARYYA,
            SeparabilityIndex.DIVERGENCE,
            SeparabilityIndex.TRANSFORMED_DIVERGENCE,
        )
        for k in (2, 3, 4)
    ]
    return tuple(plan) + (PlanItem(None, 5),)


def ensemble_ids(plan) -> list[str]:
    counts: dict[str, int] = {}
    ids = []
    for item in plan:
        prefix = _ID_PREFIX[item.index]
        counts[prefix] = counts.get(prefix, 0) + 1
        ids.append(prefix if prefix == "E" and counts[prefix] == 1 else f"{prefix}{counts[prefix]}")
    return ids


@dataclass(frozen=True)
class ExperimentConfig:
    spec_path: Path | None = None
    samples_path: Path | None = None
    image_path: Path | None = None
    train_fraction: float = 0.7
    seed: int = 0
    plan: tuple[PlanItem, ...] = field(default_factory=default_plan)
    m: int = DEFAULT_ENSEMBLE_SIZE
    svm: SvmParams = SvmParams()
    aggregation: Aggregation = Aggregation.MEAN
    td_scale: float = TD_SCALE
    samples_per_class: int | None = 100
    width: int | None = None
    height: int | None = None
    diversity_on: str = "map"  # "map" or "test"
    n_jobs: int = 1
    backend: str | None = None
    strict_convergence: bool = False

    def __post_init__(self):
        if not self.plan:
            raise ConfigError("ensemble plan is empty")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.samples_path is not None and self.spec_path is not None:
            raise ConfigError("give either a scene spec or a sample CSV, not both")
        if self.samples_path is not None and self.image_path is None:
            raise ConfigError("a sample CSV input also needs an image")
        if self.diversity_on not in ("map", "test"):
            raise ConfigError("diversity_on must be 'map' or 'test'")
        if self.n_jobs < 1:
            raise ConfigError("n_jobs must be >= 1")


@dataclass(frozen=True)
class BaseEntry:
    bands: tuple[int, ...]  # 1-based
    accuracy: float


@dataclass(frozen=True)
class EnsembleResult:
    ensemble_id: str
    index: str  # separability index name or "none"
    k: int
    bases: tuple[BaseEntry, ...]
    accuracy: float
    diversity_mean: float | None
    diversity_variance: float | None
    pairwise_kappas: tuple[float, ...]


@dataclass(frozen=True)
class EnsembleReport:
    ensembles: tuple[EnsembleResult, ...]
    n_test: int
    z_matrix: tuple[tuple[float, ...], ...]  # z[i][j] = Z(acc_i, acc_j)
    corr_accuracy_diversity_mean: float | None
    corr_accuracy_diversity_variance: float | None
    seed: int = 0
    classes: tuple[str, ...] = ()

    def ztests(self) -> list[tuple[str, str, float, bool]]:
        """Lower triangle (row index > column index) in row-major order."""
        out = []
        for i in range(len(self.ensembles)):
            for j in range(i):
                z = self.z_matrix[i][j]
                out.append((self.ensembles[i].ensemble_id, self.ensembles[j].ensemble_id, z, abs(z) > 1.96))
        return out

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EnsembleReport":
        d = json.loads(text)
        ensembles = tuple(
            EnsembleResult(
                e["ensemble_id"], e["index"], e["k"],
                tuple(BaseEntry(tuple(b["bands"]), b["accuracy"]) for b in e["bases"]),
                e["accuracy"], e["diversity_mean"], e["diversity_variance"],
                tuple(e["pairwise_kappas"]),
            )
            for e in d["ensembles"]
        )
        return cls(
            ensembles, d["n_test"], tuple(tuple(r) for r in d["z_matrix"]),
            d["corr_accuracy_diversity_mean"], d["corr_accuracy_diversity_variance"],
            d.get("seed", 0), tuple(d.get("classes", ())),
        )


@dataclass(frozen=True)
class ExperimentResult:
    report: EnsembleReport
    configs: tuple[EnsembleConfig, ...]
    legend: ClassLegend
    base_maps: dict[str, tuple[ClassificationMap, ...]]
    fused_maps: dict[str, ClassificationMap]
    test: SampleSet
    truth: ClassificationMap | None = None


@contextlib.contextmanager
def _stage(name: str, ensemble_id: str | None = None):
    try:
        yield
    except LandEnsembleError as exc:
        where = f"stage {name}" + (f", ensemble {ensemble_id}" if ensemble_id else "")
        raise type(exc)(f"{where}: {exc}") from exc


def _load_inputs(cfg: ExperimentConfig):
    if cfg.samples_path is not None:
        samples, legend = load_samples(cfg.samples_path)
        image = load_image(cfg.image_path)
        if image.bands != samples.n_bands:
            raise DataError("image and samples disagree on band count")
        if cfg.samples_per_class:
            samples = stratified_subsample(samples, cfg.samples_per_class, cfg.seed)
        return samples, legend, image, None
    spec = load_scene_spec(cfg.spec_path) if cfg.spec_path else paper_shaped_spec()
    spec = spec.with_seed(cfg.seed)
    if cfg.width or cfg.height:
        spec = spec.with_size(cfg.width or spec.width, cfg.height or spec.height)
    scene = generate_scene(spec)
    samples = scene.samples
    if cfg.samples_per_class:
        samples = stratified_subsample(samples, cfg.samples_per_class, cfg.seed)
    return samples, scene.legend, scene.image, scene.truth


def _correlation(xs, ys) -> float | None:
    if len(xs) < 2 or any(v is None for v in ys):
        return None
    try:
        return pearson_correlation(xs, ys)
    except DataError:
        return None


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Split, rank, train one SVM per member subset, fuse by majority vote and
    evaluate every ensemble of the plan."""
    with _stage("load"):
        samples, legend, image, truth = _load_inputs(cfg)
    with _stage("split"):
        train, test = split_samples(samples, cfg.train_fraction, cfg.seed)
    with _stage("statistics"):
        stats = estimate_class_statistics(train, legend)

    ids = ensemble_ids(cfg.plan)
    configs = []
    for eid, item in zip(ids, cfg.plan):
        with _stage("rank", eid):
            if item.index is None:
                configs.append(unranked_ensemble(stats.n_bands, item.k, cfg.m, eid))
            else:
                ranking = rank_subsets(stats, item.k, item.index, cfg.aggregation, cfg.td_scale)
                configs.append(compose_ensemble(ranking, cfg.m, eid))

    # identical subsets across ensembles share one deterministic model
    subsets: list[BandSubset] = []
    owner: dict[BandSubset, str] = {}
    for c in configs:
        for b in c.members:
            if b not in owner:
                owner[b] = c.ensemble_id
                subsets.append(b)

    pixels = image.pixels()

    def fit_and_predict(b: BandSubset):
        with _stage("train", owner[b]):
            model = train_multiclass(train, legend, b, cfg.svm, cfg.backend)
        with _stage("classify", owner[b]):
            test_pred = model.predict_features(test.features)
            map_pred = model.predict_features(pixels).reshape(image.height, image.width)
        return model, test_pred, ClassificationMap(map_pred, legend)

    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(cfg.n_jobs) as pool:
            outputs = dict(zip(subsets, pool.map(fit_and_predict, subsets)))
    else:
        outputs = {b: fit_and_predict(b) for b in subsets}
    for b, (model, _, _) in outputs.items():
        if not model.converged:
            if cfg.strict_convergence:
                raise ConvergenceError(
                    f"stage train, ensemble {owner[b]}: model on bands {b.label()} "
                    "reached max_iter before meeting the KKT tolerance"
                )
            log.warning("model on bands %s stopped at the iteration cap", b.label())

    k = len(legend)
    n_test = len(test)
    results = []
    base_maps: dict[str, tuple[ClassificationMap, ...]] = {}
    fused_maps: dict[str, ClassificationMap] = {}
    mask = test.pixels if cfg.diversity_on == "test" else None
    if cfg.diversity_on == "test" and mask is None:
        raise ConfigError("diversity_on=test needs samples linked to image pixels")
    for c in configs:
        with _stage("evaluate", c.ensemble_id):
            preds = [outputs[b][1] for b in c.members]
            maps = tuple(outputs[b][2] for b in c.members)
            bases = tuple(
                BaseEntry(
                    tuple(x + 1 for x in b.bands),
                    overall_accuracy(confusion_matrix(p, test.labels, k)),
                )
                for b, p in zip(c.members, preds)
            )
            fused_test = majority_vote(np.stack(preds), k)
            acc = overall_accuracy(confusion_matrix(fused_test, test.labels, k))
            fused = fuse_maps(maps)
            if len(maps) >= 2:
                div = diversity_summary(maps, mask)
                dmean, dvar, kappas = div.mean, div.variance, div.pairwise_kappas
            else:
                dmean = dvar = None
                kappas = ()
            results.append(
                EnsembleResult(
                    c.ensemble_id,
                    "none" if c.index is None else c.index.value,
                    c.k, bases, acc, dmean, dvar, kappas,
                )
            )
            base_maps[c.ensemble_id] = maps
            fused_maps[c.ensemble_id] = fused

    with _stage("significance"):
        accs = [r.accuracy for r in results]
        zmat = tuple(
            tuple(z_test(ai, n_test, aj, n_test).z for aj in accs) for ai in accs
        )
    with _stage("correlation"):
        corr_mean = _correlation(accs, [r.diversity_mean for r in results])
        corr_var = _correlation(accs, [r.diversity_variance for r in results])

    report = EnsembleReport(
        tuple(results), n_test, zmat, corr_mean, corr_var, cfg.seed, legend.names
    )
    return ExperimentResult(report, tuple(configs), legend, base_maps, fused_maps, test, truth)


# --------------------------------------------------------------------------
# emission


def _fmt(x: float | None) -> str:
    if x is None:
        return "nan"
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


ENSEMBLE_COLUMNS = [
    "ensemble_id", "index", "k", "member", "bands", "base_accuracy",
    "ensemble_accuracy", "diversity_mean", "diversity_variance",
]
ZTEST_COLUMNS = ["ensemble_a", "ensemble_b", "z", "significant"]
PLOT_COLUMNS = ["ensemble_id", "diversity_mean", "diversity_variance", "accuracy"]


def summary_text(r: EnsembleReport) -> str:
    lines = [f"ensembles: {len(r.ensembles)}", f"test samples: {r.n_test}", ""]
    lines.append(f"{'id':<6}{'index':<24}{'k':>3}{'accuracy':>10}{'div_mean':>10}{'div_var':>10}")
    for e in r.ensembles:
        dm = "-" if e.diversity_mean is None else f"{e.diversity_mean:.4f}"
        dv = "-" if e.diversity_variance is None else f"{e.diversity_variance:.4f}"
        lines.append(f"{e.ensemble_id:<6}{e.index:<24}{e.k:>3}{e.accuracy:>10.4f}{dm:>10}{dv:>10}")
        for b in e.bases:
            lines.append(f"{'':<6}bands {','.join(map(str, b.bands)):<18}{b.accuracy:>13.4f}")
    n_sig = sum(1 for *_, s in r.ztests() if s)
    lines += [
        "",
        f"significant pairwise differences (|Z| > 1.96): {n_sig} of {len(r.ztests())}",
        f"correlation accuracy vs diversity mean (kappa): {_fmt(r.corr_accuracy_diversity_mean)}",
        f"correlation accuracy vs diversity variance: {_fmt(r.corr_accuracy_diversity_variance)}",
    ]
    return "\n".join(lines) + "\n"


def emit_report(r: EnsembleReport, out_dir: str | Path) -> None:
    """Write report_ensembles.csv, report_ztests.csv,
    plot_diversity_accuracy.csv, summary.txt and report.json."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        rows = []
        for e in r.ensembles:
            for j, b in enumerate(e.bases, 1):
                rows.append([
                    e.ensemble_id, e.index, e.k, j, "|".join(map(str, b.bands)),
                    _fmt(b.accuracy), _fmt(e.accuracy),
                    _fmt(e.diversity_mean), _fmt(e.diversity_variance),
                ])
        _write_csv(out / "report_ensembles.csv", ENSEMBLE_COLUMNS, rows)
        _write_csv(
            out / "report_ztests.csv",
            ZTEST_COLUMNS,
            [[a, b, _fmt(z), str(s).lower()] for a, b, z, s in r.ztests()],
        )
        _write_csv(
            out / "plot_diversity_accuracy.csv",
            PLOT_COLUMNS,
            [[e.ensemble_id, _fmt(e.diversity_mean), _fmt(e.diversity_variance), _fmt(e.accuracy)]
             for e in r.ensembles],
        )
        (out / "summary.txt").write_text(summary_text(r), encoding="utf-8")
        (out / "report.json").write_text(r.to_json(), encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write report to {out}: {exc}") from exc


def save_artifacts(res: ExperimentResult, out_dir: str | Path) -> None:
    """Persist base and fused maps plus the held-out test pixels."""
    out = Path(out_dir) / "maps"
    for eid, maps in res.base_maps.items():
        for j, m in enumerate(maps, 1):
            save_classification_map(m, out / f"{eid}_base{j}")
        save_classification_map(res.fused_maps[eid], out / f"{eid}_fused")
    if res.truth is not None:
        save_classification_map(res.truth, out / "truth")
    rows = []
    for i in range(len(res.test)):
        pix = "" if res.test.pixels is None else int(res.test.pixels[i])
        rows.append([pix, res.legend.names[res.test.labels[i]]])
    _write_csv(Path(out_dir) / "test_samples.csv", ["pixel", "label"], rows)
