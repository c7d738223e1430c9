"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 convergence
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .ensemble import fuse_maps
from .errors import ConfigError, ConvergenceError, DataError, LandEnsembleError
from .evaluation import confusion_matrix, diversity_summary, kappa, overall_accuracy
from .experiment import (
    EnsembleReport,
    ExperimentConfig,
    PlanItem,
    emit_report,
    run_experiment,
    save_artifacts,
)
from .io import (
    ClassificationMap,
    load_classification_map,
    load_image,
    load_samples,
    save_classification_map,
    save_image,
    save_samples,
)
from .search import rank_subsets, save_ranking
from .separability import Aggregation, SeparabilityIndex
from .stats import BandSubset, estimate_class_statistics
from .svm import SvmParams, load_model, save_model, train_multiclass
from .synthgen import generate_scene, load_scene_spec, paper_shaped_spec, stratified_subsample

log = logging.getLogger("landensemble")

# config-file keys and how to parse them; flags use the same names with dashes
_CONFIG_KEYS = {
    "spec": str,
    "samples": str,
    "image": str,
    "out": str,
    "train_fraction": float,
    "seed": int,
    "plan": str,
    "m": int,
    "C": float,
    "gamma": float,
    "tol": float,
    "max_passes": int,
    "max_iter": int,
    "aggregation": str,
    "td_scale": float,
    "samples_per_class": int,
    "width": int,
    "height": int,
    "diversity_on": str,
    "n_jobs": int,
    "backend": str,
    "strict_convergence": lambda v: v.strip().lower() in ("1", "true", "yes", "on"),
}


def read_config_file(path: str | Path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (t.strip() for t in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _CONFIG_KEYS[key](value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return out


def _svm_params(ns) -> SvmParams:
    kw = {}
    for key in ("C", "gamma", "tol", "max_passes", "max_iter"):
        v = getattr(ns, key, None)
        if v is not None:
            kw[key] = v
    return SvmParams(**kw)


def _add_svm_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("SVM")
    g.add_argument("--C", type=float, help="box penalty (default 10)")
    g.add_argument("--gamma", type=float, help="RBF width (default 1/(d * mean scaled variance))")
    g.add_argument("--tol", type=float, help="KKT tolerance (default 1e-3)")
    g.add_argument("--max-passes", type=int, help="pass limit (default 10)")
    g.add_argument("--max-iter", type=int, help="pair-update cap (default 10000)")
    g.add_argument("--backend", choices=("cython", "python"), help="SMO backend")
    g.add_argument(
        "--strict-convergence", action="store_true", default=None,
        help="treat models stopped at the iteration cap as failures (exit 4)",
    )


def _check_converged(models, strict: bool) -> None:
    bad = [m for m in models if not m.converged]
    if bad and strict:
        raise ConvergenceError(
            f"{len(bad)} model(s) reached max_iter before meeting the KKT tolerance"
        )


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# --------------------------------------------------------------------------
# subcommands


def cmd_synth(ns) -> None:
    spec = load_scene_spec(ns.spec) if ns.spec else paper_shaped_spec()
    if ns.seed is not None:
        spec = spec.with_seed(ns.seed)
    if ns.width or ns.height:
        spec = spec.with_size(ns.width or spec.width, ns.height or spec.height)
    scene = generate_scene(spec)
    out = Path(ns.out)
    save_image(scene.image, out / "scene")
    save_classification_map(scene.truth, out / "truth")
    samples = scene.samples
    if ns.samples_per_class:
        samples = stratified_subsample(samples, ns.samples_per_class, spec.seed)
    save_samples(samples, scene.legend, out / "samples.csv")
    print(f"wrote {out}/scene.hdr, truth.map.bin, samples.csv ({len(samples)} samples)")


def cmd_stats(ns) -> None:
    samples, legend = load_samples(ns.samples)
    stats = estimate_class_statistics(samples, legend)
    _print_json(
        {
            name: {
                "count": c.count,
                "mean": c.mean.tolist(),
                "covariance": c.covariance.tolist(),
            }
            for name, c in zip(legend.names, stats.classes)
        }
    )


def cmd_rank(ns) -> None:
    samples, legend = load_samples(ns.samples)
    stats = estimate_class_statistics(samples, legend)
    ranking = rank_subsets(
        stats, ns.k, SeparabilityIndex.parse(ns.index), Aggregation(ns.aggregation), ns.td_scale
    )
    if ns.out:
        save_ranking(ranking, ns.out)
    for i, (b, score) in enumerate(ranking.entries[: ns.top], 1):
        print(f"{i:>4}  {b.label():<20} {score:.6g}")


def cmd_train(ns) -> None:
    samples, legend = load_samples(ns.samples)
    subset = BandSubset.parse(ns.bands) if ns.bands else BandSubset(tuple(range(samples.n_bands)))
    model = train_multiclass(samples, legend, subset, _svm_params(ns), ns.backend)
    _check_converged([model], bool(ns.strict_convergence))
    save_model(model, ns.out)
    print(f"wrote {ns.out}: {len(model.machines)} machines on bands {subset.label()}")


def cmd_classify(ns) -> None:
    model = load_model(ns.model)
    image = load_image(ns.image)
    labels = model.predict_features(image.pixels()).reshape(image.height, image.width)
    save_classification_map(ClassificationMap(labels, model.legend), ns.out)
    print(f"wrote {ns.out}.map.bin")


def cmd_fuse(ns) -> None:
    maps = [load_classification_map(p) for p in ns.maps]
    save_classification_map(fuse_maps(maps), ns.out)
    print(f"wrote {ns.out}.map.bin from {len(maps)} base maps")


def cmd_evaluate(ns) -> None:
    if ns.diversity:
        div = diversity_summary([load_classification_map(p) for p in ns.diversity])
        _print_json(
            {"pairwise_kappas": list(div.pairwise_kappas), "mean": div.mean, "variance": div.variance}
        )
        return
    if ns.model and ns.samples:
        model = load_model(ns.model)
        samples, legend = load_samples(ns.samples)
        if legend != model.legend:
            raise DataError("sample legend differs from the model legend")
        pred, ref, k = model.predict_features(samples.features), samples.labels, len(legend)
    elif ns.predicted and ns.reference:
        a, b = load_classification_map(ns.predicted), load_classification_map(ns.reference)
        if a.labels.shape != b.labels.shape or a.legend != b.legend:
            raise DataError("predicted and reference maps do not match")
        pred, ref, k = a.labels, b.labels, len(a.legend)
    else:
        raise ConfigError("evaluate needs --diversity, --model with --samples, or --predicted with --reference")
    cm = confusion_matrix(pred, ref, k)
    _print_json(
        {
            "confusion_matrix": cm.counts.tolist(),
            "overall_accuracy": overall_accuracy(cm),
            "kappa": kappa(cm),
            "n": cm.n,
        }
    )


def _experiment_config(ns) -> tuple[ExperimentConfig, dict]:
    merged = read_config_file(ns.config) if ns.config else {}
    for key in _CONFIG_KEYS:
        v = getattr(ns, key, None)
        if v is not None:
            merged[key] = v
    if "out" not in merged:
        raise ConfigError("experiment needs --out (or out = ... in the config file)")
    cfg = ExperimentConfig()
    kw = {}
    for key, field in (("spec", "spec_path"), ("samples", "samples_path"), ("image", "image_path")):
        if key in merged:
            kw[field] = Path(merged[key])
    for key in ("train_fraction", "seed", "m", "td_scale", "samples_per_class",
                "width", "height", "diversity_on", "n_jobs", "backend", "strict_convergence"):
        if key in merged:
            kw[key] = merged[key]
    if kw.get("samples_per_class") == 0:
        kw["samples_per_class"] = None
    if "aggregation" in merged:
        try:
            kw["aggregation"] = Aggregation(merged["aggregation"])
        except ValueError:
            raise ConfigError("aggregation must be mean or min") from None
    if "plan" in merged:
        kw["plan"] = tuple(PlanItem.parse(t) for t in str(merged["plan"]).split(",") if t.strip())
    kw["svm"] = _svm_params(argparse.Namespace(**merged))
    return replace(cfg, **kw), merged


def cmd_experiment(ns) -> None:
    cfg, merged = _experiment_config(ns)
    res = run_experiment(cfg)
    out = Path(merged["out"])
    emit_report(res.report, out)
    save_artifacts(res, out)
    print((out / "summary.txt").read_text(encoding="utf-8"), end="")


def cmd_report(ns) -> None:
    src = Path(ns.source)
    if src.is_dir():
        src = src / "report.json"
    try:
        report = EnsembleReport.from_json(src.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"cannot read report {src}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise DataError(f"{src}: malformed report: {exc}") from exc
    emit_report(report, ns.out)
    print(f"wrote report files to {ns.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="landensemble",
        description="Ensemble feature selection for multispectral land-cover mapping.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene")
    p.add_argument("--spec", help="scene spec file (default: bundled paper-shaped spec)")
    p.add_argument("--seed", type=int)
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--samples-per-class", type=int, help="subsample the emitted sample CSV")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", help="per-class mean/covariance as JSON")
    p.add_argument("--samples", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("rank", help="rank all k-band subsets by a separability index")
    p.add_argument("--samples", required=True)
    p.add_argument("--index", required=True, help="bhattacharyya | divergence | transformed_divergence")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--aggregation", default="mean", choices=("mean", "min"))
    p.add_argument("--td-scale", type=float, default=2000.0)
    p.add_argument("--top", type=int, default=10, help="rows to print")
    p.add_argument("--out", help="ranking CSV")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("train", help="train a one-vs-one RBF SVM on a band subset")
    p.add_argument("--samples", required=True)
    p.add_argument("--bands", help="1-based bands, e.g. 3,5,6 (default: all)")
    p.add_argument("--out", required=True, help="model file")
    _add_svm_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("classify", help="classify an image with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True, help="map prefix")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("fuse", help="majority-vote fusion of base maps")
    p.add_argument("--maps", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("evaluate", help="accuracy, kappa, or map diversity")
    p.add_argument("--predicted")
    p.add_argument("--reference")
    p.add_argument("--model")
    p.add_argument("--samples")
    p.add_argument("--diversity", nargs="+", metavar="MAP")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run the full ensemble experiment")
    p.add_argument("--config", help="key = value config file; flags override it")
    p.add_argument("--spec")
    p.add_argument("--samples")
    p.add_argument("--image")
    p.add_argument("--out")
    p.add_argument("--train-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--plan", help="comma list of index:k, e.g. bhattacharyya:2,none:5")
    p.add_argument("--m", type=int, help="base classifiers per ensemble (default 5)")
    p.add_argument("--aggregation", choices=("mean", "min"))
    p.add_argument("--td-scale", type=float)
    p.add_argument("--samples-per-class", type=int, help="ground-truth samples per class (0: all)")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    p.add_argument("--diversity-on", choices=("map", "test"))
    p.add_argument("--n-jobs", type=int)
    _add_svm_flags(p)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("report", help="re-emit report files from report.json")
    p.add_argument("--from", dest="source", required=True, help="report.json or its directory")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(ns.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        ns.func(ns)
    except LandEnsembleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
