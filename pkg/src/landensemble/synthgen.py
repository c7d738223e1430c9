"""Seeded synthetic multiband scenes drawn from per-class Gaussians.

Scene spec files are INI documents (read with :mod:`configparser`)::

    [scene]
    n_bands = 3
    width = 100
    height = 100
    seed = 7

    [class water]
    fraction = 0.4
    mean = 10 20 30
    covariance = 4 1 0; 1 4 1; 0 1 4

    [class urban]
    fraction = 0.6
    mean = 14 20 35
    std = 2 2 3
    correlation = 0.5

``covariance`` lists matrix rows separated by ``;``. Alternatively ``std``
with an optional scalar ``correlation`` r builds ``cov[i, j] = std[i] *
std[j] * r ** |i - j|``. See ``docs/scene_spec.md``.

Sampling: a NumPy ``Generator(PCG64(seed))`` first draws every pixel's class
with ``choice(K, p=fractions)`` (spec order), then one ``(N, d)`` block of
standard normals; pixel ``i`` of class ``c`` is ``mean_c + L_c @ z_i`` with
``L_c`` the lower Cholesky factor of the class covariance.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .io import ClassificationMap, ClassLegend, MultibandImage, SampleSet
from .stats import StatisticsSet


@dataclass(frozen=True)
class ClassSpec:
    name: str
    mean: np.ndarray
    covariance: np.ndarray
    fraction: float


@dataclass(frozen=True)
class SceneSpec:
    n_bands: int
    classes: tuple[ClassSpec, ...]
    width: int
    height: int
    seed: int

    def __post_init__(self):
        if self.n_bands < 1 or self.width < 1 or self.height < 1:
            raise ConfigError("n_bands, width and height must be >= 1")
        if len(self.classes) < 1:
            raise ConfigError("scene needs at least one class")
        names = [c.name for c in self.classes]
        if len(set(names)) != len(names):
            raise ConfigError("class names must be unique")
        fr = np.array([c.fraction for c in self.classes])
        if (fr <= 0).any() or abs(fr.sum() - 1.0) > 1e-9:
            raise ConfigError("class fractions must be > 0 and sum to 1")
        for c in self.classes:
            if c.mean.shape != (self.n_bands,) or c.covariance.shape != (self.n_bands,) * 2:
                raise ConfigError(f"class {c.name!r}: parameters do not match n_bands")
            if not np.allclose(c.covariance, c.covariance.T, rtol=0, atol=1e-12):
                raise ConfigError(f"class {c.name!r}: covariance is not symmetric")

    def legend(self) -> ClassLegend:
        return ClassLegend.from_labels(c.name for c in self.classes)

    def with_seed(self, seed: int) -> "SceneSpec":
        return SceneSpec(self.n_bands, self.classes, self.width, self.height, seed)

    def with_size(self, width: int, height: int) -> "SceneSpec":
        return SceneSpec(self.n_bands, self.classes, width, height, self.seed)


@dataclass(frozen=True)
class SyntheticScene:
    image: MultibandImage
    truth: ClassificationMap
    samples: SampleSet
    legend: ClassLegend


def _cholesky(c: ClassSpec) -> np.ndarray:
    try:
        return np.linalg.cholesky(c.covariance)
    except np.linalg.LinAlgError:
        raise DataError(f"class {c.name!r}: covariance is not positive definite") from None


def generate_scene(spec: SceneSpec) -> SyntheticScene:
    legend = spec.legend()
    to_legend = np.array([legend.id_of(c.name) for c in spec.classes])
    factors = [_cholesky(c) for c in spec.classes]
    n = spec.width * spec.height
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    fractions = np.array([c.fraction for c in spec.classes])
    which = rng.choice(len(spec.classes), size=n, p=fractions / fractions.sum())
    z = rng.standard_normal((n, spec.n_bands))
    x = np.empty((n, spec.n_bands))
    for k, (c, L) in enumerate(zip(spec.classes, factors)):
        sel = which == k
        x[sel] = c.mean + z[sel] @ L.T
    data = x.astype(np.float32).T.reshape(spec.n_bands, spec.height, spec.width)
    image = MultibandImage(data)
    labels = to_legend[which]
    truth = ClassificationMap(labels.reshape(spec.height, spec.width), legend)
    samples = SampleSet(image.pixels(), labels, np.arange(n))
    return SyntheticScene(image, truth, samples, legend)


def statistics_from_spec(spec: SceneSpec) -> StatisticsSet:
    """True class parameters as a statistics set in legend order."""
    legend = spec.legend()
    by_name = {c.name: c for c in spec.classes}
    return StatisticsSet.from_parameters(
        [by_name[n].mean for n in legend.names],
        [by_name[n].covariance for n in legend.names],
    )


def stratified_subsample(samples: SampleSet, per_class: int, seed: int) -> SampleSet:
    """Draw up to ``per_class`` samples of every class without replacement;
    the result keeps input order."""
    if per_class < 1:
        raise ConfigError("per_class must be >= 1")
    rng = np.random.default_rng(seed)
    keep = []
    for c in np.unique(samples.labels):
        idx = np.flatnonzero(samples.labels == c)
        keep.append(idx if idx.size <= per_class else rng.choice(idx, per_class, replace=False))
    return samples.take(np.sort(np.concatenate(keep)))


# --------------------------------------------------------------------------
# spec files


def _vector(text: str, where: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.replace(",", " ").split()])
    except ValueError:
        raise ConfigError(f"{where}: cannot parse numbers in {text!r}") from None


def ar1_covariance(std: Sequence[float], correlation: float = 0.0) -> np.ndarray:
    std = np.asarray(std, dtype=np.float64)
    idx = np.arange(std.size)
    r = np.float64(correlation) ** np.abs(idx[:, None] - idx[None, :])
    return std[:, None] * std[None, :] * r


def parse_scene_spec(text: str, source: str = "<spec>") -> SceneSpec:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    if not cp.has_section("scene"):
        raise ConfigError(f"{source}: missing [scene] section")
    sc = cp["scene"]
    try:
        n_bands = sc.getint("n_bands")
        width = sc.getint("width")
        height = sc.getint("height")
        seed = sc.getint("seed", fallback=0)
    except ValueError as exc:
        raise ConfigError(f"{source}: [scene] {exc}") from exc
    if n_bands is None or width is None or height is None:
        raise ConfigError(f"{source}: [scene] needs n_bands, width and height")
    classes = []
    for section in cp.sections():
        if section == "scene":
            continue
        if not section.startswith("class "):
            raise ConfigError(f"{source}: unknown section [{section}]")
        name = section[len("class ") :].strip()
        where = f"{source} [{section}]"
        sec = cp[section]
        if "mean" not in sec or "fraction" not in sec:
            raise ConfigError(f"{where}: needs mean and fraction")
        mean = _vector(sec["mean"], where)
        if "covariance" in sec:
            rows = [_vector(r, where) for r in sec["covariance"].split(";") if r.strip()]
            if any(r.size != len(rows) for r in rows):
                raise ConfigError(f"{where}: covariance must be square")
            cov = np.array(rows)
        elif "std" in sec:
            cov = ar1_covariance(_vector(sec["std"], where), float(sec.get("correlation", "0")))
        else:
            raise ConfigError(f"{where}: needs covariance or std")
        try:
            fraction = float(sec["fraction"])
        except ValueError:
            raise ConfigError(f"{where}: fraction must be a number") from None
        classes.append(ClassSpec(name, mean, cov, fraction))
    return SceneSpec(n_bands, tuple(classes), width, height, seed)


def load_scene_spec(path: str | Path) -> SceneSpec:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read scene spec {path}: {exc}") from exc
    return parse_scene_spec(text, str(path))


def paper_shaped_spec(seed: int = 0) -> SceneSpec:
    """Bundled 6-band, 5-class scene modeled on an urban/wetland Landsat subset."""
    text = resources.files("landensemble").joinpath("data/paper_shaped.ini").read_text("utf-8")
    return parse_scene_spec(text, "paper_shaped.ini").with_seed(seed)
