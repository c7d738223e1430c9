"""Raster, sample-set and classification-map I/O plus stratified splitting.

On-disk formats
---------------
Image
    ``<name>.hdr`` text sidecar of ``key=value`` lines (width, height, bands,
    dtype=float32, interleave=bsq, byteorder=little) and a ``<name>.bin``
    payload of little-endian float32, band-sequential, row-major per band.
Samples
    UTF-8 CSV with header ``band_1,...,band_N,label``.
Classification map
    ``<name>.map.bin`` little-endian uint16 labels, row-major, with a
    ``<name>.legend.csv`` (``class_id,class_name``) and a ``<name>.map.hdr``
    sidecar carrying the grid size.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

PathLike = str | Path

IMAGE_DTYPE = np.dtype("<f4")
MAP_DTYPE = np.dtype("<u2")
_IMAGE_KEYS = ("width", "height", "bands", "dtype", "interleave", "byteorder")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MultibandImage:
    """Multiband raster with shape ``(bands, height, width)``."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 3 or min(data.shape) < 1:
            raise DataError(f"image data must be (bands, height, width), got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DataError("image contains non-finite values")
        object.__setattr__(self, "data", _frozen(data))

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def pixels(self) -> np.ndarray:
        """Pixel vectors as a ``(height * width, bands)`` float64 array, row-major."""
        return self.data.reshape(self.bands, -1).T.astype(np.float64)


@dataclass(frozen=True)
class ClassLegend:
    """Ordered class names; a class id is the position in ``names``."""

    names: tuple[str, ...]

    def __post_init__(self):
        names = tuple(self.names)
        if not names:
            raise DataError("legend is empty")
        if any(not isinstance(n, str) or not n for n in names):
            raise DataError("class names must be non-empty strings")
        if len(set(names)) != len(names):
            raise DataError("class names must be unique")
        if list(names) != sorted(names):
            raise DataError("legend must be ordered lexicographically by class name")
        object.__setattr__(self, "names", names)

    @classmethod
    def from_labels(cls, labels: Iterable[str]) -> "ClassLegend":
        return cls(tuple(sorted(set(labels))))

    def __len__(self) -> int:
        return len(self.names)

    def id_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DataError(f"unknown class {name!r}") from None

    def entries(self) -> list[tuple[int, str]]:
        return list(enumerate(self.names))


@dataclass(frozen=True)
class SampleSet:
    """Labeled feature vectors.

    ``pixels`` optionally records the flat (row-major) image position each
    sample was drawn from; it is ``None`` for samples with no raster link.
    """

    features: np.ndarray
    labels: np.ndarray
    pixels: np.ndarray | None = None

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels)
        if features.ndim != 2:
            raise DataError("features must be a 2-D array")
        if labels.shape != (features.shape[0],):
            raise DataError("labels must have one entry per sample")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            raise DataError("labels must be integer class ids")
        if labels.size and labels.min() < 0:
            raise DataError("labels must be non-negative")
        if not np.all(np.isfinite(features)):
            raise DataError("features contain non-finite values")
        object.__setattr__(self, "features", _frozen(features))
        object.__setattr__(self, "labels", _frozen(labels.astype(np.int64)))
        if self.pixels is not None:
            pixels = np.asarray(self.pixels, dtype=np.int64)
            if pixels.shape != labels.shape:
                raise DataError("pixels must have one entry per sample")
            object.__setattr__(self, "pixels", _frozen(pixels))

    @property
    def n_bands(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return self.features.shape[0]

    def class_counts(self, n_classes: int) -> np.ndarray:
        return np.bincount(self.labels, minlength=n_classes)

    def take(self, idx: Sequence[int] | np.ndarray) -> "SampleSet":
        idx = np.asarray(idx, dtype=np.int64)
        pixels = None if self.pixels is None else self.pixels[idx]
        return SampleSet(self.features[idx], self.labels[idx], pixels)

    def check_legend(self, legend: ClassLegend) -> None:
        if len(self) and self.labels.max() >= len(legend):
            raise DataError("sample label outside legend")


@dataclass(frozen=True)
class ClassificationMap:
    """Integer label raster ``(height, width)`` tied to a legend."""

    labels: np.ndarray
    legend: ClassLegend

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or min(labels.shape) < 1:
            raise DataError(f"map labels must be (height, width), got {labels.shape}")
        if not np.issubdtype(labels.dtype, np.integer):
            raise DataError("map labels must be integers")
        if labels.min() < 0 or labels.max() >= len(self.legend):
            raise DataError(f"map label outside legend of {len(self.legend)} classes")
        object.__setattr__(self, "labels", _frozen(labels.astype(np.int64)))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


# --------------------------------------------------------------------------
# headers


def _read_header(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read header {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _header_int(hdr: dict[str, str], key: str, path: Path) -> int:
    try:
        value = int(hdr[key])
    except KeyError:
        raise DataError(f"{path}: missing key {key!r}") from None
    except ValueError:
        raise DataError(f"{path}: {key} must be an integer") from None
    if value < 1:
        raise DataError(f"{path}: {key} must be >= 1")
    return value


def _stem(path: PathLike, suffixes: Sequence[str]) -> Path:
    p = Path(path)
    name = p.name
    for s in suffixes:
        if name.endswith(s):
            return p.with_name(name[: -len(s)])
    return p


# --------------------------------------------------------------------------
# images


def save_image(image: MultibandImage, path: PathLike) -> None:
    stem = _stem(path, (".hdr", ".bin"))
    stem.parent.mkdir(parents=True, exist_ok=True)
    header = (
        f"width={image.width}\nheight={image.height}\nbands={image.bands}\n"
        "dtype=float32\ninterleave=bsq\nbyteorder=little\n"
    )
    stem.with_name(stem.name + ".hdr").write_text(header, encoding="utf-8")
    stem.with_name(stem.name + ".bin").write_bytes(image.data.astype(IMAGE_DTYPE).tobytes())


def load_image(header_path: PathLike) -> MultibandImage:
    """Read a BSQ float32 image from its ``.hdr`` sidecar (or stem)."""
    stem = _stem(header_path, (".hdr", ".bin"))
    hdr_path = stem.with_name(stem.name + ".hdr")
    bin_path = stem.with_name(stem.name + ".bin")
    hdr = _read_header(hdr_path)
    for key in _IMAGE_KEYS:
        if key not in hdr:
            raise DataError(f"{hdr_path}: missing key {key!r}")
    expected = {"dtype": "float32", "interleave": "bsq", "byteorder": "little"}
    for key, value in expected.items():
        if hdr[key].lower() != value:
            raise DataError(f"{hdr_path}: unsupported {key}={hdr[key]}")
    width = _header_int(hdr, "width", hdr_path)
    height = _header_int(hdr, "height", hdr_path)
    bands = _header_int(hdr, "bands", hdr_path)
    try:
        raw = bin_path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read image payload {bin_path}: {exc}") from exc
    n_expected = width * height * bands * IMAGE_DTYPE.itemsize
    if len(raw) != n_expected:
        raise DataError(
            f"{bin_path}: size mismatch, header implies {n_expected} bytes, file has {len(raw)}"
        )
    data = np.frombuffer(raw, dtype=IMAGE_DTYPE).reshape(bands, height, width)
    return MultibandImage(data)


# --------------------------------------------------------------------------
# samples


def load_samples(csv_path: PathLike) -> tuple[SampleSet, ClassLegend]:
    """Parse a ``band_1..band_N,label`` CSV; the legend is sorted by name."""
    path = Path(csv_path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read samples {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    n_bands = len(header) - 1
    if n_bands < 1 or header[-1] != "label" or header[:-1] != [
        f"band_{i}" for i in range(1, n_bands + 1)
    ]:
        raise DataError(f"{path}: header must be band_1,...,band_N,label")
    if len(rows) < 2:
        raise DataError(f"{path}: no data rows")
    feats = np.empty((len(rows) - 1, n_bands))
    names: list[str] = []
    for i, row in enumerate(rows[1:]):
        if len(row) != n_bands + 1:
            raise DataError(
                f"{path}:{i + 2}: ragged row, expected {n_bands + 1} fields, got {len(row)}"
            )
        try:
            feats[i] = [float(v) for v in row[:-1]]
        except ValueError:
            raise DataError(f"{path}:{i + 2}: unparsable number") from None
        label = row[-1].strip()
        if not label:
            raise DataError(f"{path}:{i + 2}: empty label")
        names.append(label)
    legend = ClassLegend.from_labels(names)
    lookup = {n: k for k, n in enumerate(legend.names)}
    labels = np.array([lookup[n] for n in names], dtype=np.int64)
    return SampleSet(feats, labels), legend


def save_samples(samples: SampleSet, legend: ClassLegend, csv_path: PathLike) -> None:
    samples.check_legend(legend)
    path = Path(csv_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"band_{i}" for i in range(1, samples.n_bands + 1)] + ["label"])
        for x, y in zip(samples.features, samples.labels):
            w.writerow([repr(float(v)) for v in x] + [legend.names[y]])


def split_samples(
    samples: SampleSet, train_fraction: float, seed: int
) -> tuple[SampleSet, SampleSet]:
    """Stratified, seeded train/test split.

    Per class, ``round(train_fraction * n_c)`` samples (half-up, clamped to
    ``[1, n_c - 1]``) go to training. Both outputs keep the input order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise DataError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train_mask = np.zeros(len(samples), dtype=bool)
    present = np.unique(samples.labels)
    for c in present:
        idx = np.flatnonzero(samples.labels == c)
        n_c = idx.size
        if n_c < 2:
            raise DataError(f"class {c} has {n_c} sample(s); need at least 2 to split")
        n_train = min(max(int(math.floor(train_fraction * n_c + 0.5)), 1), n_c - 1)
        train_mask[rng.permutation(idx)[:n_train]] = True
    return samples.take(np.flatnonzero(train_mask)), samples.take(np.flatnonzero(~train_mask))


# --------------------------------------------------------------------------
# classification maps


def save_legend(legend: ClassLegend, path: PathLike) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["class_id", "class_name"])
        for cid, name in legend.entries():
            w.writerow([cid, name])


def load_legend(path: PathLike) -> ClassLegend:
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r]
    except OSError as exc:
        raise DataError(f"cannot read legend {path}: {exc}") from exc
    if not rows or rows[0] != ["class_id", "class_name"]:
        raise DataError(f"{path}: header must be class_id,class_name")
    names = []
    for i, row in enumerate(rows[1:]):
        if len(row) != 2 or row[0] != str(i):
            raise DataError(f"{path}: class ids must be contiguous from 0")
        names.append(row[1])
    return ClassLegend(tuple(names))


def save_classification_map(m: ClassificationMap, path: PathLike) -> None:
    """Write ``<name>.map.bin``, ``<name>.map.hdr`` and ``<name>.legend.csv``."""
    if m.labels.max() >= len(m.legend) or m.labels.min() < 0:
        raise DataError("map label outside legend")
    if len(m.legend) > np.iinfo(MAP_DTYPE).max + 1:
        raise DataError("too many classes for uint16 map")
    stem = _stem(path, (".map.bin", ".map.hdr", ".legend.csv"))
    stem.parent.mkdir(parents=True, exist_ok=True)
    stem.with_name(stem.name + ".map.bin").write_bytes(m.labels.astype(MAP_DTYPE).tobytes())
    stem.with_name(stem.name + ".map.hdr").write_text(
        f"width={m.width}\nheight={m.height}\ndtype=uint16\nbyteorder=little\n",
        encoding="utf-8",
    )
    save_legend(m.legend, stem.with_name(stem.name + ".legend.csv"))


def load_classification_map(
    path: PathLike, shape: tuple[int, int] | None = None
) -> ClassificationMap:
    """Read a map written by :func:`save_classification_map`.

    ``shape`` (height, width) is only needed when the ``.map.hdr`` sidecar
    is absent.
    """
    stem = _stem(path, (".map.bin", ".map.hdr", ".legend.csv"))
    hdr_path = stem.with_name(stem.name + ".map.hdr")
    if hdr_path.exists():
        hdr = _read_header(hdr_path)
        shape = (_header_int(hdr, "height", hdr_path), _header_int(hdr, "width", hdr_path))
    elif shape is None:
        raise DataError(f"{hdr_path} missing and no shape given")
    bin_path = stem.with_name(stem.name + ".map.bin")
    try:
        raw = bin_path.read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read map {bin_path}: {exc}") from exc
    if len(raw) != shape[0] * shape[1] * MAP_DTYPE.itemsize:
        raise DataError(f"{bin_path}: size does not match {shape[0]}x{shape[1]} grid")
    labels = np.frombuffer(raw, dtype=MAP_DTYPE).reshape(shape)
    legend = load_legend(stem.with_name(stem.name + ".legend.csv"))
    return ClassificationMap(labels, legend)
