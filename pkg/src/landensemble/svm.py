"""Gaussian-kernel SVM trained by SMO, one-vs-one multiclass voting, and a
maximum-likelihood Gaussian classifier used as baseline and test oracle.

The SMO inner loop runs in the compiled ``_smo`` extension when it is
importable; otherwise the pure-Python ``_smo_py`` solver is used. Set
``LANDENSEMBLE_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import _smo_py
from .errors import ConfigError, ConvergenceError, DataError
from .io import ClassLegend, SampleSet
from .stats import BandSubset, estimate_class_statistics, regularize

log = logging.getLogger(__name__)

if os.environ.get("LANDENSEMBLE_PURE_PYTHON"):
    _compiled_solve = None
else:
    try:
        from ._smo import smo_solve as _compiled_solve
    except ImportError:  # pragma: no cover - depends on the build
        _compiled_solve = None

BACKEND = "cython" if _compiled_solve is not None else "python"
_SOLVERS: dict[str, Callable] = {"python": _smo_py.smo_solve}
if _compiled_solve is not None:
    _SOLVERS["cython"] = _compiled_solve

_PREDICT_CHUNK = 2048


def available_backends() -> list[str]:
    return sorted(_SOLVERS)


def get_solver(backend: str | None = None) -> Callable:
    name = backend or BACKEND
    try:
        return _SOLVERS[name]
    except KeyError:
        raise ConfigError(f"SMO backend {name!r} is not available") from None


# --------------------------------------------------------------------------
# kernel


def rbf_kernel(x: np.ndarray, z: np.ndarray, gamma: float) -> float:
    d = np.asarray(x, dtype=np.float64) - np.asarray(z, dtype=np.float64)
    return float(np.exp(-gamma * np.dot(d, d)))


def rbf_gram(X: np.ndarray, Z: np.ndarray, gamma: float) -> np.ndarray:
    """``exp(-gamma * ||x - z||^2)`` for every row pair, from explicit
    differences so that identical rows give exactly 1."""
    X = np.asarray(X, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    sq = ((X[:, None, :] - Z[None, :, :]) ** 2).sum(axis=-1)
    return np.exp(-gamma * sq)


# --------------------------------------------------------------------------
# scaling


@dataclass(frozen=True)
class FeatureScaler:
    mean: np.ndarray
    std: np.ndarray
    constant: np.ndarray  # True where the training feature had zero variance

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.mean.size:
            raise DataError(f"expected {self.mean.size} features, got {X.shape[-1]}")
        return (X - self.mean) / self.std


def fit_scaler(X: np.ndarray) -> FeatureScaler:
    """Standardize to mean 0 / population variance 1; zero-variance features
    keep std 1 and are flagged."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("scaler needs at least 2 samples")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    constant = std == 0.0
    std = np.where(constant, 1.0, std)
    return FeatureScaler(mean, std, constant)


# --------------------------------------------------------------------------
# binary machine


@dataclass(frozen=True)
class SvmParams:
    C: float = 10.0
    gamma: float | None = None  # None: 1 / (d * mean feature variance of scaled train data)
    tol: float = 1e-3
    max_passes: int = 10
    max_iter: int = 10_000

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigError("C must be > 0")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("gamma must be > 0")
        if not self.tol > 0:
            raise ConfigError("tol must be > 0")
        if self.max_passes < 1 or self.max_iter < 1:
            raise ConfigError("max_passes and max_iter must be >= 1")


def default_gamma(X_scaled: np.ndarray) -> float:
    d = X_scaled.shape[1]
    v = float(np.mean(X_scaled.var(axis=0)))
    return 1.0 / (d * v) if v > 0 else 1.0 / d


@dataclass(frozen=True)
class TrainedBinarySvm:
    support_vectors: np.ndarray
    dual_coef: np.ndarray  # alpha_i * y_i
    bias: float
    gamma: float
    C: float
    pos: int
    neg: int
    n_steps: int = 0
    converged: bool = True

    @property
    def alphas(self) -> np.ndarray:
        return np.abs(self.dual_coef)

    def decision(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.support_vectors.shape[1]:
            raise DataError(
                f"expected {self.support_vectors.shape[1]} features, got {X.shape[1]}"
            )
        out = np.empty(X.shape[0])
        for lo in range(0, X.shape[0], _PREDICT_CHUNK):
            K = rbf_gram(X[lo : lo + _PREDICT_CHUNK], self.support_vectors, self.gamma)
            out[lo : lo + _PREDICT_CHUNK] = (K * self.dual_coef).sum(axis=1) + self.bias
        return out


def predict_decision(m: TrainedBinarySvm, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DataError("predict_decision takes a single vector")
    return float(m.decision(x[None, :])[0])


def train_binary_svm(
    pos: np.ndarray,
    neg: np.ndarray,
    p: SvmParams,
    pos_id: int = 1,
    neg_id: int = 0,
    backend: str | None = None,
) -> TrainedBinarySvm:
    """Fit a soft-margin RBF SVM on already-scaled ``pos`` (+1) and ``neg``
    (-1) rows. Row order is positives first, then negatives."""
    pos = np.atleast_2d(np.asarray(pos, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(neg, dtype=np.float64))
    if pos.shape[0] == 0 or neg.shape[0] == 0:
        raise DataError("both classes need at least one sample")
    if pos.shape[1] != neg.shape[1]:
        raise DataError("positive and negative samples differ in dimension")
    X = np.vstack([pos, neg])
    y = np.concatenate([np.ones(pos.shape[0]), -np.ones(neg.shape[0])])
    gamma = p.gamma if p.gamma is not None else default_gamma(X)
    K = rbf_gram(X, X, gamma)
    alpha, b, steps, converged = get_solver(backend)(K, y, p.C, p.tol, p.max_iter)
    sv = alpha > 0.0
    if not sv.any():
        raise ConvergenceError(
            f"SMO produced no support vectors for pair ({pos_id}, {neg_id})"
        )
    if not converged:
        log.warning(
            "SMO hit max_iter=%d for pair (%d, %d) without meeting KKT tolerance",
            p.max_iter, pos_id, neg_id,
        )
    return TrainedBinarySvm(
        support_vectors=X[sv],
        dual_coef=alpha[sv] * y[sv],
        bias=float(b),
        gamma=float(gamma),
        C=p.C,
        pos=pos_id,
        neg=neg_id,
        n_steps=int(steps),
        converged=bool(converged),
    )


# --------------------------------------------------------------------------
# multiclass


@dataclass(frozen=True)
class MulticlassSvm:
    scaler: FeatureScaler
    machines: tuple[TrainedBinarySvm, ...]
    legend: ClassLegend
    subset: BandSubset
    params: SvmParams

    @property
    def converged(self) -> bool:
        return all(m.converged for m in self.machines)

    def predict_features(self, X: np.ndarray) -> np.ndarray:
        """Predict from full-band rows (the subset is applied here)."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.predict_projected(X[:, list(self.subset.bands)])

    def predict_projected(self, X: np.ndarray) -> np.ndarray:
        Xs = self.scaler.transform(np.atleast_2d(X))
        votes = np.zeros((Xs.shape[0], len(self.legend)), dtype=np.int64)
        rows = np.arange(Xs.shape[0])
        for m in self.machines:
            winner = np.where(m.decision(Xs) >= 0.0, m.pos, m.neg)
            np.add.at(votes, (rows, winner), 1)
        # argmax returns the first maximum: ties go to the lowest class id
        return np.argmax(votes, axis=1)


def train_multiclass(
    train: SampleSet,
    legend: ClassLegend,
    subset: BandSubset,
    p: SvmParams = SvmParams(),
    backend: str | None = None,
    n_jobs: int = 1,
) -> MulticlassSvm:
    """One machine per class pair (i < j); class i is the positive side."""
    train.check_legend(legend)
    subset.check(train.n_bands)
    X = train.features[:, list(subset.bands)]
    present = [c for c in range(len(legend)) if np.any(train.labels == c)]
    if len(present) < 2:
        raise DataError("multiclass training needs at least 2 classes present")
    scaler = fit_scaler(X)
    Xs = scaler.transform(X)
    if p.gamma is None:
        p = replace(p, gamma=default_gamma(Xs))
    pairs = list(itertools.combinations(range(len(legend)), 2))

    def fit(pair):
        i, j = pair
        pos = Xs[train.labels == i]
        neg = Xs[train.labels == j]
        if pos.shape[0] == 0 or neg.shape[0] == 0:
            raise DataError(
                f"class pair ({legend.names[i]}, {legend.names[j]}) has an empty side"
            )
        return train_binary_svm(pos, neg, p, i, j, backend)

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            machines = tuple(pool.map(fit, pairs))
    else:
        machines = tuple(fit(pair) for pair in pairs)
    return MulticlassSvm(scaler, machines, legend, subset, p)


def predict_multiclass(m: MulticlassSvm, x: np.ndarray) -> int:
    """Classify one vector already restricted to ``m.subset``."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size != m.subset.k:
        raise DataError(f"expected a vector of {m.subset.k} features")
    return int(m.predict_projected(x[None, :])[0])


def vote_winner(votes) -> int:
    """Index of the largest vote count, lowest index on ties."""
    return int(np.argmax(np.asarray(votes)))


# --------------------------------------------------------------------------
# maximum-likelihood baseline


@dataclass(frozen=True)
class GaussianMLClassifier:
    means: np.ndarray  # (K, d)
    factors: tuple  # Cholesky factors of the regularized covariances
    logdets: np.ndarray
    subset: BandSubset
    legend: ClassLegend = field(repr=False)

    def log_likelihoods(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.empty((X.shape[0], self.means.shape[0]))
        for c, (mu, fac, ld) in enumerate(zip(self.means, self.factors, self.logdets)):
            d = X - mu
            maha = np.einsum("ij,ij->i", d, cho_solve(fac, d.T).T)
            out[:, c] = -0.5 * ld - 0.5 * maha
        return out

    def predict_projected(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.log_likelihoods(X), axis=1)

    def predict_features(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return self.predict_projected(X[:, list(self.subset.bands)])


def train_gaussian_ml_baseline(
    train: SampleSet, legend: ClassLegend, subset: BandSubset | None = None
) -> GaussianMLClassifier:
    """Equal-prior Gaussian maximum-likelihood classifier on ``subset``."""
    if subset is None:
        subset = BandSubset(tuple(range(train.n_bands)))
    subset.check(train.n_bands)
    proj = SampleSet(train.features[:, list(subset.bands)], train.labels)
    stats = regularize(estimate_class_statistics(proj, legend))
    factors = tuple(cho_factor(c.covariance, lower=True) for c in stats.classes)
    logdets = np.array([2.0 * np.sum(np.log(np.diag(f[0]))) for f in factors])
    means = np.array([c.mean for c in stats.classes])
    return GaussianMLClassifier(means, factors, logdets, subset, legend)


# --------------------------------------------------------------------------
# persistence: "svm-model v1" text format


def _r(x) -> str:
    return repr(float(x))


def _floats(values) -> str:
    return " ".join(_r(v) for v in values)


def save_model(m: MulticlassSvm, path: str | Path) -> None:
    p = m.params
    lines = [
        "svm-model v1",
        f"classes {len(m.legend)}",
        *(f"class {i} {name}" for i, name in m.legend.entries()),
        "subset " + " ".join(str(b + 1) for b in m.subset.bands),
        f"params C={_r(p.C)} gamma={'None' if p.gamma is None else _r(p.gamma)} tol={_r(p.tol)} "
        f"max_passes={p.max_passes} max_iter={p.max_iter}",
        "scaler_mean " + _floats(m.scaler.mean),
        "scaler_std " + _floats(m.scaler.std),
        "scaler_constant " + " ".join(str(int(c)) for c in m.scaler.constant),
        f"machines {len(m.machines)}",
    ]
    for mach in m.machines:
        lines.append(
            f"machine {mach.pos} {mach.neg} {mach.support_vectors.shape[0]} "
            f"{_r(mach.bias)} {_r(mach.gamma)} {int(mach.converged)} {mach.n_steps}"
        )
        for coef, sv in zip(mach.dual_coef, mach.support_vectors):
            lines.append(f"sv {_r(coef)} {_floats(sv)}")
    lines.append("end")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> MulticlassSvm:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read model {path}: {exc}") from exc
    it = iter(lines)

    def expect(prefix: str) -> str:
        try:
            line = next(it)
        except StopIteration:
            raise DataError(f"{path}: truncated model, expected {prefix!r}") from None
        if not line.startswith(prefix):
            raise DataError(f"{path}: expected {prefix!r}, got {line[:40]!r}")
        return line[len(prefix) :].strip()

    try:
        if expect("svm-model") != "v1":
            raise DataError(f"{path}: unsupported model version")
        k = int(expect("classes"))
        names = []
        for i in range(k):
            cid, name = expect("class").split(" ", 1)
            if int(cid) != i:
                raise DataError(f"{path}: class ids out of order")
            names.append(name)
        subset = BandSubset(tuple(int(v) - 1 for v in expect("subset").split()))
        kv = dict(tok.split("=", 1) for tok in expect("params").split())
        params = SvmParams(
            C=float(kv["C"]),
            gamma=None if kv["gamma"] == "None" else float(kv["gamma"]),
            tol=float(kv["tol"]),
            max_passes=int(kv["max_passes"]),
            max_iter=int(kv["max_iter"]),
        )
        mean = np.array([float(v) for v in expect("scaler_mean").split()])
        std = np.array([float(v) for v in expect("scaler_std").split()])
        const = np.array([bool(int(v)) for v in expect("scaler_constant").split()])
        n_machines = int(expect("machines"))
        machines = []
        for _ in range(n_machines):
            pos, neg, n_sv, bias, gamma, conv, steps = expect("machine").split()
            coefs, svs = [], []
            for _ in range(int(n_sv)):
                vals = [float(v) for v in expect("sv").split()]
                coefs.append(vals[0])
                svs.append(vals[1:])
            machines.append(
                TrainedBinarySvm(
                    np.array(svs), np.array(coefs), float(bias), float(gamma),
                    params.C, int(pos), int(neg), int(steps), bool(int(conv)),
                )
            )
        expect("end")
    except (ValueError, KeyError) as exc:
        raise DataError(f"{path}: malformed model: {exc}") from exc
    scaler = FeatureScaler(mean, std, const)
    return MulticlassSvm(scaler, tuple(machines), ClassLegend(tuple(names)), subset, params)
