"""Nadaraya-Watson regression and classification over path semi-metrics.

The estimator is the kernel-weighted average

    F(x) = sum_i Y_i K(rho(x, X_i) / h) / sum_j K(rho(x, X_j) / h)

with any :class:`~signw.metrics.SemiMetricSpec` as ``rho``. When the
denominator vanishes (or underflows) the prediction falls back to the
nearest training input, which is the ``h -> 0`` limit of the estimator.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .metrics import SemiMetricSpec, feature_distances, features, pairwise_distances, robust_rescale, signature_features
from .signature import Path

KERNELS = ("box", "gaussian")
UNDERFLOW = 1e-300


def kernel_eval(kernel: str, u):
    """Box indicator of ``[0, 1]`` or Gaussian ``exp(-u**2 / 2)``."""
    u = np.asarray(u, dtype=float)
    if np.any(u < 0):
        raise ValueError("kernel argument must be non-negative")
    if kernel == "box":
        out = (u <= 1.0).astype(float)
    elif kernel == "gaussian":
        out = np.exp(-0.5 * u**2)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    return out if out.ndim else float(out)


def _weights(D: np.ndarray, kernel: str, h: float):
    W = kernel_eval(kernel, D / h)
    den = W.sum(axis=1)
    degenerate = den < UNDERFLOW
    return W, den, degenerate


def nw_predict_from_distances(D: np.ndarray, targets: np.ndarray, kernel: str, h: float) -> np.ndarray:
    """Regression predictions from a ``(n_query, n_train)`` distance matrix."""
    D = np.atleast_2d(D)
    targets = np.asarray(targets, dtype=float)
    W, den, bad = _weights(D, kernel, h)
    with np.errstate(invalid="ignore", divide="ignore"):
        pred = (W @ targets) / den
    if np.any(bad):
        pred[bad] = targets[np.argmin(D[bad], axis=1)]
    return pred


def nw_class_scores_from_distances(D: np.ndarray, labels: Sequence[str], classes: Sequence[str], kernel: str, h: float):
    """Per-class kernel scores and argmax labels from a distance matrix.

    ``classes`` must be sorted; an exact score tie goes to the first class.
    """
    D = np.atleast_2d(D)
    labels = np.asarray(labels)
    onehot = (labels[:, None] == np.asarray(classes)[None, :]).astype(float)
    W, den, bad = _weights(D, kernel, h)
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = (W @ onehot) / den[:, None]
    if np.any(bad):
        nn = np.argmin(D[bad], axis=1)
        scores[bad] = onehot[nn]
    pred = [classes[i] for i in np.argmax(scores, axis=1)]
    return pred, scores


@dataclass(frozen=True, eq=False)
class NWModel:
    """Fitted estimator. Signature features of the training paths are cached."""

    metric: SemiMetricSpec
    kernel: str
    h: float
    paths: tuple
    targets: Optional[np.ndarray] = None
    labels: Optional[tuple] = None
    train_features: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def classes(self) -> List[str]:
        return sorted(set(self.labels)) if self.labels is not None else []

    def distances_to(self, queries: Sequence[Path]) -> np.ndarray:
        if self.train_features is not None:
            return feature_distances(features(self.metric, list(queries)), self.train_features)
        return pairwise_distances(self.metric, list(queries), list(self.paths))

    def predict(self, queries: Sequence[Path]) -> np.ndarray:
        if self.targets is None:
            raise ValueError("model was fitted without real-valued targets")
        return nw_predict_from_distances(self.distances_to(queries), self.targets, self.kernel, self.h)

    def classify(self, queries: Sequence[Path]):
        """Predicted labels and an ``(n_query, n_classes)`` score array."""
        if self.labels is None:
            raise ValueError("model was fitted without labels")
        return nw_class_scores_from_distances(self.distances_to(queries), self.labels, self.classes, self.kernel, self.h)


def fit(metric: SemiMetricSpec, kernel: str, h: float, paths: Sequence[Path], targets=None, labels=None,
        cache: bool = True) -> NWModel:
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}")
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    paths = tuple(paths)
    if not paths:
        raise ValueError("empty training set")
    if any(p.dim != paths[0].dim for p in paths):
        raise ValueError("training paths have inconsistent dimensions")
    if targets is None and labels is None:
        raise ValueError("need targets or labels")
    if targets is not None:
        targets = np.asarray(targets, dtype=float)
        if targets.shape != (len(paths),):
            raise ValueError("targets not aligned with paths")
    if labels is not None:
        labels = tuple(str(lab) for lab in labels)
        if len(labels) != len(paths):
            raise ValueError("labels not aligned with paths")
    feats = features(metric, paths) if cache and metric.is_signature else None
    return NWModel(metric, kernel, float(h), paths, targets, labels, feats)


def nw_predict(model: NWModel, x: Path) -> float:
    return float(model.predict([x])[0])


def nw_classify(model: NWModel, x: Path):
    """Label and ``{class: score}`` for one query."""
    pred, scores = model.classify([x])
    return pred[0], dict(zip(model.classes, scores[0].tolist()))


def rmse(predictions, targets) -> float:
    predictions, targets = np.asarray(predictions, dtype=float), np.asarray(targets, dtype=float)
    if predictions.shape != targets.shape or predictions.size == 0:
        raise ValueError("predictions and targets must be non-empty and aligned")
    return float(np.sqrt(np.mean((predictions - targets) ** 2)))


def accuracy(predictions, labels) -> float:
    predictions, labels = list(predictions), list(labels)
    if len(predictions) != len(labels) or not predictions:
        raise ValueError("predictions and labels must be non-empty and aligned")
    return sum(p == q for p, q in zip(predictions, labels)) / len(labels)


# --- cross-validation -------------------------------------------------------

DEFAULT_BANDWIDTH_SCALES = tuple(np.geomspace(0.05, 5.0, 12))


@dataclass(frozen=True)
class CVConfig:
    """Grid search settings.

    With ``relative=True`` the bandwidth grid is multiplied by the median
    pairwise training distance of each metric candidate.
    """

    folds: int = 5
    bandwidths: tuple = DEFAULT_BANDWIDTH_SCALES
    relative: bool = True
    C_grid: tuple = (1.0, 2.0, 4.0, 8.0)
    a_grid: tuple = (0.5, 1.0, 2.0)
    seed: int = 0

    def __post_init__(self):
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if not self.bandwidths or not self.C_grid or not self.a_grid:
            raise ValueError("empty hyperparameter grid")
        if any(not b > 0 for b in self.bandwidths):
            raise ValueError("bandwidths must be positive")


@dataclass
class CVResult:
    h: float
    metric: SemiMetricSpec
    score: float
    candidates: List[Dict] = field(default_factory=list)


def fold_indices(n: int, k: int, seed: int) -> List[np.ndarray]:
    """Seeded shuffle followed by ``k`` contiguous, near-equal folds."""
    if k > n:
        raise ValueError(f"{k} folds for {n} samples")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


def median_offdiag(D: np.ndarray) -> float:
    iu = np.triu_indices(len(D), 1)
    vals = D[iu]
    med = float(np.median(vals)) if vals.size else 0.0
    return med if med > 0 else 1.0


def _metric_candidates(metric: SemiMetricSpec, cfg: CVConfig) -> List[SemiMetricSpec]:
    if metric.kind != "rsig":
        return [metric]
    return [metric.with_robust(C, a) for C in sorted(cfg.C_grid) for a in sorted(cfg.a_grid)]


def _candidate_distances(metric: SemiMetricSpec, cfg: CVConfig, paths: Sequence[Path]):
    """Yield ``(spec, train distance matrix)`` for every metric candidate."""
    cands = _metric_candidates(metric, cfg)
    if metric.kind == "rsig":
        raw = signature_features(metric, paths)
        d = paths[0].dim + (1 if metric.augment and not paths[0].augmented else 0)
        for spec in cands:
            yield spec, feature_distances(robust_rescale(raw, d, spec.N, spec.robust))
    else:
        D = pairwise_distances(metric, list(paths))
        yield metric, D


def cross_validate(cfg: CVConfig, metric: SemiMetricSpec, kernel: str, paths: Sequence[Path],
                   targets=None, labels=None) -> CVResult:
    """k-fold grid search over bandwidth (and ``C``, ``a`` for ``rsig``).

    Regression minimizes mean fold RMSE, classification maximizes mean fold
    accuracy. Ties go to the smaller ``h``, then smaller ``C``, then smaller ``a``.
    """
    n = len(paths)
    if (targets is None) == (labels is None):
        raise ValueError("pass exactly one of targets or labels")
    folds = fold_indices(n, cfg.folds, cfg.seed)
    classify = labels is not None
    if classify:
        labels = np.asarray([str(lab) for lab in labels])
    else:
        targets = np.asarray(targets, dtype=float)

    rows = []
    for spec, D in _candidate_distances(metric, cfg, paths):
        scale = median_offdiag(D) if cfg.relative else 1.0
        for b in cfg.bandwidths:
            h = float(b * scale)
            fold_scores = []
            for val in folds:
                tr = np.setdiff1d(np.arange(n), val)
                sub = D[np.ix_(val, tr)]
                if classify:
                    classes = sorted(set(labels[tr]))
                    pred, _ = nw_class_scores_from_distances(sub, labels[tr], classes, kernel, h)
                    fold_scores.append(accuracy(pred, labels[val]))
                else:
                    fold_scores.append(rmse(nw_predict_from_distances(sub, targets[tr], kernel, h), targets[val]))
            rows.append({
                "metric": str(spec),
                "spec": spec,
                "h": h,
                "C": spec.C,
                "a": spec.a,
                "score": float(np.mean(fold_scores)),
            })

    sign = -1.0 if classify else 1.0
    best = min(rows, key=lambda r: (sign * r["score"], r["h"], r["C"] or 0.0, r["a"] or 0.0))
    for r in rows:
        r.pop("spec")
    return CVResult(h=best["h"], metric=SemiMetricSpec.parse(best["metric"], augment=metric.augment),
                    score=best["score"], candidates=rows)


def fit_cv(cfg: CVConfig, metric: SemiMetricSpec, kernel: str, paths, targets=None, labels=None):
    """Cross-validate, then fit on the full training set with the winner."""
    res = cross_validate(cfg, metric, kernel, paths, targets=targets, labels=labels)
    return fit(res.metric, kernel, res.h, paths, targets=targets, labels=labels), res
