"""Semi-metrics on path space.

Every variant is described by a :class:`SemiMetricSpec` whose string form
(``sig:N``, ``rsig:N:C:a``, ``sup``, ``lp:p``, ``pvar:p``, ``dtw``) is the
format used on the command line.

Signature variants compare (robust) truncated signatures in the Hilbert
norm of the tensor algebra. The remaining variants work on the paths
themselves; paths sampled on different grids are first interpolated onto
the union of both grids.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numba
import numpy as np
from scipy.spatial.distance import cdist

from .signature import Path, batch_signature, path_signature, time_augment
from .tensor_algebra import DimensionMismatch, TruncatedTensor, dilate, level_offsets, norm

SIGNATURE_KINDS = ("sig", "rsig")
KINDS = ("sig", "rsig", "sup", "lp", "pvar", "dtw")


@dataclass(frozen=True)
class RobustParams:
    """Threshold ``C >= 1`` and decay exponent ``a > 0`` of the normalization."""

    C: float = 4.0
    a: float = 1.0

    def __post_init__(self):
        if not self.C >= 1:
            raise ValueError(f"C must be >= 1, got {self.C}")
        if not self.a > 0:
            raise ValueError(f"a must be > 0, got {self.a}")

    @property
    def bound(self) -> float:
        """Supremum of psi, hence of the squared norm of any normalized tensor."""
        return self.C * (1.0 + 1.0 / self.a)


@dataclass(frozen=True)
class SemiMetricSpec:
    kind: str
    N: Optional[int] = None
    C: Optional[float] = None
    a: Optional[float] = None
    p: Optional[float] = None
    augment: bool = field(default=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind in SIGNATURE_KINDS:
            if self.N is None or int(self.N) != self.N or self.N < 1:
                raise ValueError(f"{self.kind} needs a positive integer level, got {self.N}")
        if self.kind == "rsig":
            RobustParams(self.C, self.a)
        if self.kind in ("lp", "pvar"):
            if self.p is None or not self.p >= 1:
                raise ValueError(f"{self.kind} needs p >= 1, got {self.p}")

    @property
    def robust(self) -> Optional[RobustParams]:
        return RobustParams(self.C, self.a) if self.kind == "rsig" else None

    @property
    def is_signature(self) -> bool:
        return self.kind in SIGNATURE_KINDS

    def with_robust(self, C: float, a: float) -> "SemiMetricSpec":
        return SemiMetricSpec("rsig", self.N, C, a, augment=self.augment)

    def __str__(self):
        if self.kind == "sig":
            return f"sig:{self.N}"
        if self.kind == "rsig":
            return f"rsig:{self.N}:{_fmt(self.C)}:{_fmt(self.a)}"
        if self.kind in ("lp", "pvar"):
            return f"{self.kind}:{_fmt(self.p)}"
        return self.kind

    @classmethod
    def parse(cls, text: str, augment: bool = False) -> "SemiMetricSpec":
        """Parse the command-line string form; raises ``ValueError``."""
        parts = text.strip().split(":")
        kind, args = parts[0], parts[1:]
        arity = {"sig": 1, "rsig": 3, "sup": 0, "lp": 1, "pvar": 1, "dtw": 0}
        if kind not in arity:
            raise ValueError(f"unknown metric {text!r}")
        if len(args) != arity[kind]:
            raise ValueError(f"metric {kind!r} takes {arity[kind]} parameter(s): {text!r}")
        try:
            if kind == "sig":
                return cls("sig", N=int(args[0]), augment=augment)
            if kind == "rsig":
                return cls("rsig", N=int(args[0]), C=float(args[1]), a=float(args[2]), augment=augment)
            if kind in ("lp", "pvar"):
                return cls(kind, p=float(args[0]))
        except ValueError as exc:
            raise ValueError(f"bad metric spec {text!r}: {exc}") from None
        return cls(kind)


def _fmt(x: float) -> str:
    # repr round-trips floats exactly
    return repr(float(x))


# --- robust normalization -------------------------------------------------


def psi(y: float, params: RobustParams) -> float:
    """Bounded increasing reshaping of the norm, with ``x = y**2``.

    Identity ``x`` up to ``C``, then ``C + C**(1+a) * (C**-a - x**-a) / a``,
    which is continuous at ``C`` and tends to ``C * (1 + 1/a)``.
    """
    if y < 1:
        raise ValueError(f"psi is defined on [1, inf), got {y}")
    return float(_psi_sq(np.float64(y) ** 2, params))


def _psi_sq(x, params: RobustParams):
    C, a = params.C, params.a
    x = np.asarray(x, dtype=float)
    above = C + C ** (1 + a) * (C ** (-a) - np.maximum(x, C) ** (-a)) / a
    return np.where(x <= C, x, above)


def _lambdas(level_sq: np.ndarray, params: RobustParams, max_iter: int = 1100, tol: float = 1e-12) -> np.ndarray:
    """Vectorised dilation factors for rows of squared level norms.

    ``level_sq`` has shape ``(n, N + 1)`` with column 0 equal to 1. Bisection
    on ``[0, 1]`` runs until the bracket is narrower than ``tol`` and no
    longer shrinks in floating point, capped at ``max_iter`` steps.
    """
    level_sq = np.atleast_2d(level_sq)
    total = level_sq.sum(axis=1)
    target = _psi_sq(total, params)
    powers = 2 * np.arange(level_sq.shape[1])
    lam = np.ones(len(level_sq))
    active = (total > params.C) & (level_sq[:, 1:].sum(axis=1) > 0)
    if not np.any(active):
        return lam
    sq, tgt = level_sq[active], target[active]
    lo, hi = np.zeros(len(sq)), np.ones(len(sq))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f = (mid[:, None] ** powers * sq).sum(axis=1) - tgt
        below = f < 0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        nxt = 0.5 * (lo + hi)
        if np.all((hi - lo <= tol) & ((nxt == lo) | (nxt == hi))):
            break
    lam[active] = 0.5 * (lo + hi)
    return lam


def normalize_lambda(t: TruncatedTensor, params: RobustParams) -> float:
    """Dilation factor mapping ``t`` onto the sphere of squared radius ``psi(||t||)``.

    Returns 1 when ``||t||**2 <= C`` or when every level above 0 vanishes.
    """
    if t.levels[0][0] != 1.0:
        raise ValueError("normalization needs a tensor with scalar part 1")
    sq = np.array([np.dot(lev, lev) for lev in t.levels])
    return float(_lambdas(sq[None, :], params)[0])


def robust_rescale(flat: np.ndarray, d: int, N: int, params: RobustParams) -> np.ndarray:
    """Apply the normalization row-wise to flat level-major signatures."""
    flat = np.atleast_2d(np.asarray(flat, dtype=float))
    off = level_offsets(d, N)
    sq = np.stack([(flat[:, off[k] : off[k + 1]] ** 2).sum(axis=1) for k in range(N + 1)], axis=1)
    lam = _lambdas(sq, params)
    scale = np.concatenate([np.full(d**k, k) for k in range(N + 1)])
    return flat * lam[:, None] ** scale[None, :]


def robust_signature(x: Path, N: int, params: RobustParams) -> TruncatedTensor:
    sig = path_signature(x, N)
    return dilate(sig, normalize_lambda(sig, params))


# --- signature distances --------------------------------------------------


def _check_dims(x: Path, y: Path):
    if x.dim != y.dim:
        raise DimensionMismatch(f"paths have dimensions {x.dim} and {y.dim}")


def trunc_sig_distance(x: Path, y: Path, N: int) -> float:
    _check_dims(x, y)
    return norm(path_signature(x, N) - path_signature(y, N))


def rsig_distance(x: Path, y: Path, N: int, params: RobustParams) -> float:
    _check_dims(x, y)
    return norm(robust_signature(x, N, params) - robust_signature(y, N, params))


# --- distances on the paths themselves ----------------------------------------


def union_grid(x: Path, y: Path):
    """Both paths interpolated onto the union of their time grids."""
    t = np.union1d(x.times, y.times)
    return t, x.value_at(t), y.value_at(t)


def sup_distance(x: Path, y: Path) -> float:
    _check_dims(x, y)
    _, xv, yv = union_grid(x, y)
    return float(np.linalg.norm(xv - yv, axis=1).max())


def lp_distance(x: Path, y: Path, p: float) -> float:
    """Trapezoid-rule L^p distance of the pointwise Euclidean difference."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    _check_dims(x, y)
    t, xv, yv = union_grid(x, y)
    return _lp_from_diff(t, xv - yv, p)


def trapezoid_weights(t: np.ndarray) -> np.ndarray:
    """Weights ``w`` with ``sum(w * g)`` equal to the trapezoid rule on grid ``t``."""
    w = np.zeros(len(t))
    dt = np.diff(t)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


def _lp_from_diff(t, diff, p):
    g = np.linalg.norm(diff, axis=-1) ** p
    return float(np.dot(g, trapezoid_weights(t)) ** (1.0 / p))


@numba.njit(cache=True)
def _grid_pairwise(X, Y, w, p, sup, symmetric):
    # X (n, T, d), Y (m, T, d) on one shared grid; symmetric fills the upper triangle only
    n, m, T, d = X.shape[0], Y.shape[0], X.shape[1], X.shape[2]
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(i + 1 if symmetric else 0, m):
            acc = 0.0
            for k in range(T):
                s = 0.0
                for c in range(d):
                    diff = X[i, k, c] - Y[j, k, c]
                    s += diff * diff
                if sup:
                    if s > acc:
                        acc = s
                else:
                    acc += w[k] * s ** (0.5 * p)
            out[i, j] = math.sqrt(acc) if sup else acc ** (1.0 / p)
    return out


@numba.njit(cache=True)
def _pvar_power(z, p):
    # V[j]: best sum of |z_b - z_a|^p over increasing vertex chains ending at j
    n = z.shape[0]
    V = np.zeros(n)
    best = 0.0
    for j in range(1, n):
        vj = 0.0
        for i in range(j):
            s = 0.0
            for c in range(z.shape[1]):
                diff = z[j, c] - z[i, c]
                s += diff * diff
            cand = V[i] + s ** (0.5 * p)
            if cand > vj:
                vj = cand
        V[j] = vj
        if vj > best:
            best = vj
    return best


def p_variation(x: Path, p: float) -> float:
    """p-variation of the piecewise-linear path (the p-th root of the sup sum).

    For piecewise-linear paths the supremum over partitions is attained on
    vertex subsequences, found by an O(L^2) dynamic programme.
    """
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return float(_pvar_power(np.ascontiguousarray(x.values), float(p)) ** (1.0 / p))


def p_var_distance(x: Path, y: Path, p: float) -> float:
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    _check_dims(x, y)
    _, xv, yv = union_grid(x, y)
    return float(_pvar_power(np.ascontiguousarray(xv - yv), float(p)) ** (1.0 / p))


def one_var_distance(x: Path, y: Path) -> float:
    """1-variation of ``x - y`` on the union grid."""
    _check_dims(x, y)
    _, xv, yv = union_grid(x, y)
    return float(np.linalg.norm(np.diff(xv - yv, axis=0), axis=1).sum())


def _as_rows(x) -> np.ndarray:
    if isinstance(x, Path):
        return x.values
    arr = np.asarray(x, dtype=float)
    return arr[:, None] if arr.ndim == 1 else arr


@numba.njit(cache=True)
def _dtw(x, y):
    n, m = x.shape[0], y.shape[0]
    D = np.full((n + 1, m + 1), np.inf)
    D[0, 0] = 0.0
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            s = 0.0
            for c in range(x.shape[1]):
                diff = x[i - 1, c] - y[j - 1, c]
                s += diff * diff
            best = D[i - 1, j - 1]
            if D[i - 1, j] < best:
                best = D[i - 1, j]
            if D[i, j - 1] < best:
                best = D[i, j - 1]
            D[i, j] = math.sqrt(s) + best
    return D[n, m]


def dtw_distance(x, y) -> float:
    """Dependent DTW: joint Euclidean local cost, full window, unnormalized.

    Accepts :class:`Path` objects or raw ``(length, d)`` arrays.
    """
    xv, yv = _as_rows(x), _as_rows(y)
    if xv.size == 0 or yv.size == 0:
        raise ValueError("DTW needs non-empty sequences")
    if xv.shape[1] != yv.shape[1]:
        raise DimensionMismatch(f"sequences have dimensions {xv.shape[1]} and {yv.shape[1]}")
    return float(_dtw(np.ascontiguousarray(xv), np.ascontiguousarray(yv)))


# --- dispatch -------------------------------------------------------------


def _prepare(spec: SemiMetricSpec, p: Path) -> Path:
    if spec.is_signature and spec.augment and not p.augmented:
        return time_augment(p)
    return p


def distance(spec: SemiMetricSpec, x: Path, y: Path) -> float:
    """Distance between two paths under ``spec``."""
    if spec.is_signature:
        x, y = _prepare(spec, x), _prepare(spec, y)
        if spec.kind == "sig":
            return trunc_sig_distance(x, y, spec.N)
        return rsig_distance(x, y, spec.N, spec.robust)
    if spec.kind == "sup":
        return sup_distance(x, y)
    if spec.kind == "lp":
        return lp_distance(x, y, spec.p)
    if spec.kind == "pvar":
        return p_var_distance(x, y, spec.p)
    return dtw_distance(x, y)


def signature_features(spec: SemiMetricSpec, paths: Sequence[Path]) -> np.ndarray:
    """Raw (unnormalized) flat signatures used by both signature variants."""
    return batch_signature([_prepare(spec, p) for p in paths], spec.N)


def features(spec: SemiMetricSpec, paths: Sequence[Path]) -> np.ndarray:
    """Feature vectors whose Euclidean distance is the signature distance."""
    flat = signature_features(spec, paths)
    if spec.kind == "rsig":
        d = _prepare(spec, paths[0]).dim
        flat = robust_rescale(flat, d, spec.N, spec.robust)
    return flat


def feature_distances(fx: np.ndarray, fy: Optional[np.ndarray] = None) -> np.ndarray:
    return cdist(fx, fx if fy is None else fy)


def _common_grid(paths: Sequence[Path]) -> bool:
    t0 = paths[0].times
    return all(p.times.shape == t0.shape and np.array_equal(p.times, t0) for p in paths)


def pairwise_distances(spec: SemiMetricSpec, xs: Sequence[Path], ys: Optional[Sequence[Path]] = None) -> np.ndarray:
    """Distance matrix between ``xs`` and ``ys`` (``xs`` with itself by default).

    The self-distance diagonal is exactly zero and the self matrix is
    symmetrized exactly.
    """
    same = ys is None
    ys = xs if same else ys
    if not xs or not ys:
        raise ValueError("empty path collection")
    if spec.is_signature:
        fx = features(spec, xs)
        D = feature_distances(fx, None if same else features(spec, ys))
    elif spec.kind in ("sup", "lp") and _common_grid(list(xs) + list(ys)):
        X = np.ascontiguousarray(np.stack([p.values for p in xs]))
        Y = np.ascontiguousarray(np.stack([p.values for p in ys]))
        if X.shape[2] != Y.shape[2]:
            raise DimensionMismatch("paths have different dimensions")
        sup = spec.kind == "sup"
        D = _grid_pairwise(X, Y, trapezoid_weights(xs[0].times), 1.0 if sup else float(spec.p), sup, same)
    else:
        D = np.empty((len(xs), len(ys)))
        for i, x in enumerate(xs):
            for j, y in enumerate(ys):
                if same and j < i:
                    D[i, j] = D[j, i]
                else:
                    D[i, j] = distance(spec, x, y)
    if same:
        D = np.triu(D, 1)
        D = D + D.T
    return D
