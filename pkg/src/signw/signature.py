"""Truncated signatures of sampled paths.

A sampled series is always read as its piecewise-linear interpolant. The
signature of one linear segment is the tensor exponential of its increment,
and the signature of the whole path is the left-to-right tensor product of
the segment signatures (Chen's identity).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .tensor_algebra import (
    TruncatedTensor,
    level_offsets,
    tensor_product,
    tensor_size,
    unit_tensor,
)


@dataclass(frozen=True, eq=False)
class Path:
    """Sampled multivariate series with strictly increasing times.

    ``values`` has one row per time stamp and one column per channel.
    """

    times: np.ndarray
    values: np.ndarray
    augmented: bool = False

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2:
            raise ValueError("values must be a 2-d array (samples x channels)")
        if times.size == 0:
            raise ValueError("a path needs at least one sample")
        if values.shape[0] != times.size:
            raise ValueError(f"{times.size} times but {values.shape[0]} value rows")
        if values.shape[1] < 1:
            raise ValueError("a path needs at least one channel")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise ValueError("path contains non-finite entries")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def n_segments(self) -> int:
        return self.times.size - 1

    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def one_variation(self) -> float:
        """Length of the piecewise-linear path."""
        return float(np.linalg.norm(self.increments(), axis=1).sum())

    def restrict(self, start: int, stop: int) -> "Path":
        """Sub-path on the vertices ``start..stop`` inclusive."""
        return Path(self.times[start : stop + 1], self.values[start : stop + 1], self.augmented)

    def shifted(self, offset) -> "Path":
        return Path(self.times, self.values + np.asarray(offset, dtype=float), self.augmented)

    def value_at(self, t: np.ndarray) -> np.ndarray:
        """Linear interpolation of every channel at the times ``t``.

        Outside the sampled interval the path is held constant.
        """
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, self.times, self.values[:, j]) for j in range(self.dim)], axis=1)


def time_augment(p: Path) -> Path:
    """Prepend time as channel 0."""
    return Path(p.times, np.column_stack([p.times, p.values]), augmented=True)


def segment_signature(delta, N: int) -> TruncatedTensor:
    """Signature of a straight segment with increment ``delta``."""
    delta = np.asarray(delta, dtype=float).reshape(-1)
    d = delta.size
    levels = [np.ones(1)]
    for k in range(1, N + 1):
        levels.append(np.outer(levels[-1], delta).reshape(-1) / k)
    return TruncatedTensor(d, N, tuple(levels))


def path_signature(p: Path, N: int) -> TruncatedTensor:
    """Truncated signature of ``p`` by a left-to-right Chen fold."""
    sig = unit_tensor(p.dim, N)
    for delta in p.increments():
        if not np.any(delta):
            continue
        sig = tensor_product(sig, segment_signature(delta, N))
    return sig


def chen_concat(s1: TruncatedTensor, s2: TruncatedTensor) -> TruncatedTensor:
    """Signature of a concatenated path from the signatures of its pieces."""
    return tensor_product(s1, s2)


def _batch_fold(increments: np.ndarray, N: int) -> List[np.ndarray]:
    """Chen fold over segments for a batch of equal-length paths.

    ``increments`` has shape ``(B, L, d)``. Returns the levels as arrays of
    shape ``(B, d**k)``.
    """
    B, L, d = increments.shape
    levels = [np.ones((B, 1))] + [np.zeros((B, d**k)) for k in range(1, N + 1)]
    for i in range(L):
        delta = increments[:, i, :]
        seg = [np.ones((B, 1))]
        for k in range(1, N + 1):
            seg.append((seg[-1][:, :, None] * delta[:, None, :]).reshape(B, -1) / k)
        # descending n keeps lower levels untouched until they are consumed
        for n in range(N, 0, -1):
            acc = levels[n] + seg[n]
            for l in range(1, n):
                acc += (levels[l][:, :, None] * seg[n - l][:, None, :]).reshape(B, -1)
            levels[n] = acc
    return levels


def batch_signature(paths: Sequence[Path], N: int) -> np.ndarray:
    """Flat level-major signatures of many paths, shape ``(n, sum_k d**k)``.

    Paths with the same number of samples are folded together. All paths
    must share a dimension.
    """
    if not paths:
        raise ValueError("no paths given")
    d = paths[0].dim
    if any(p.dim != d for p in paths):
        raise ValueError("all paths must share the same dimension")
    out = np.empty((len(paths), tensor_size(d, N)))
    by_len: dict = {}
    for i, p in enumerate(paths):
        by_len.setdefault(p.times.size, []).append(i)
    for idx in by_len.values():
        incs = np.stack([paths[i].increments() for i in idx])
        out[idx] = np.concatenate(_batch_fold(incs, N), axis=1)
    return out


def batch_signature_array(values: np.ndarray, N: int) -> np.ndarray:
    """Signatures of paths stacked as ``(B, L + 1, d)`` value arrays."""
    values = np.asarray(values, dtype=float)
    return np.concatenate(_batch_fold(np.diff(values, axis=1), N), axis=1)


def signature_levels(flat: np.ndarray, d: int, N: int) -> List[np.ndarray]:
    """Split flat signatures (last axis) into per-level views."""
    off = level_offsets(d, N)
    return [flat[..., off[k] : off[k + 1]] for k in range(N + 1)]


def factorial_bound(p: Path, k: int) -> float:
    """Upper bound ``||x||_{1-var}^k / k!`` on the level-k norm."""
    return p.one_variation() ** k / math.factorial(k)
