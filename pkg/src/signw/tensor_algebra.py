"""Dense arithmetic in the truncated tensor algebra over R^d.

An element of the truncated algebra is stored level by level. Level ``k``
is a flat array of ``d**k`` coefficients, and the word ``i_1 ... i_k``
(letters ``1..d``) sits at the row-major index
``sum_j (i_j - 1) * d**(k - j)``.

Words are plain tuples of ints. Formal linear combinations of words are
dicts mapping word tuples to coefficients.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

Word = Tuple[int, ...]
FormalWordSum = Dict[Word, float]


class DimensionMismatch(ValueError):
    """Raised when two tensors live in different truncated algebras."""


@dataclass(frozen=True, eq=False)
class TruncatedTensor:
    """Element of the tensor algebra over R^d truncated at level N.

    Parameters
    ----------
    d : int
        Alphabet size.
    N : int
        Truncation level.
    levels : tuple of ndarray
        ``N + 1`` flat float arrays, level ``k`` of length ``d**k``.
    """

    d: int
    N: int
    levels: Tuple[np.ndarray, ...]

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"alphabet size must be positive, got {self.d}")
        if self.N < 0:
            raise ValueError(f"truncation level must be non-negative, got {self.N}")
        if len(self.levels) != self.N + 1:
            raise ValueError(f"expected {self.N + 1} levels, got {len(self.levels)}")
        frozen = []
        for k, lev in enumerate(self.levels):
            arr = np.array(lev, dtype=float).reshape(-1)
            if arr.size != self.d**k:
                raise ValueError(f"level {k} must have {self.d**k} entries, got {arr.size}")
            arr.setflags(write=False)
            frozen.append(arr)
        object.__setattr__(self, "levels", tuple(frozen))

    @classmethod
    def from_vector(cls, vec, d: int, N: int) -> "TruncatedTensor":
        """Split a level-major flat coefficient vector into levels."""
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if vec.size != tensor_size(d, N):
            raise ValueError(f"vector of length {vec.size} does not match d={d}, N={N}")
        return cls(d, N, tuple(np.split(vec, level_offsets(d, N)[1:-1])))

    def to_vector(self) -> np.ndarray:
        return np.concatenate(self.levels)

    @property
    def scalar(self) -> float:
        return float(self.levels[0][0])

    def level_norms(self) -> np.ndarray:
        """Euclidean norm of each level."""
        return np.array([np.linalg.norm(lev) for lev in self.levels])

    def __add__(self, other):
        return tensor_add(self, other)

    def __sub__(self, other):
        return tensor_add(self, tensor_scale(other, -1.0))

    def __mul__(self, c):
        return tensor_scale(self, c)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return tensor_product(self, other)

    def __repr__(self):
        return f"TruncatedTensor(d={self.d}, N={self.N}, levels={[lev.tolist() for lev in self.levels]})"


def tensor_size(d: int, N: int) -> int:
    """Number of coefficients in the truncated algebra, ``sum_k d**k``."""
    return sum(d**k for k in range(N + 1))


def level_offsets(d: int, N: int) -> np.ndarray:
    """Start offsets of each level in the flat layout, plus the total size."""
    return np.concatenate([[0], np.cumsum([d**k for k in range(N + 1)])]).astype(int)


def _check_compatible(a: TruncatedTensor, b: TruncatedTensor):
    if a.d != b.d or a.N != b.N:
        raise DimensionMismatch(f"(d={a.d}, N={a.N}) vs (d={b.d}, N={b.N})")


def unit_tensor(d: int, N: int) -> TruncatedTensor:
    levels = [np.zeros(d**k) for k in range(N + 1)]
    levels[0][0] = 1.0
    return TruncatedTensor(d, N, tuple(levels))


def zero_tensor(d: int, N: int) -> TruncatedTensor:
    return TruncatedTensor(d, N, tuple(np.zeros(d**k) for k in range(N + 1)))


def tensor_add(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    _check_compatible(a, b)
    return TruncatedTensor(a.d, a.N, tuple(x + y for x, y in zip(a.levels, b.levels)))


def tensor_scale(a: TruncatedTensor, c: float) -> TruncatedTensor:
    return TruncatedTensor(a.d, a.N, tuple(c * lev for lev in a.levels))


def tensor_product(a: TruncatedTensor, b: TruncatedTensor) -> TruncatedTensor:
    """Truncated tensor product.

    Level ``n`` of the result is ``sum_{l=0..n} a^(l) (x) b^(n-l)``; the outer
    product of flat row-major arrays is again row-major in the concatenated
    word, so each term is ``np.outer(...).ravel()``.
    """
    _check_compatible(a, b)
    out = []
    for n in range(a.N + 1):
        acc = np.outer(a.levels[0], b.levels[n]).reshape(-1)
        for l in range(1, n + 1):
            acc = acc + np.outer(a.levels[l], b.levels[n - l]).reshape(-1)
        out.append(acc)
    return TruncatedTensor(a.d, a.N, tuple(out))


def inner_product(a: TruncatedTensor, b: TruncatedTensor) -> float:
    _check_compatible(a, b)
    return float(sum(np.dot(x, y) for x, y in zip(a.levels, b.levels)))


def norm(a: TruncatedTensor) -> float:
    return math.sqrt(inner_product(a, a))


def dilate(a: TruncatedTensor, lam: float) -> TruncatedTensor:
    """Multiply level ``k`` by ``lam**k``."""
    if lam < 0:
        raise ValueError(f"dilation factor must be non-negative, got {lam}")
    return TruncatedTensor(a.d, a.N, tuple(lev * lam**k for k, lev in enumerate(a.levels)))


def tensor_exp(v: TruncatedTensor) -> TruncatedTensor:
    """Truncated exponential of a tensor with zero scalar part."""
    if v.levels[0][0] != 0.0:
        raise ValueError("tensor_exp needs a zero scalar part")
    result = unit_tensor(v.d, v.N)
    power = unit_tensor(v.d, v.N)
    for n in range(1, v.N + 1):
        power = tensor_product(power, v)
        result = tensor_add(result, tensor_scale(power, 1.0 / math.factorial(n)))
    return result


def tensor_log(g: TruncatedTensor) -> TruncatedTensor:
    """Truncated logarithm of a tensor with scalar part one.

    ``g - 1`` is nilpotent of order ``N + 1`` in the truncated algebra, so
    the series terminates exactly.
    """
    if g.levels[0][0] != 1.0:
        raise ValueError("tensor_log needs a scalar part equal to 1")
    x = tensor_add(g, tensor_scale(unit_tensor(g.d, g.N), -1.0))
    result = zero_tensor(g.d, g.N)
    power = unit_tensor(g.d, g.N)
    for n in range(1, g.N + 1):
        power = tensor_product(power, x)
        result = tensor_add(result, tensor_scale(power, (-1.0) ** (n + 1) / n))
    return result


# --- words --------------------------------------------------------------


def word_index(w: Sequence[int], d: int) -> int:
    """Flat index of ``w`` within its level."""
    idx = 0
    for letter in w:
        if not 1 <= letter <= d:
            raise ValueError(f"letter {letter} outside 1..{d}")
        idx = idx * d + (letter - 1)
    return idx


def word_coefficient(a: TruncatedTensor, w: Sequence[int]) -> float:
    """Coefficient of the word ``w`` in ``a``."""
    if len(w) > a.N:
        raise ValueError(f"word of length {len(w)} exceeds truncation level {a.N}")
    return float(a.levels[len(w)][word_index(w, a.d)])


def pair(s: FormalWordSum, a: TruncatedTensor) -> float:
    """Linear extension of ``word_coefficient`` to formal sums of words."""
    return float(sum(c * word_coefficient(a, w) for w, c in s.items()))


def add_word_sums(*sums: FormalWordSum) -> FormalWordSum:
    out: FormalWordSum = {}
    for s in sums:
        for w, c in s.items():
            out[w] = out.get(w, 0) + c
    return {w: c for w, c in out.items() if c != 0}


def shuffle_product(w: Sequence[int], v: Sequence[int]) -> FormalWordSum:
    """Shuffle product of two words as a dict ``{word: multiplicity}``.

    Uses ``wi ⧢ vj = (w ⧢ vj)i + (wi ⧢ v)j`` with the empty word as unit.
    """
    return dict(_shuffle(tuple(w), tuple(v)))


def _shuffle(w: Word, v: Word) -> Dict[Word, int]:
    table: Dict[Tuple[int, int], Dict[Word, int]] = {}
    for i in range(len(w) + 1):
        for j in range(len(v) + 1):
            if i == 0:
                table[i, j] = {v[:j]: 1}
            elif j == 0:
                table[i, j] = {w[:i]: 1}
            else:
                acc: Dict[Word, int] = {}
                for u, c in table[i - 1, j].items():
                    acc[u + (w[i - 1],)] = acc.get(u + (w[i - 1],), 0) + c
                for u, c in table[i, j - 1].items():
                    acc[u + (v[j - 1],)] = acc.get(u + (v[j - 1],), 0) + c
                table[i, j] = acc
    return table[len(w), len(v)]


def words(d: int, k: int) -> Iterable[Word]:
    """All words of length ``k`` in flat-index order."""
    return itertools.product(range(1, d + 1), repeat=k)


# --- free Lie algebra dimension -------------------------------------------


def mobius(n: int) -> int:
    """Möbius function by trial-division factorization."""
    if n < 1:
        raise ValueError(f"mobius needs n >= 1, got {n}")
    result = 1
    p = 2
    while p * p <= n:
        if n % p == 0:
            n //= p
            if n % p == 0:
                return 0
            result = -result
        p += 1
    if n > 1:
        result = -result
    return result


class DimensionOverflow(OverflowError):
    pass


def free_lie_dim(d: int, N: int, max_bits: int = 4096) -> int:
    """Dimension of the free step-N nilpotent Lie algebra over d generators.

    Sum over ``n = 1..N`` of the necklace counts
    ``(1/n) * sum_{l | n} mobius(n / l) * d**l``, evaluated in exact integers.
    Values wider than ``max_bits`` bits raise ``DimensionOverflow``.
    """
    if d < 1 or N < 1:
        raise ValueError(f"need d >= 1 and N >= 1, got d={d}, N={N}")
    if N * math.log2(d + 1) > 4 * max_bits:
        raise DimensionOverflow(f"nu(d={d}, N={N}) exceeds {max_bits} bits")
    total = 0
    for n in range(1, N + 1):
        s = sum(mobius(n // l) * d**l for l in range(1, n + 1) if n % l == 0)
        if s % n:
            raise ArithmeticError(f"necklace count for n={n} is not integral")
        total += s // n
    if total.bit_length() > max_bits:
        raise DimensionOverflow(f"nu(d={d}, N={N}) has {total.bit_length()} bits > {max_bits}")
    return total
