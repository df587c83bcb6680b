import math
import time

import numpy as np
import pytest

from signw.signature import (
    Path,
    batch_signature,
    chen_concat,
    path_signature,
    segment_signature,
    time_augment,
)
from signw.tensor_algebra import TruncatedTensor, unit_tensor, word_coefficient

from oracles import random_pl_values, riemann_level2, word_signature


def max_err(a, b):
    return max(np.abs(x - y).max() for x, y in zip(a.levels, b.levels))


def rand_path(rng, n, d):
    times = np.cumsum(rng.uniform(0.1, 1.0, n))
    return Path(times, random_pl_values(rng, n, d))


@pytest.fixture
def rng():
    return np.random.default_rng(7)


class TestPath:
    def test_rejects_duplicate_times(self):
        with pytest.raises(ValueError):
            Path([0.0, 1.0, 1.0], [0.0, 1.0, 2.0])

    def test_rejects_misaligned(self):
        with pytest.raises(ValueError):
            Path([0.0, 1.0], [[0.0], [1.0], [2.0]])

    def test_single_sample_allowed(self):
        p = Path([0.0], [[1.0, 2.0]])
        assert p.n_segments == 0
        assert path_signature(p, 3).to_vector().tolist() == unit_tensor(2, 3).to_vector().tolist()

    def test_one_variation(self):
        p = Path([0, 1, 2], [[0, 0], [3, 4], [3, 5]])
        assert p.one_variation() == 6.0


def test_time_augment():
    p = time_augment(Path([0.0, 1.0], [0.0, 3.0]))
    assert p.values.tolist() == [[0.0, 0.0], [1.0, 3.0]]
    assert p.dim == 2 and p.augmented


def test_time_augment_adds_one_increasing_channel(rng):
    p = rand_path(rng, 6, 3)
    q = time_augment(p)
    assert q.dim == p.dim + 1
    assert np.all(np.diff(q.values[:, 0]) > 0)


def test_segment_signature():
    assert max_err(segment_signature([0.0, 0.0], 3), unit_tensor(2, 3)) == 0
    a = -0.8
    got = segment_signature([a], 3).to_vector()
    assert np.allclose(got, [1, a, a**2 / 2, a**3 / 6], atol=1e-15, rtol=0)
    assert segment_signature([1.0, 2.0], 2).levels[2].tolist() == [0.5, 1.0, 1.0, 2.0]


def test_constant_path_is_unit():
    p = Path([0, 1, 2, 3], [[1.5, -2.0]] * 4)
    assert max_err(path_signature(p, 4), unit_tensor(2, 4)) == 0


def test_single_segment():
    s = path_signature(Path([0, 1], [[0, 0], [1, 2]]), 2)
    assert s.levels[1].tolist() == [1.0, 2.0]
    assert s.levels[2].tolist() == [0.5, 1.0, 1.0, 2.0]


def test_l_shaped_path():
    values = [[0, 0], [1, 0], [1, 1]]
    s = path_signature(Path([0, 1, 2], values), 2)
    assert s.levels[2].tolist() == [0.5, 1.0, 0.0, 0.5]
    assert np.allclose(riemann_level2(values).ravel(), s.levels[2], atol=1e-6)


@pytest.mark.parametrize("d, N", [(1, 5), (2, 4), (3, 3)])
def test_against_word_oracle(rng, d, N):
    values = random_pl_values(rng, 6, d)
    s = path_signature(Path(np.arange(6.0), values), N)
    oracle = word_signature(values, N)
    for w, c in oracle.items():
        assert word_coefficient(s, w) == pytest.approx(c, abs=1e-12)


def test_level_two_against_riemann_sum(rng):
    values = random_pl_values(rng, 5, 2)
    s = path_signature(Path(np.arange(5.0), values), 2)
    assert np.allclose(s.levels[2], riemann_level2(values).ravel(), atol=1e-5)


def test_level_one_is_total_increment(rng):
    p = rand_path(rng, 9, 3)
    assert np.allclose(path_signature(p, 3).levels[1], p.values[-1] - p.values[0], atol=1e-13)


def test_chen_split(rng):
    p = rand_path(rng, 12, 2)
    for s in (1, 5, 10):
        joined = chen_concat(path_signature(p.restrict(0, s), 4), path_signature(p.restrict(s, 11), 4))
        assert max_err(joined, path_signature(p, 4)) <= 1e-12
    sig = path_signature(p, 3)
    assert max_err(chen_concat(unit_tensor(2, 3), sig), sig) == 0


def test_reversed_path_is_inverse(rng):
    p = rand_path(rng, 8, 3)
    rev = Path(p.times, p.values[::-1])
    out = chen_concat(path_signature(p, 4), path_signature(rev, 4))
    assert max_err(out, unit_tensor(3, 4)) <= 1e-10


def test_factorial_decay(rng):
    for _ in range(50):
        d = int(rng.integers(1, 4))
        p = rand_path(rng, int(rng.integers(2, 10)), d)
        s = path_signature(p, 5)
        ell = p.one_variation()
        for k, lev in enumerate(s.levels):
            assert np.linalg.norm(lev) <= ell**k / math.factorial(k) * (1 + 1e-12) + 1e-15


def test_reparametrization_invariance(rng):
    p = rand_path(rng, 5, 2)
    # insert collinear points inside segment 2 and retime
    a, b = p.values[1], p.values[2]
    extra = [a + s * (b - a) for s in (0.2, 0.55, 0.9)]
    values = np.vstack([p.values[:2], extra, p.values[2:]])
    q = Path(np.linspace(0, 1, len(values)) ** 2, values)
    assert max_err(path_signature(p, 4), path_signature(q, 4)) <= 1e-12


def test_translation_invariance(rng):
    p = rand_path(rng, 7, 3)
    assert max_err(path_signature(p, 4), path_signature(p.shifted([5.0, -2.0, 0.3]), 4)) <= 1e-12


def test_batch_matches_single(rng):
    paths = [rand_path(rng, n, 2) for n in (3, 5, 5, 8, 3)]
    flat = batch_signature(paths, 4)
    for row, p in zip(flat, paths):
        assert np.abs(row - path_signature(p, 4).to_vector()).max() <= 1e-12


def test_batch_rejects_mixed_dims(rng):
    with pytest.raises(ValueError):
        batch_signature([rand_path(rng, 3, 2), rand_path(rng, 3, 1)], 2)


def test_separation_of_augmented_paths(rng):
    base = np.linspace(0, 1, 6)
    paths = [time_augment(Path(base, np.vstack([np.zeros((1, 2)), random_pl_values(rng, 5, 2)]))) for _ in range(30)]
    # two that only differ by timing, both starting at the origin
    v = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    paths.append(time_augment(Path([0.0, 0.5, 1.0], v)))
    paths.append(time_augment(Path([0.0, 0.2, 1.0], v)))
    flat = batch_signature(paths, 3)
    diffs = np.linalg.norm(flat[:, None, :] - flat[None, :, :], axis=-1)
    off = diffs[~np.eye(len(paths), dtype=bool)]
    assert off.min() > 1e-8


def test_cost_is_linear_in_length():
    rng = np.random.default_rng(0)

    def timed(L):
        p = Path(np.arange(L + 1.0), random_pl_values(rng, L + 1, 3))
        start = time.perf_counter()
        for _ in range(3):
            path_signature(p, 3)
        return time.perf_counter() - start

    timed(50)
    t1, t4 = timed(200), timed(800)
    assert 2.0 < t4 / t1 < 8.0
