import math

import numpy as np
import pytest

from signw.metrics import SemiMetricSpec, pairwise_distances
from signw.regression import (
    CVConfig,
    accuracy,
    cross_validate,
    fit,
    fold_indices,
    kernel_eval,
    median_offdiag,
    nw_classify,
    nw_predict,
    nw_predict_from_distances,
    rmse,
)
from signw.signature import Path

SUP = SemiMetricSpec.parse("sup")
SIG = SemiMetricSpec.parse("sig:2")


def const_path(c, n=3):
    return Path(np.arange(n, dtype=float), np.full(n, float(c)))


def smooth_task(rng, n, noise=0.05, freq=3.0):
    """Linear paths with random slope; target is a smooth function of the slope."""
    t = np.linspace(0, 1, 11)
    slopes = rng.uniform(-1, 1, n)
    paths = [Path(t, s * t) for s in slopes]
    return paths, np.sin(freq * slopes) + noise * rng.standard_normal(n)


def test_kernel_eval():
    assert kernel_eval("box", 0.5) == 1.0
    assert kernel_eval("box", 1.0) == 1.0
    assert kernel_eval("box", 1.5) == 0.0
    assert kernel_eval("gaussian", 0.0) == 1.0
    assert kernel_eval("gaussian", 2.0) == pytest.approx(0.1353352832366127, abs=1e-15)
    with pytest.raises(ValueError):
        kernel_eval("box", -0.1)
    with pytest.raises(ValueError):
        kernel_eval("epanechnikov", 0.1)


def test_box_weights_by_hand():
    D = np.array([[0.5, 2.0]])
    assert nw_predict_from_distances(D, np.array([1.0, 5.0]), "box", 1.0).tolist() == [1.0]


def test_equidistant_neighbours_average():
    D = np.array([[0.7, 0.7]])
    for k in ("box", "gaussian"):
        assert nw_predict_from_distances(D, np.array([0.0, 2.0]), k, 1.0)[0] == pytest.approx(1.0, abs=1e-15)


def test_constant_targets():
    paths = [const_path(c) for c in range(5)]
    m = fit(SUP, "gaussian", 2.0, paths, targets=[3.5] * 5)
    assert nw_predict(m, const_path(1.7)) == pytest.approx(3.5, abs=1e-14)


def test_self_prediction_with_tiny_bandwidth():
    rng = np.random.default_rng(0)
    paths, y = smooth_task(rng, 20)
    m = fit(SIG, "box", 1e-12, paths, targets=y)
    for p, target in zip(paths, y):
        assert nw_predict(m, p) == target


def test_single_training_point():
    m = fit(SUP, "gaussian", 1.0, [const_path(0)], targets=[4.2])
    assert nw_predict(m, const_path(3)) == 4.2


def test_nearest_neighbour_fallback_with_lowest_index_tie():
    paths = [const_path(0), const_path(2), const_path(-2)]
    m = fit(SUP, "box", 0.1, paths, targets=[1.0, 7.0, 9.0])
    # no neighbour within h; nearest is index 1
    assert nw_predict(m, const_path(1.5)) == 7.0
    # query 0 sits at distance 2 from both training paths; the lower index wins
    m2 = fit(SUP, "box", 0.1, paths[1:], targets=[7.0, 9.0])
    assert nw_predict(m2, const_path(0)) == 7.0


def test_gaussian_underflow_falls_back():
    m = fit(SUP, "gaussian", 1e-3, [const_path(0), const_path(10)], targets=[1.0, 2.0])
    assert nw_predict(m, const_path(8)) == 2.0


def test_cached_equals_uncached():
    rng = np.random.default_rng(1)
    paths, y = smooth_task(rng, 30)
    queries, _ = smooth_task(rng, 10)
    spec = SemiMetricSpec.parse("rsig:3:1.0:1.0", augment=True)
    a = fit(spec, "gaussian", 0.3, paths, targets=y, cache=True)
    b = fit(spec, "gaussian", 0.3, paths, targets=y, cache=False)
    assert a.train_features is not None and b.train_features is None
    assert np.abs(a.predict(queries) - b.predict(queries)).max() <= 1e-12


def test_fit_validation():
    with pytest.raises(ValueError):
        fit(SUP, "box", 1.0, [], targets=[])
    with pytest.raises(ValueError):
        fit(SUP, "box", 0.0, [const_path(0)], targets=[1])
    with pytest.raises(ValueError):
        fit(SUP, "box", 1.0, [const_path(0), Path([0, 1], [[0, 0], [1, 1]])], targets=[1, 2])
    with pytest.raises(ValueError):
        fit(SUP, "box", 1.0, [const_path(0)], targets=[1, 2])


def test_prediction_is_convex_combination_and_permutation_invariant():
    rng = np.random.default_rng(2)
    paths, y = smooth_task(rng, 25)
    queries, _ = smooth_task(rng, 15)
    m = fit(SIG, "gaussian", 0.2, paths, targets=y)
    pred = m.predict(queries)
    assert np.all(pred >= y.min() - 1e-12) and np.all(pred <= y.max() + 1e-12)
    perm = rng.permutation(len(paths))
    m2 = fit(SIG, "gaussian", 0.2, [paths[i] for i in perm], targets=y[perm])
    assert np.allclose(m2.predict(queries), pred, atol=1e-12, rtol=0)


def test_box_scale_invariance():
    rng = np.random.default_rng(3)
    D = rng.uniform(0, 2, (6, 10))
    y = rng.standard_normal(10)
    a = nw_predict_from_distances(D, y, "box", 0.8)
    b = nw_predict_from_distances(D * 4.0, y, "box", 3.2)
    assert np.array_equal(a, b)


def test_wide_box_gives_global_mean():
    rng = np.random.default_rng(4)
    paths, y = smooth_task(rng, 12)
    diameter = pairwise_distances(SUP, paths).max()
    m = fit(SUP, "box", 2 * diameter + 1, paths, targets=y)
    assert nw_predict(m, paths[3]) == pytest.approx(y.mean(), abs=1e-12)


# --- classification ---------------------------------------------------------------


def test_classify_single_label():
    m = fit(SUP, "gaussian", 1.0, [const_path(c) for c in range(4)], labels=["a"] * 4)
    label, scores = nw_classify(m, const_path(10))
    assert label == "a" and scores == {"a": 1.0}


def test_classify_one_in_range_neighbour():
    m = fit(SUP, "box", 1.0, [const_path(0), const_path(5)], labels=["x", "y"])
    label, scores = nw_classify(m, const_path(0.4))
    assert label == "x" and scores == {"x": 1.0, "y": 0.0}


def test_classify_scores_sum_to_one_and_tie_break():
    paths = [const_path(c) for c in (0, 1, 2, 3)]
    m = fit(SUP, "gaussian", 1.0, paths, labels=["b", "a", "b", "a"])
    label, scores = nw_classify(m, const_path(1.5))
    assert sum(scores.values()) == pytest.approx(1.0, abs=1e-15)
    assert label == "a"  # exact tie broken lexicographically


def test_classify_relabeling_invariance():
    rng = np.random.default_rng(5)
    paths, y = smooth_task(rng, 30)
    labels = np.where(y > 0, "pos", "neg")
    queries, _ = smooth_task(rng, 10)
    m1 = fit(SIG, "gaussian", 0.3, paths, labels=labels)
    relabel = {"pos": "A", "neg": "Z"}
    m2 = fit(SIG, "gaussian", 0.3, paths, labels=[relabel[x] for x in labels])
    p1, _ = m1.classify(queries)
    p2, _ = m2.classify(queries)
    assert [relabel[x] for x in p1] == p2


# --- metrics of fit ----------------------------------------------------------------


def test_rmse_and_accuracy():
    assert rmse([1, 2], [1, 2]) == 0.0
    assert rmse([0, 0], [3, 4]) == pytest.approx(math.sqrt(12.5), abs=1e-15)
    assert accuracy(["a", "b"], ["a", "b"]) == 1.0
    assert accuracy(["a", "b"], ["a", "a"]) == 0.5
    with pytest.raises(ValueError):
        rmse([], [])
    with pytest.raises(ValueError):
        accuracy(["a"], ["a", "b"])


# --- cross-validation ----------------------------------------------------------------


def test_folds_partition():
    folds = fold_indices(23, 5, seed=3)
    allidx = np.concatenate(folds)
    assert sorted(allidx.tolist()) == list(range(23))
    assert [len(f) for f in folds] == [5, 5, 5, 4, 4]
    assert all(np.array_equal(a, b) for a, b in zip(folds, fold_indices(23, 5, seed=3)))
    with pytest.raises(ValueError):
        fold_indices(3, 5, seed=0)


def test_cv_config_validation():
    with pytest.raises(ValueError):
        CVConfig(folds=1)
    with pytest.raises(ValueError):
        CVConfig(bandwidths=())
    with pytest.raises(ValueError):
        CVConfig(C_grid=())


def test_single_candidate_grid():
    rng = np.random.default_rng(6)
    paths, y = smooth_task(rng, 20)
    res = cross_validate(CVConfig(folds=4, bandwidths=(0.3,), relative=False), SUP, "gaussian", paths, targets=y)
    assert res.h == 0.3 and len(res.candidates) == 1


def test_median_scale_beats_tiny_bandwidth():
    rng = np.random.default_rng(7)
    paths, y = smooth_task(rng, 120, noise=0.5, freq=1.0)
    med = median_offdiag(pairwise_distances(SIG, paths))
    cfg = CVConfig(folds=5, bandwidths=(1e-9, med), relative=False)
    res = cross_validate(cfg, SIG, "gaussian", paths, targets=y)
    scores = {round(c["h"], 15): c["score"] for c in res.candidates}
    assert scores[round(med, 15)] < scores[1e-9]
    assert res.h == med


def test_ties_prefer_smaller_bandwidth():
    paths = [const_path(c) for c in range(6)]
    res = cross_validate(CVConfig(folds=3, bandwidths=(5.0, 2.0, 3.0), relative=False), SUP, "gaussian",
                         paths, targets=[0.0] * 6)
    assert res.h == 2.0


def test_rsig_grid_search_tie_breaks_on_C_then_a():
    rng = np.random.default_rng(8)
    paths, y = smooth_task(rng, 30)
    cfg = CVConfig(folds=3, bandwidths=(0.5,), C_grid=(64.0, 32.0), a_grid=(2.0, 1.0))
    spec = SemiMetricSpec.parse("rsig:2:1.0:1.0", augment=True)
    res = cross_validate(cfg, spec, "gaussian", paths, targets=y)
    # all paths are small, so every (C, a) is the identity and scores tie
    assert len({c["score"] for c in res.candidates}) == 1
    assert (res.metric.C, res.metric.a) == (32.0, 1.0)
    assert len(res.candidates) == 4


def test_cv_classification():
    rng = np.random.default_rng(9)
    paths, y = smooth_task(rng, 40)
    labels = np.where(y > 0, "pos", "neg")
    res = cross_validate(CVConfig(folds=4), SIG, "gaussian", paths, labels=labels)
    assert res.score >= 0.8
    with pytest.raises(ValueError):
        cross_validate(CVConfig(folds=4), SIG, "gaussian", paths)
