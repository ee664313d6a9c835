import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from automatte import classification as cl
from automatte.classification import ClassifyParams, ClusterModel, LabelAssignment
from automatte.segmentation import build_regions
from oracles import best_partition_inertia


def test_params_validate():
    ClassifyParams()
    for bad in (dict(t1_fraction=0), dict(t1_fraction=1.2), dict(gamma=0), dict(k=0), dict(dfb_agg="max")):
        with pytest.raises(ValueError):
            ClassifyParams(**bad)


def test_initial_labels():
    p = ClassifyParams()
    assert cl.initial_labels([0.9, 0.2, 0.31], 1.0, p).foreground.tolist() == [True, False, True]
    assert not cl.initial_labels([0.0, 0.0], 1.0, p).foreground.any()
    # a median equal to T1 stays Background
    assert not cl.initial_labels([0.25], 1.0, ClassifyParams(t1_fraction=0.25)).foreground.any()


def test_kmeans_distinct_points():
    x = np.eye(5, 185) * np.arange(1, 6)[:, None]
    m = cl.kmeans(x, 5)
    assert m.inertia == 0.0
    assert sorted(map(tuple, m.centers)) == sorted(map(tuple, x))


def test_kmeans_duplicates():
    a = np.zeros(185)
    b = np.zeros(185)
    b[0] = 1
    m = cl.kmeans(np.array([a] * 10 + [b] * 10), 2)
    assert sorted(m.centers[:, 0].tolist()) == [0.0, 1.0] and m.inertia == 0.0


def test_kmeans_line():
    x = np.array([0, 1, 2, 10, 11, 12], float)[:, None]
    m = cl.kmeans(x, 2)
    assert sorted(m.centers[:, 0].tolist()) == [1.0, 11.0]
    assert m.inertia == pytest.approx(best_partition_inertia(x, 2), abs=1e-9)


def test_kmeans_caps_k_and_rejects_bad_k():
    assert cl.kmeans(np.ones((2, 3)), 5).centers.shape == (2, 3)
    with pytest.raises(ValueError):
        cl.kmeans(np.ones((2, 3)), 0)


def test_kmeans_farthest_point_start():
    x = np.array([[1.0, 0], [0, 1.0], [0.5, 0.5], [-1, 0]])
    init = cl._farthest_point_init(x, 2)
    # first center: lowest index among the maximal-norm points; next: farthest from it
    assert np.array_equal(init, [[1.0, 0], [-1, 0]])


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(3, 30), st.integers(1, 4)), elements=st.floats(-5, 5)), st.integers(1, 5))
def test_kmeans_inertia_non_increasing(x, k):
    m = cl.kmeans(x, k)
    h = np.array(m.history)
    assert np.all(np.diff(h) <= 1e-9 * max(1.0, h.max()))
    assert np.all(np.isfinite(m.centers))


def _models(fg_centers, bg_centers):
    def mk(c):
        c = np.asarray(c, float)
        return ClusterModel(centers=c, inertia=0.0, assignment=np.zeros(0, int))

    return mk(fg_centers), mk(bg_centers)


def test_reassign_single_fg_never_flips():
    labels = LabelAssignment(np.array([True]), np.array([False]))
    fg, bg = _models([[0.0, 0.0]], [[1.0, 0.0]])
    out = cl.reassign(labels, np.array([[0.5, 0.5]]), fg, bg, ClassifyParams())
    assert out.foreground.tolist() == [True] and not out.reassigned.any()


def test_reassign_three_superpixel_fixture():
    bg_centers = [[0.0, 0.0], [2.0, 0.0]]
    fg, bg = _models([[9.0, 9.0]], bg_centers)
    feats = np.array([[0.0, 0.0], [10.0, 10.0], [12.0, 8.0]])
    labels = LabelAssignment(np.array([True, True, True]), np.zeros(3, bool))
    report = cl.ReassignReport(np.full(3, np.nan), np.full(3, np.nan))
    out = cl.reassign(labels, feats, fg, bg, ClassifyParams(), report)
    d = np.array([np.mean([np.linalg.norm(f - np.array(c)) for c in bg_centers]) for f in feats])
    assert np.allclose(report.distance, d)
    assert np.allclose(report.threshold, d.mean())
    assert out.foreground.tolist() == [False, True, True]
    assert out.reassigned.tolist() == [True, False, False]
    # provenance partitions the superpixels
    assert (~out.reassigned).sum() + out.reassigned.sum() == 3


def test_reassign_min_aggregate():
    fg, bg = _models([[0.0]], [[0.0], [100.0]])
    labels = LabelAssignment(np.array([True, True]), np.zeros(2, bool))
    feats = np.array([[1.0], [50.0]])
    report = cl.ReassignReport(np.full(2, np.nan), np.full(2, np.nan))
    cl.reassign(labels, feats, fg, bg, ClassifyParams(dfb_agg="min"), report)
    assert report.distance.tolist() == [1.0, 50.0]


def test_reassign_tiny_gamma_and_missing_side(rng):
    feats = rng.random((10, 4))
    labels = LabelAssignment(rng.random(10) < 0.5, np.zeros(10, bool))
    fg, bg = _models(rng.random((2, 4)), rng.random((2, 4)))
    out = cl.reassign(labels, feats, fg, bg, ClassifyParams(gamma=1e-12))
    assert np.array_equal(out.foreground, labels.foreground)
    # no Background model: Foreground superpixels cannot flip
    out = cl.reassign(labels, feats, fg, None, ClassifyParams())
    assert np.all(out.foreground[labels.foreground])


def test_reassign_is_simultaneous(rng):
    feats = rng.random((12, 3))
    labels = LabelAssignment(np.arange(12) % 2 == 0, np.zeros(12, bool))
    fg, bg = _models(rng.random((3, 3)), rng.random((3, 3)))
    full = cl.reassign(labels, feats, fg, bg, ClassifyParams())
    perm = rng.permutation(12)
    permuted = cl.reassign(LabelAssignment(labels.foreground[perm], labels.reassigned[perm]), feats[perm], fg, bg, ClassifyParams())
    assert np.array_equal(permuted.foreground, full.foreground[perm])


def test_modified_saliency():
    labels = np.zeros((4, 6), int)
    labels[:, 3:] = 1
    sp = build_regions(labels, np.zeros((4, 6, 3)))
    sm = np.full((4, 6), 0.8)
    both = LabelAssignment(np.array([True, True]), np.zeros(2, bool))
    none = LabelAssignment(np.array([False, False]), np.zeros(2, bool))
    one = LabelAssignment(np.array([True, False]), np.zeros(2, bool))
    assert np.array_equal(cl.modified_saliency(sm, sp, both), sm)
    assert not cl.modified_saliency(sm, sp, none).any()
    out = cl.modified_saliency(sm, sp, one)
    assert (out[:, :3] == 0.8).all() and (out[:, 3:] == 0).all()


def test_classify_superpixels_and_table(tmp_path, rng):
    feats = rng.random((20, 185))
    med = rng.random(20)
    init, final, fgm, bgm, report = cl.classify_superpixels(feats, med, 1.0, ClassifyParams())
    assert np.array_equal(init.foreground, med > 0.3)
    assert fgm.centers.shape == (5, 185) and bgm.centers.shape[0] == min(5, (~init.foreground).sum())
    cl.save_classification_table(tmp_path / "c.csv", med, init, final, report)
    rows = (tmp_path / "c.csv").read_text().splitlines()
    assert rows[0] == "label,median_saliency,initial,D_opposite,T2_side,final" and len(rows) == 21


@pytest.mark.parametrize("n,k", [(4, 2), (6, 2), (6, 3), (7, 3), (8, 2)])
def test_kmeans_matches_exhaustive(n, k):
    # well-separated groups so a single Lloyd run reaches the global optimum
    rng = np.random.default_rng(n * 10 + k)
    centers = rng.normal(size=(k, 3)) * 20
    x = centers[np.arange(n) % k] + rng.normal(size=(n, 3)) * 0.5
    assert abs(cl.kmeans(x, k).inertia - best_partition_inertia(x, k)) <= 1e-9
