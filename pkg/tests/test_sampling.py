"""Selection algorithms: FPS against a quadratic oracle, error ranking, PCA."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nepcurate.sampling import (
    farthest_point_sample,
    max_error_select,
    pca_project,
    rank_errors,
)


def reference_fps(points, max_count, min_distance=0.0, seed_index=None, base=None):
    """Quadratic-time reference: recomputes min-distances from scratch each
    step instead of maintaining a running minimum."""
    pts = np.asarray(points, dtype=float)
    m = pts.shape[0]
    anchors = [np.asarray(b, dtype=float) for b in (base if base is not None else [])]
    selected = []

    def d2_to_set(i):
        best = np.inf
        for a in anchors:
            delta = pts[i] - a
            best = min(best, float(delta @ delta))
        for s in selected:
            delta = pts[i] - pts[s]
            best = min(best, float(delta @ delta))
        return best

    if max_count > 0:
        if seed_index is not None:
            selected.append(seed_index)
        elif not anchors:
            mean = pts.mean(axis=0)
            d = [float((p - mean) @ (p - mean)) for p in pts]
            selected.append(int(np.argmax(d)))

    while len(selected) < max_count:
        remaining = [i for i in range(m) if i not in selected]
        if not remaining:
            break
        dists = [d2_to_set(i) for i in remaining]
        k = int(np.argmax(dists))
        if dists[k] < min_distance * min_distance:
            break
        selected.append(remaining[k])
    return selected


def test_fps_spec_trace_line():
    points = np.arange(10, dtype=float).reshape(-1, 1)
    result = farthest_point_sample(points, max_count=3, seed_index=0)
    assert result.selected == [0, 9, 4]
    assert sorted(result.selected + result.rejected) == list(range(10))


def test_fps_min_distance_stops():
    points = np.array([[0.0], [0.5], [10.0]])
    result = farthest_point_sample(points, max_count=10, min_distance=1.0,
                                   seed_index=0)
    assert result.selected == [0, 2]
    assert result.rejected == [1]
    assert result.min_achieved_distance == pytest.approx(10.0)


def test_fps_singleton():
    result = farthest_point_sample(np.zeros((1, 2)), max_count=5)
    assert result.selected == [0]
    assert result.rejected == []


def test_fps_max_count_zero():
    result = farthest_point_sample(np.zeros((4, 2)), max_count=0)
    assert result.selected == []
    assert result.rejected == [0, 1, 2, 3]


def test_fps_matches_reference_oracle(rng):
    for trial in range(5):
        points = rng.normal(size=(60, 4))
        result = farthest_point_sample(points, max_count=20, min_distance=0.5)
        assert result.selected == reference_fps(points, 20, min_distance=0.5)


def test_fps_with_base_matches_reference(rng):
    points = rng.normal(size=(40, 3))
    base = rng.normal(size=(6, 3))
    result = farthest_point_sample(points, max_count=10, base=base)
    assert result.selected == reference_fps(points, 10, base=base)


def test_fps_base_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        farthest_point_sample(rng.normal(size=(5, 3)), 2,
                              base=rng.normal(size=(2, 4)))


def test_fps_empty_candidates_rejected():
    with pytest.raises(ValueError):
        farthest_point_sample(np.zeros((0, 3)), 1)


def test_fps_acceptance_distances_non_increasing(rng):
    points = rng.normal(size=(80, 5))
    accepted = []
    result = farthest_point_sample(points, max_count=30)
    # replay acceptance distances with the quadratic recomputation
    chosen = []
    for idx in result.selected:
        if chosen:
            d = min(np.linalg.norm(points[idx] - points[c]) for c in chosen)
            accepted.append(d)
        chosen.append(idx)
    assert all(accepted[k + 1] <= accepted[k] + 1e-12 for k in range(len(accepted) - 1))


def test_fps_rejected_all_below_floor(rng):
    points = rng.normal(size=(50, 3))
    floor = 1.2
    result = farthest_point_sample(points, max_count=50, min_distance=floor)
    chosen = result.selected
    for r in result.rejected:
        d = min(np.linalg.norm(points[r] - points[c]) for c in chosen)
        assert d < floor


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(2, 40))
def test_fps_permutation_covariance(seed, m):
    rng = np.random.default_rng(seed)
    points = rng.normal(size=(m, 3))
    perm = rng.permutation(m)
    inverse = np.empty(m, dtype=int)
    inverse[perm] = np.arange(m)
    a = farthest_point_sample(points, max_count=min(m, 7), seed_index=0)
    b = farthest_point_sample(points[perm], max_count=min(m, 7),
                              seed_index=int(inverse[0]))
    assert [int(inverse[i]) for i in a.selected] == b.selected


# -- max error ----------------------------------------------------------------

def test_max_error_direct_sort():
    pred = np.array([[0.1], [0.5], [0.3]])
    ref = np.zeros((3, 1))
    assert max_error_select(pred, ref, 2) == [1, 2]


def test_max_error_n_zero_empty():
    assert max_error_select(np.ones((3, 2)), np.zeros((3, 2)), 0) == []


def test_max_error_n_beyond_m_returns_all_sorted(rng):
    pred = rng.normal(size=(5, 2))
    ref = rng.normal(size=(5, 2))
    errors = np.abs(pred - ref).sum(axis=1)
    got = max_error_select(pred, ref, 50)
    assert len(got) == 5
    assert all(errors[got[k]] >= errors[got[k + 1]] for k in range(4))


def test_max_error_ties_lowest_index():
    pred = np.array([[1.0], [1.0], [2.0]])
    ref = np.zeros((3, 1))
    assert max_error_select(pred, ref, 3) == [2, 0, 1]


def test_max_error_matches_full_sort_oracle(rng):
    pred = rng.normal(size=(100, 3))
    ref = rng.normal(size=(100, 3))
    errors = [sum(abs(p - r) for p, r in zip(pr, rr)) for pr, rr in zip(pred, ref)]
    oracle = sorted(range(100), key=lambda i: (-errors[i], i))[:10]
    assert max_error_select(pred, ref, 10) == oracle


def test_max_error_shape_mismatch():
    with pytest.raises(ValueError):
        max_error_select(np.zeros((3, 2)), np.zeros((3, 3)), 1)


def test_rank_errors_negative_n():
    with pytest.raises(ValueError):
        rank_errors([1.0], -1)


# -- PCA ------------------------------------------------------------------------

def test_pca_collinear_points():
    points = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    proj = pca_project(points)
    axis = proj.component_axes[0]
    assert np.allclose(np.abs(axis), [1 / np.sqrt(2)] * 2, atol=1e-12)
    assert proj.explained_variance[1] < 1e-12


def test_pca_axis_aligned_identity():
    points = np.array([[-2.0, 0.0], [2.0, 0.0], [0.0, 1.0], [0.0, -1.0]])
    proj = pca_project(points)
    assert np.allclose(np.abs(proj.coords), np.abs(points), atol=1e-12)
    assert proj.explained_variance[0] >= proj.explained_variance[1]


def test_pca_matches_dense_eig_oracle(rng):
    points = rng.normal(size=(50, 6))
    proj = pca_project(points)
    centered = points - points.mean(axis=0)
    # independent oracle: singular values of the centered data
    svals = np.linalg.svd(centered, compute_uv=False)
    expected = (svals**2 / (points.shape[0] - 1))[:2]
    assert np.allclose(proj.explained_variance, expected, rtol=1e-9)


def test_pca_axes_orthonormal(rng):
    proj = pca_project(rng.normal(size=(30, 5)))
    gram = proj.component_axes @ proj.component_axes.T
    assert np.allclose(gram, np.eye(2), atol=1e-12)


def test_pca_sign_convention(rng):
    proj = pca_project(rng.normal(size=(30, 5)))
    for axis in proj.component_axes:
        assert axis[np.argmax(np.abs(axis))] > 0


def test_pca_total_variance_identity(rng):
    """Variance captured by the 2D coordinates equals the top-2 eigenvalues."""
    points = rng.normal(size=(40, 4))
    proj = pca_project(points)
    coord_var = proj.coords.var(axis=0, ddof=1)
    assert np.allclose(coord_var, proj.explained_variance, rtol=1e-9)


def test_pca_too_few_points():
    with pytest.raises(ValueError):
        pca_project(np.zeros((1, 3)))
