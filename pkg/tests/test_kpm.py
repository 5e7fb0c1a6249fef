import logging

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from dfecs.errors import SampleTooLarge, SubjectMismatch
from dfecs.geometry import N_KEYPOINTS, RawFrame, StandardizedFrame
from dfecs.kpm import (DEFAULT_PARTITION, N_ROWS, FacePartition, KpmVector, build_matrix,
                       compute_kpm, expand_to_full, extract_part, kpms_from_frames,
                       select_neutral)

ALL = np.ones(N_KEYPOINTS, bool)


def sframe(coords, subject="s", idx=0, neutral=False, valid=ALL):
    return StandardizedFrame(subject, idx, neutral, coords, valid)


def test_partition_layout():
    p = DEFAULT_PARTITION
    assert p.names == ["left_eyebrow", "right_eyebrow", "left_eye", "right_eye",
                       "nose", "lips", "jawline"]
    assert p.dim("left_eyebrow") == 10 and p.dim("right_eyebrow") == 10
    assert sum(p.dim(n) for n in p.names) == N_ROWS
    rows = np.concatenate([p.rows(n) for n in p.names])
    assert sorted(rows) == list(range(N_ROWS))


def test_partition_rejects_overlap():
    with pytest.raises(ValueError):
        FacePartition((("a", tuple(range(0, 40))), ("b", tuple(range(39, 68)))))


def test_partition_dict_round_trip():
    assert FacePartition.from_dict(DEFAULT_PARTITION.to_dict()) == DEFAULT_PARTITION


def test_kpm_of_neutral_is_zero(face):
    n = sframe(face, neutral=True)
    assert not compute_kpm(n, n).values.any()


def test_single_point_displacement(face):
    moved = face.copy()
    moved[48] += [1.5, -2.0]
    v = compute_kpm(sframe(face), sframe(moved, idx=1)).values
    assert np.count_nonzero(v) == 2
    assert tuple(v[96:98]) == (1.5, -2.0)


def test_masking_rule(face):
    valid = ALL.copy()
    valid[30] = False
    v = compute_kpm(sframe(face), sframe(face + 1.0, idx=1, valid=valid))
    assert v.values[60] == 0 and v.values[61] == 0
    assert v.masked[30] and v.masked.sum() == 1
    assert np.all(np.delete(v.values, [60, 61]) == 1.0)


def test_compute_kpm_requires_same_subject_and_standardized(face):
    with pytest.raises(SubjectMismatch):
        compute_kpm(sframe(face, "a"), sframe(face, "b"))
    with pytest.raises(TypeError):
        compute_kpm(RawFrame("s", 0, True, face, ALL), sframe(face))


@given(arrays(float, (N_KEYPOINTS, 2), elements=st.floats(-50, 50)),
       arrays(float, (N_KEYPOINTS, 2), elements=st.floats(-50, 50)))
def test_linearity(a, b):
    base = np.full((N_KEYPOINTS, 2), 100.0)
    n = sframe(base)
    lhs = compute_kpm(n, sframe(base + a)).values + compute_kpm(n, sframe(base + b)).values
    rhs = compute_kpm(n, sframe(base + a + b)).values
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_select_neutral_takes_first_by_index(face):
    frames = [sframe(face, idx=5, neutral=True), sframe(face, idx=2, neutral=True),
              sframe(face, idx=1)]
    assert select_neutral(frames).frame_index == 2
    assert select_neutral([sframe(face)]) is None


def test_subjects_without_neutral_are_excluded(face, caplog):
    frames = [sframe(face, "a", 0, True), sframe(face + 1, "a", 1),
              sframe(face, "b", 0), sframe(face, "b", 1)]
    with caplog.at_level(logging.WARNING):
        vecs = kpms_from_frames(frames)
    assert [v.subject_id for v in vecs] == ["a", "a"]
    assert "'b'" in caplog.text
    X = build_matrix(vecs)
    assert not X.X[:, 0].any()  # zero-neutral column


def _vectors(n, seed=0):
    rng = np.random.default_rng(seed)
    return [KpmVector(rng.normal(size=N_ROWS), f"s{i % 2}", i, np.zeros(N_KEYPOINTS, bool))
            for i in range(n)]


def test_build_matrix_order_and_metadata():
    vecs = _vectors(3)
    X = build_matrix(vecs)
    assert X.X.shape == (136, 3)
    assert X.frame_indices == (0, 1, 2) and X.subject_ids == ("s0", "s1", "s0")
    np.testing.assert_array_equal(X.X[:, 1], vecs[1].values)
    assert X.sample_count is None


def test_build_matrix_sampling():
    vecs = _vectors(20)
    full = build_matrix(vecs, sample=(20, 3))
    assert sorted(full.frame_indices) == list(range(20))
    s1, s2 = build_matrix(vecs, sample=(7, 3)), build_matrix(vecs, sample=(7, 3))
    assert s1.m == 7 and s1.sample_count == 7 and s1.sample_seed == 3
    np.testing.assert_array_equal(s1.X, s2.X)
    assert list(s1.frame_indices) == sorted(s1.frame_indices)  # input order kept
    with pytest.raises(SampleTooLarge):
        build_matrix(vecs, sample=(21, 0))


def test_extract_and_expand(rng):
    X = rng.normal(size=(N_ROWS, 4))
    brow = extract_part(X, "left_eyebrow")
    assert brow.shape == (10, 4)
    np.testing.assert_array_equal(brow[0], X[44])  # x of keypoint 22
    assert not expand_to_full(np.zeros(40), "lips").any()
    ones = expand_to_full(np.ones(40), "lips")
    assert ones.sum() == 40 and np.all(ones[96:136] == 1)
    with pytest.raises(ValueError):
        expand_to_full(np.ones(39), "lips")


@given(st.sampled_from(DEFAULT_PARTITION.names), st.integers(0, 1000))
def test_extract_expand_round_trip(part, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=DEFAULT_PARTITION.dim(part))
    full = expand_to_full(v, part)
    np.testing.assert_array_equal(extract_part(full[:, None], part)[:, 0], v)
    mask = np.ones(N_ROWS, bool)
    mask[DEFAULT_PARTITION.rows(part)] = False
    assert not full[mask].any()


def test_scatter_gather_over_all_parts(rng):
    X = rng.normal(size=(N_ROWS, 5))
    rebuilt = sum(expand_to_full(extract_part(X, p), p) for p in DEFAULT_PARTITION.names)
    np.testing.assert_array_equal(rebuilt, X)
