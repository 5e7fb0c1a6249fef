"""Keypoint-motion (KPM) vectors, the data matrix X and the face partition.

Rows of X are interleaved: row 2i is the x displacement of keypoint i and row
2i + 1 its y displacement. Columns are samples.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import SampleTooLarge, SubjectMismatch
from .geometry import N_KEYPOINTS, StandardizedFrame

log = logging.getLogger(__name__)

N_ROWS = 2 * N_KEYPOINTS
LAYOUT_TAG = "interleaved-xy-68"


@dataclass(frozen=True)
class FacePartition:
    """Named, disjoint keypoint groups covering all 68 keypoints."""

    parts: Tuple[Tuple[str, Tuple[int, ...]], ...]

    def __post_init__(self):
        seen = []
        for _, idx in self.parts:
            seen.extend(idx)
        if sorted(seen) != list(range(N_KEYPOINTS)):
            raise ValueError("face parts must be disjoint and cover keypoints 0..67")

    @property
    def names(self):
        return [name for name, _ in self.parts]

    def keypoints(self, part: str) -> Tuple[int, ...]:
        for name, idx in self.parts:
            if name == part:
                return tuple(sorted(idx))
        raise KeyError(f"unknown face part {part!r}")

    def rows(self, part: str) -> np.ndarray:
        kp = np.asarray(self.keypoints(part))
        return np.stack([2 * kp, 2 * kp + 1], axis=1).ravel()

    def dim(self, part: str) -> int:
        return 2 * len(self.keypoints(part))

    def to_dict(self):
        return {name: list(idx) for name, idx in self.parts}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple((name, tuple(int(i) for i in idx)) for name, idx in d.items()))


DEFAULT_PARTITION = FacePartition((
    ("left_eyebrow", tuple(range(22, 27))),
    ("right_eyebrow", tuple(range(17, 22))),
    ("left_eye", tuple(range(42, 48))),
    ("right_eye", tuple(range(36, 42))),
    ("nose", tuple(range(27, 36))),
    ("lips", tuple(range(48, 68))),
    ("jawline", tuple(range(0, 17))),
))


@dataclass(frozen=True, eq=False)
class KpmVector:
    values: np.ndarray
    subject_id: str
    frame_index: int
    masked: np.ndarray  # keypoints zeroed because missing in frame or neutral

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (N_ROWS,):
            raise ValueError(f"KPM vector must have length {N_ROWS}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class KpmMatrix:
    X: np.ndarray
    subject_ids: Tuple[str, ...]
    frame_indices: Tuple[int, ...]
    sample_count: Optional[int] = None
    sample_seed: Optional[int] = None

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        if X.ndim != 2 or X.shape[0] != N_ROWS:
            raise ValueError(f"X must have {N_ROWS} rows")
        if not (len(self.subject_ids) == len(self.frame_indices) == X.shape[1]):
            raise ValueError("column metadata does not match X")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "subject_ids", tuple(self.subject_ids))
        object.__setattr__(self, "frame_indices", tuple(int(i) for i in self.frame_indices))

    @property
    def m(self) -> int:
        return self.X.shape[1]


def compute_kpm(neutral: StandardizedFrame, frame: StandardizedFrame) -> KpmVector:
    if not (isinstance(neutral, StandardizedFrame) and isinstance(frame, StandardizedFrame)):
        raise TypeError("KPMs are computed from standardized frames")
    if neutral.subject_id != frame.subject_id:
        raise SubjectMismatch(
            f"neutral frame of {neutral.subject_id!r} used for subject {frame.subject_id!r}")
    both = neutral.validity & frame.validity
    diff = np.where(both[:, None], frame.coords - neutral.coords, 0.0)
    masked = ~both & (neutral.validity | frame.validity)
    return KpmVector(diff.ravel(), frame.subject_id, frame.frame_index, masked)


def select_neutral(frames: Sequence[StandardizedFrame]) -> Optional[StandardizedFrame]:
    """First neutral-flagged frame by frame index, or None."""
    neutral = [f for f in frames if f.is_neutral]
    if not neutral:
        return None
    return min(neutral, key=lambda f: f.frame_index)


def kpms_from_frames(frames: Iterable[StandardizedFrame]) -> list:
    """KPM vectors for every frame, grouped by subject in first-seen order.

    Subjects without a neutral frame are excluded with a warning.
    """
    by_subject = {}
    for f in frames:
        by_subject.setdefault(f.subject_id, []).append(f)
    out = []
    for subject, group in by_subject.items():
        neutral = select_neutral(group)
        if neutral is None:
            log.warning("subject %r has no neutral frame; excluded", subject)
            continue
        out.extend(compute_kpm(neutral, f) for f in group)
    return out


def build_matrix(vectors: Sequence[KpmVector],
                 sample: Optional[Tuple[int, int]] = None) -> KpmMatrix:
    """Stack KPM vectors as columns; optionally subsample ``(count, seed)``.

    Sampling is uniform without replacement; kept columns stay in input order.
    """
    vectors = list(vectors)
    if any(v.values.shape != (N_ROWS,) for v in vectors):
        raise ValueError("all KPM vectors must have length 136")
    m = len(vectors)
    idx = np.arange(m)
    count = seed = None
    if sample is not None:
        count, seed = int(sample[0]), int(sample[1])
        if count > m:
            raise SampleTooLarge(f"cannot sample {count} columns from {m}")
        idx = np.sort(np.random.default_rng(seed).choice(m, size=count, replace=False))
    X = np.zeros((N_ROWS, len(idx)))
    for col, i in enumerate(idx):
        X[:, col] = vectors[i].values
    return KpmMatrix(X, tuple(vectors[i].subject_id for i in idx),
                     tuple(vectors[i].frame_index for i in idx), count, seed)


def _as_array(X: Union[KpmMatrix, np.ndarray]) -> np.ndarray:
    return X.X if isinstance(X, KpmMatrix) else np.asarray(X, dtype=float)


def extract_part(X, part: str, partition: FacePartition = DEFAULT_PARTITION) -> np.ndarray:
    return _as_array(X)[partition.rows(part)]


def expand_to_full(component, part: str, partition: FacePartition = DEFAULT_PARTITION) -> np.ndarray:
    """Scatter a part-level vector (or p x n matrix) into the 136 full-face rows."""
    c = np.asarray(component, dtype=float)
    rows = partition.rows(part)
    if c.shape[0] != len(rows):
        raise ValueError(f"part {part!r} has dimension {len(rows)}, got {c.shape[0]}")
    out = np.zeros((N_ROWS,) + c.shape[1:])
    out[rows] = c
    return out
