"""Geometric standardization of 68-point facial keypoints.

Three steps are applied to each frame: an optional frontalization hook, a
six-parameter affine registration of the whole face onto a fixed template,
and four-parameter similarity registrations of individual face parts.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    CoincidentAnchors,
    DegenerateAnchors,
    InsufficientAnchors,
    MissingAnchor,
)

N_KEYPOINTS = 68

DEFAULT_AFFINE_ANCHORS = (0, 16, 27, 33, 39, 42)
NO_JAWLINE_AFFINE_ANCHORS = (27, 33, 39, 42, 36, 45)
ANCHOR_SETS = {"default": DEFAULT_AFFINE_ANCHORS, "no-jawline": NO_JAWLINE_AFFINE_ANCHORS}

# (name, anchor pair, registered keypoints)
SIMILARITY_PARTS = (
    ("left", (42, 45), tuple(range(22, 27)) + tuple(range(42, 48))),
    ("right", (36, 39), tuple(range(17, 22)) + tuple(range(36, 42))),
    ("jawline", (0, 16), tuple(range(0, 17))),
)
NOSE_ANCHOR = 27
NOSE_KEYPOINTS = tuple(range(27, 36))

Frontalizer = Callable[[np.ndarray], np.ndarray]


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class RawFrame:
    """Keypoints of one video frame in source pixel units.

    Missing keypoints have ``validity`` False and coordinates (0, 0).
    """

    subject_id: str
    frame_index: int
    is_neutral: bool
    coords: np.ndarray
    validity: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        validity = np.array(self.validity, dtype=bool)
        if coords.shape != (N_KEYPOINTS, 2):
            raise ValueError(f"coords must have shape (68, 2), got {coords.shape}")
        if validity.shape != (N_KEYPOINTS,):
            raise ValueError(f"validity must have shape (68,), got {validity.shape}")
        if self.frame_index < 0:
            raise ValueError("frame_index must be nonnegative")
        coords[~validity] = 0.0
        object.__setattr__(self, "coords", _frozen(coords))
        object.__setattr__(self, "validity", _frozen(validity, bool))

    def with_coords(self, coords: np.ndarray, **changes):
        kwargs = dict(
            subject_id=self.subject_id,
            frame_index=self.frame_index,
            is_neutral=self.is_neutral,
            coords=coords,
            validity=self.validity,
        )
        kwargs.update(changes)
        return type(self)(**kwargs)

    def same_as(self, other: "RawFrame") -> bool:
        return (
            type(self) is type(other)
            and self.subject_id == other.subject_id
            and self.frame_index == other.frame_index
            and self.is_neutral == other.is_neutral
            and np.array_equal(self.coords, other.coords)
            and np.array_equal(self.validity, other.validity)
        )


@dataclass(frozen=True, eq=False)
class StandardizedFrame(RawFrame):
    """A frame expressed in template units; ``notes`` records skipped steps."""

    notes: tuple = ()

    def with_coords(self, coords, **changes):
        changes.setdefault("notes", self.notes)
        return super().with_coords(coords, **changes)


@dataclass(frozen=True, eq=False)
class Template:
    """Target keypoint positions for registration (the reference neutral face)."""

    coords: np.ndarray
    validity: np.ndarray
    subject_id: str = ""

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float)
        validity = np.array(self.validity, dtype=bool)
        if coords.shape != (N_KEYPOINTS, 2) or validity.shape != (N_KEYPOINTS,):
            raise ValueError("template must hold 68 keypoints")
        coords[~validity] = 0.0
        object.__setattr__(self, "coords", _frozen(coords))
        object.__setattr__(self, "validity", _frozen(validity, bool))

    def anchors(self, indices: Sequence[int]) -> "AnchorSet":
        missing = [i for i in indices if not self.validity[i]]
        if missing:
            raise MissingAnchor(f"template lacks anchor keypoints {missing}")
        return AnchorSet(tuple(indices), self.coords[list(indices)])

    def as_frame(self) -> StandardizedFrame:
        return StandardizedFrame(self.subject_id, 0, True, self.coords, self.validity)


@dataclass(frozen=True, eq=False)
class AnchorSet:
    indices: tuple
    template_coords: np.ndarray

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise ValueError("anchor indices must be distinct")
        if any(i < 0 or i >= N_KEYPOINTS for i in idx):
            raise ValueError("anchor indices must lie in [0, 67]")
        tc = np.array(self.template_coords, dtype=float)
        if tc.shape != (len(idx), 2):
            raise ValueError("one template coordinate pair per anchor is required")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "template_coords", _frozen(tc))


@dataclass(frozen=True, eq=False)
class AffineParams:
    """p -> matrix @ p + offset."""

    matrix: np.ndarray
    offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(np.reshape(self.matrix, (2, 2))))
        object.__setattr__(self, "offset", _frozen(np.reshape(self.offset, (2,))))

    @classmethod
    def identity(cls):
        return cls(np.eye(2), np.zeros(2))

    @property
    def params(self):
        (a, b), (c, d) = self.matrix
        return (a, b, c, d, self.offset[0], self.offset[1])

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.matrix))

    def inverse(self) -> "AffineParams":
        inv = np.linalg.inv(self.matrix)
        return AffineParams(inv, -inv @ self.offset)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.matrix.T + self.offset


@dataclass(frozen=True)
class SimilarityParams:
    scale: float
    angle: float
    tx: float
    ty: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("similarity scale must be positive")

    @property
    def matrix(self) -> np.ndarray:
        c, s = np.cos(self.angle), np.sin(self.angle)
        return self.scale * np.array([[c, -s], [s, c]])

    def apply(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.matrix.T + np.array([self.tx, self.ty])


def _require_valid(frame: RawFrame, indices, exc=MissingAnchor):
    bad = [i for i in indices if not frame.validity[i]]
    if bad:
        raise exc(f"anchor keypoints {bad} are missing in frame {frame.frame_index} "
                  f"of subject {frame.subject_id!r}")


def _fit_affine(src: np.ndarray, dst: np.ndarray) -> AffineParams:
    # normal equations in centred coordinates: M (Pc^T Pc) = Qc^T Pc
    p_mean, q_mean = src.mean(axis=0), dst.mean(axis=0)
    pc, qc = src - p_mean, dst - q_mean
    gram = pc.T @ pc
    sv = np.linalg.svd(gram, compute_uv=False)
    if sv[0] == 0 or sv[-1] <= 1e-12 * sv[0]:
        raise DegenerateAnchors("anchor keypoints are collinear or coincident")
    matrix = np.linalg.solve(gram, pc.T @ qc).T
    if abs(np.linalg.det(matrix)) <= 1e-12:
        raise DegenerateAnchors("estimated affine map is singular")
    return AffineParams(matrix, q_mean - matrix @ p_mean)


def estimate_affine(frame: RawFrame, anchors: AnchorSet) -> AffineParams:
    """Least-squares affine map taking the frame's anchors onto the template anchors."""
    _require_valid(frame, anchors.indices)
    return _fit_affine(frame.coords[list(anchors.indices)], anchors.template_coords)


def apply_affine(frame: RawFrame, params: AffineParams) -> RawFrame:
    coords = np.array(frame.coords)
    v = frame.validity
    coords[v] = params.apply(coords[v])
    return frame.with_coords(coords)


def _fit_similarity(src: np.ndarray, dst: np.ndarray):
    # complex least squares: w = a z + b
    z = src[:, 0] + 1j * src[:, 1]
    w = dst[:, 0] + 1j * dst[:, 1]
    zc, wc = z - z.mean(), w - w.mean()
    denom = np.vdot(zc, zc).real
    extent = max(np.abs(z).max(), 1.0)
    if denom <= (1e-12 * extent) ** 2:
        raise CoincidentAnchors("similarity anchors coincide")
    a = np.vdot(zc, wc) / denom
    if a == 0:
        raise CoincidentAnchors("template anchors coincide")
    return a, w.mean() - a * z.mean()


def estimate_similarity(frame: RawFrame, part_anchors: Sequence[int],
                        template_coords: np.ndarray) -> SimilarityParams:
    """Least-squares similarity (rotation, isotropic scale, translation).

    Two anchors give an exact fit; more are solved by least squares. Invalid
    anchors are dropped before fitting.
    """
    part_anchors = list(part_anchors)
    template_coords = np.asarray(template_coords, dtype=float).reshape(len(part_anchors), 2)
    keep = [k for k, i in enumerate(part_anchors) if frame.validity[i]]
    if len(keep) < 2:
        raise InsufficientAnchors("similarity registration needs at least two valid anchors")
    a, b = _fit_similarity(frame.coords[[part_anchors[k] for k in keep]], template_coords[keep])
    return SimilarityParams(float(abs(a)), float(np.angle(a)), float(b.real), float(b.imag))


@dataclass(frozen=True, eq=False)
class GeometryConfig:
    """Settings for :func:`standardize_frame`.

    ``anchors`` names the affine anchor set. With "default", frames missing a
    jawline anchor fall back to the no-jawline set.
    """

    template: Template
    anchors: str = "default"
    frontalize: Optional[Frontalizer] = None
    tol_anchor: float = 1e-9

    def __post_init__(self):
        if self.anchors not in ANCHOR_SETS:
            raise ValueError(f"unknown anchor set {self.anchors!r}")


def _choose_anchor_set(frame: RawFrame, config: GeometryConfig):
    name = config.anchors
    indices = ANCHOR_SETS[name]
    notes = []
    if name == "default" and not all(frame.validity[i] for i in indices):
        alt = ANCHOR_SETS["no-jawline"]
        if all(frame.validity[i] for i in alt) and all(config.template.validity[i] for i in alt):
            notes.append("affine: default anchors missing, used no-jawline anchor set")
            indices = alt
    return indices, notes


def standardize_frame(frame: RawFrame, config: GeometryConfig) -> StandardizedFrame:
    template = config.template
    coords = np.array(frame.coords)
    valid = frame.validity
    if config.frontalize is not None:
        out = np.asarray(config.frontalize(coords.copy()), dtype=float)
        if out.shape != coords.shape:
            raise ValueError("frontalization hook must map 68x2 points to 68x2 points")
        coords = np.where(valid[:, None], out, 0.0)

    indices, notes = _choose_anchor_set(frame, config)
    anchors = template.anchors(indices)
    _require_valid(frame, anchors.indices)
    affine = _fit_affine(coords[list(anchors.indices)], anchors.template_coords)
    coords[valid] = affine.apply(coords[valid])

    for name, pair, members in SIMILARITY_PARTS:
        pair = list(pair)
        if not (valid[pair].all() and template.validity[pair].all()):
            notes.append(f"similarity: part {name!r} skipped, anchors {tuple(pair)} missing")
            continue
        try:
            a, b = _fit_similarity(coords[pair], template.coords[pair])
        except CoincidentAnchors:
            notes.append(f"similarity: part {name!r} skipped, anchors coincide")
            continue
        members = [i for i in members if valid[i]]
        moved = a * (coords[members, 0] + 1j * coords[members, 1]) + b
        coords[members, 0] = moved.real
        coords[members, 1] = moved.imag

    if valid[NOSE_ANCHOR] and template.validity[NOSE_ANCHOR]:
        shift = template.coords[NOSE_ANCHOR] - coords[NOSE_ANCHOR]
        members = [i for i in NOSE_KEYPOINTS if valid[i]]
        coords[members] += shift
    else:
        notes.append("translation: nose skipped, keypoint 27 missing")

    return StandardizedFrame(frame.subject_id, frame.frame_index, frame.is_neutral,
                             coords, valid, tuple(notes))


def build_template(reference_neutral: RawFrame,
                   frontalize: Optional[Frontalizer] = None) -> Template:
    """Template from a reference subject's neutral frame (after frontalization)."""
    coords = np.array(reference_neutral.coords)
    if frontalize is not None:
        coords = np.where(reference_neutral.validity[:, None],
                          np.asarray(frontalize(coords.copy()), dtype=float), 0.0)
    return Template(coords, reference_neutral.validity, reference_neutral.subject_id)


def anchor_residual(frame: RawFrame, anchors: AnchorSet) -> float:
    """Sum of squared distances between the frame's anchors and the template's."""
    d = frame.coords[list(anchors.indices)] - anchors.template_coords
    return float(np.sum(d * d))
