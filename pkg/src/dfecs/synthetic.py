"""Synthetic data: planted two-level factor models and a procedural face."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .geometry import N_KEYPOINTS, RawFrame
from .kpm import DEFAULT_PARTITION, N_ROWS, FacePartition, expand_to_full


@dataclass(frozen=True, eq=False)
class PlantedModel:
    X: np.ndarray  # 136 x m, noisy
    U: np.ndarray  # 136 x (parts * atoms), block structured
    A: np.ndarray  # k x q
    B: np.ndarray  # q x m
    noise_sigma: float

    @property
    def clean(self) -> np.ndarray:
        return self.U @ self.A @ self.B


def planted_ffm(m: int = 2000, atoms_per_part: int = 5, q: int = 8, noise: float = 0.01,
                seed: int = 0, partition: FacePartition = DEFAULT_PARTITION,
                active_factors: float = 1.0, scale: float = 20.0,
                atom_density: float = 0.3) -> PlantedModel:
    """X = U A B + noise with nonnegative unit-norm atoms per part.

    The atoms are shuffled and dealt round-robin to the ``q`` factors, so
    every atom belongs to exactly one factor. Each sample switches on one
    factor plus about ``active_factors`` more at random. ``noise`` is the
    Gaussian sigma relative to the RMS of the clean signal.
    """
    rng = np.random.default_rng(seed)
    names = partition.names
    blocks = []
    for part in names:
        p = partition.dim(part)
        W = rng.random((p, atoms_per_part)) * (rng.random((p, atoms_per_part)) < atom_density)
        W[rng.integers(p, size=atoms_per_part), np.arange(atoms_per_part)] += 0.5
        blocks.append(expand_to_full(W / np.linalg.norm(W, axis=0), part, partition))
    U = np.hstack(blocks)
    k = U.shape[1]

    # deal the atoms round-robin over factors so every atom is driven
    A = np.zeros((k, q))
    order = rng.permutation(k)
    for n, j in enumerate(order):
        A[j, n % q] = rng.uniform(0.6, 1.4)
    # equal energy per factor: every factor is needed to reach a high VE
    A /= np.linalg.norm(U @ A, axis=0)

    on = rng.random((q, m)) < active_factors / q
    on[rng.integers(q, size=m), np.arange(m)] = True
    B = scale * rng.uniform(0.5, 1.5, size=(q, m)) * on

    clean = U @ A @ B
    sigma = noise * float(np.sqrt(np.mean(clean ** 2)))
    X = clean + sigma * rng.standard_normal(clean.shape)
    return PlantedModel(X, U, A, B, sigma)


def anchor_free_aus(q: int = 8, seed: int = 0) -> np.ndarray:
    """Unit-norm planted AUs (columns of U A) that leave every registration
    anchor in place, so standardization removes pose without bending them."""
    from .geometry import DEFAULT_AFFINE_ANCHORS, NO_JAWLINE_AFFINE_ANCHORS

    pm = planted_ffm(m=10, q=q, seed=seed)
    U = pm.U @ pm.A
    for i in set(DEFAULT_AFFINE_ANCHORS) | set(NO_JAWLINE_AFFINE_ANCHORS):
        U[2 * i:2 * i + 2] = 0.0
    return U / np.linalg.norm(U, axis=0)


def planted_dictionary(p: int, k: int, m: int, *, density: float = 0.3, seed: int = 0,
                       nonneg_atoms: bool = False):
    """(X, U, V) with unit-norm atoms and sparse nonnegative codes."""
    rng = np.random.default_rng(seed)
    U = rng.random((p, k)) if nonneg_atoms else rng.standard_normal((p, k))
    U /= np.linalg.norm(U, axis=0)
    V = rng.exponential(size=(k, m)) * (rng.random((k, m)) < density)
    V[rng.integers(k, size=m), np.arange(m)] += rng.exponential(size=m)
    return U @ V, U, V


def face_template(seed: Optional[int] = None) -> np.ndarray:
    """68 x 2 neutral face in a 68-point layout (pixel-like units, y down)."""
    t = np.linspace(0, 1, 17)
    jaw = np.stack([100 + 200 * t, 200 + 110 * np.sin(np.pi * t)], axis=1)
    rb = np.stack([130 + 60 * np.linspace(0, 1, 5), 150 - 12 * np.sin(np.pi * np.linspace(0, 1, 5))], axis=1)
    lb = np.stack([210 + 60 * np.linspace(0, 1, 5), 150 - 12 * np.sin(np.pi * np.linspace(0, 1, 5))], axis=1)
    bridge = np.stack([np.full(4, 200.0), 175 + 20 * np.arange(4)], axis=1)
    nostrils = np.stack([180 + 10 * np.arange(5), [250, 254, 256, 254, 250]], axis=1)

    def eye(cx):
        a = np.array([np.pi, 3 * np.pi / 4, np.pi / 4, 0, -np.pi / 4, -3 * np.pi / 4])
        return np.stack([cx + 20 * np.cos(a), 180 - 8 * np.sin(a)], axis=1)

    a_out = np.linspace(np.pi, -np.pi, 13)[:-1]
    outer = np.stack([200 + 45 * np.cos(a_out), 295 - 15 * np.sin(a_out)], axis=1)
    a_in = np.linspace(np.pi, -np.pi, 9)[:-1]
    inner = np.stack([200 + 30 * np.cos(a_in), 295 - 6 * np.sin(a_in)], axis=1)
    pts = np.vstack([jaw, rb, lb, bridge, nostrils, eye(160), eye(240), outer, inner])
    assert pts.shape == (N_KEYPOINTS, 2)
    if seed is not None:
        rng = np.random.default_rng(seed)
        pts = pts + rng.normal(scale=2.0, size=pts.shape)
    return pts


def _random_pose(rng, strength=0.08):
    M = np.eye(2) + strength * rng.standard_normal((2, 2))
    t = rng.normal(scale=20.0, size=2)
    return M, t


def synthetic_frames(au_matrix: np.ndarray, n_subjects: int = 5, frames_per_subject: int = 100,
                     *, seed: int = 0, active: float = 1.5, magnitude: float = 1.0,
                     pose: float = 0.05, missing_jawline: bool = False) -> List[RawFrame]:
    """Raw frames of faces moved by nonnegative combinations of ``au_matrix``.

    Each subject has its own face shape and a random whole-face pose applied
    to every frame; frame 0 is neutral. ``magnitude`` scales the AU weights.
    """
    rng = np.random.default_rng(seed)
    au = np.asarray(au_matrix, dtype=float)
    if au.shape[0] != N_ROWS:
        raise ValueError("AU matrix must have 136 rows")
    q = au.shape[1]
    frames = []
    for s in range(n_subjects):
        face = face_template(seed=int(rng.integers(1 << 31)))
        valid = np.ones(N_KEYPOINTS, dtype=bool)
        if missing_jawline:
            valid[:17] = False
        for f in range(frames_per_subject):
            if f == 0:
                disp = np.zeros(N_ROWS)
            else:
                on = rng.random(q) < active / q
                on[rng.integers(q)] = True
                disp = au @ (magnitude * rng.exponential(size=q) * on)
            pts = face + disp.reshape(N_KEYPOINTS, 2)
            M, t = _random_pose(rng, pose)
            pts = pts @ M.T + t
            frames.append(RawFrame(f"s{s:03d}", f, f == 0, pts, valid))
    return frames
