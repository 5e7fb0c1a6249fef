"""Sparse NMF by hierarchical alternating least squares (HALS).

Objective: ``||V - A B||_F^2 + alpha_A * sum(A) + alpha_B * sum(B)`` with
``A, B >= 0``. Each row of B and column of A is set to its exact
constrained minimizer given the rest, so the objective is monotone.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..errors import NegativeInput, NonFiniteInput
from . import SolverConfig


@dataclass(frozen=True, eq=False)
class NmfModel:
    A: np.ndarray
    B: np.ndarray
    alpha_A: float
    alpha_B: float
    objective_trace: Tuple[float, ...]
    n_iter: int
    converged: bool
    init: str = "nndsvd"


def nmf_objective(V, A, B, alpha_A, alpha_B) -> float:
    R = V - A @ B
    return float(np.sum(R * R) + alpha_A * np.sum(A) + alpha_B * np.sum(B))


def _nndsvd(V, q, rng):
    """Nonnegative double SVD; exact zeros get small random values."""
    Uf, s, Wt = np.linalg.svd(V, full_matrices=False)
    k, m = V.shape
    A = np.zeros((k, q))
    B = np.zeros((q, m))
    for i in range(min(q, len(s))):
        u, w = Uf[:, i], Wt[i]
        if i == 0:
            A[:, 0] = np.sqrt(s[0]) * np.abs(u)
            B[0] = np.sqrt(s[0]) * np.abs(w)
            continue
        up, un = np.maximum(u, 0), np.maximum(-u, 0)
        wp, wn = np.maximum(w, 0), np.maximum(-w, 0)
        pos = np.linalg.norm(up) * np.linalg.norm(wp)
        neg = np.linalg.norm(un) * np.linalg.norm(wn)
        if pos >= neg:
            x, y, sigma = up, wp, pos
        else:
            x, y, sigma = un, wn, neg
        nx, ny = np.linalg.norm(x), np.linalg.norm(y)
        if nx > 0 and ny > 0:
            A[:, i] = np.sqrt(s[i] * sigma) * x / nx
            B[i] = np.sqrt(s[i] * sigma) * y / ny
    level = V.mean() / 100.0 if V.mean() > 0 else 1e-6
    A[A == 0] = level * rng.random(np.count_nonzero(A == 0))
    B[B == 0] = level * rng.random(np.count_nonzero(B == 0))
    return A, B


def _random_init(V, q, rng):
    k, m = V.shape
    scale = np.sqrt(max(V.mean(), 1e-12) / q)
    return scale * rng.random((k, q)), scale * rng.random((q, m))


def fit_nmf(V, q: int, alpha_A: float, alpha_B: float,
            config: Optional[SolverConfig] = None) -> NmfModel:
    cfg = config or SolverConfig()
    V = np.asarray(V, dtype=float)
    if V.ndim != 2:
        raise ValueError("V must be a matrix")
    if not np.all(np.isfinite(V)):
        raise NonFiniteInput("V must be finite")
    if np.any(V < -1e-12):
        raise NegativeInput("NMF input has negative entries")
    V = np.maximum(V, 0.0)
    k, m = V.shape
    if not 1 <= q <= min(k, m):
        raise ValueError(f"need 1 <= q <= min(k, m) = {min(k, m)}, got {q}")
    if min(alpha_A, alpha_B) < 0:
        raise ValueError("alphas must be nonnegative")

    rng = np.random.default_rng(cfg.seed)
    init = cfg.nmf_init
    if init == "nndsvd":
        try:
            A, B = _nndsvd(V, q, rng)
        except np.linalg.LinAlgError:
            init = "random"
    if init == "random":
        A, B = _random_init(V, q, rng)

    trace = [nmf_objective(V, A, B, alpha_A, alpha_B)]
    half_a, half_b = 0.5 * alpha_A, 0.5 * alpha_B
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        AtA, AtV = A.T @ A, A.T @ V
        for i in range(q):
            if AtA[i, i] > 0:
                B[i] = np.maximum(0.0, B[i] + (AtV[i] - AtA[i] @ B - half_b) / AtA[i, i])
            else:
                B[i] = 0.0
        BBt, VBt = B @ B.T, V @ B.T
        for i in range(q):
            if BBt[i, i] > 0:
                A[:, i] = np.maximum(0.0, A[:, i] + (VBt[:, i] - A @ BBt[:, i] - half_a) / BBt[i, i])
            else:
                A[:, i] = 0.0
        trace.append(nmf_objective(V, A, B, alpha_A, alpha_B))
        prev, cur = trace[-2], trace[-1]
        if abs(prev - cur) <= cfg.tol * max(abs(prev), np.finfo(float).tiny):
            converged = True
            break
    A.setflags(write=False)
    B.setflags(write=False)
    return NmfModel(A, B, float(alpha_A), float(alpha_B), tuple(trace), it, converged, init)
