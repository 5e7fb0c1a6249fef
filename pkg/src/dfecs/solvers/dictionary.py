"""Dictionary learning with nonnegative sparse codes.

Minimizes ``0.5 * ||X - U V||_F^2 + alpha * sum(V)`` subject to
``||u_j||_2 <= 1`` and ``V >= 0``. The half on the data term means an
``alpha`` here equals ``2 * alpha`` in :func:`positive_lasso`.

Both blocks are updated by exact coordinate minimization, so every step
is a descent step and the recorded objective never increases.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..errors import DegenerateData, NonFiniteInput
from . import SolverConfig


@dataclass(frozen=True, eq=False)
class DictionaryModel:
    U: np.ndarray
    V: np.ndarray
    alpha: float
    objective_trace: Tuple[float, ...]
    n_iter: int
    converged: bool
    reinitialized: int = 0  # dead atoms replaced during fitting


def dictionary_objective(X, U, V, alpha) -> float:
    R = X - U @ V
    return float(0.5 * np.sum(R * R) + alpha * np.sum(V))


def _init_dictionary(X, k, cfg: SolverConfig):
    rng = np.random.default_rng(cfg.seed)
    p, m = X.shape
    norms = np.linalg.norm(X, axis=0)
    if cfg.dict_init == "data":
        nz = np.flatnonzero(norms > 0)
        if nz.size >= k:
            pick = rng.choice(nz, size=k, replace=False)
            return X[:, pick] / norms[pick]
    U = rng.standard_normal((p, k))
    return U / np.linalg.norm(U, axis=0)


def _code_sweeps(G, B, V, alpha, sweeps):
    # exact coordinate minimization, all columns at once
    for _ in range(sweeps):
        for j in range(G.shape[0]):
            if G[j, j] <= 0:
                V[j] = 0.0
                continue
            V[j] = np.maximum(0.0, V[j] - (G[j] @ V - B[j] + alpha) / G[j, j])
    return V


def _atom_update(X, U, V, rng_cols):
    XVt = X @ V.T
    VVt = V @ V.T
    dead = 0
    for j in range(U.shape[1]):
        if VVt[j, j] <= 0:
            # unused atom: objective does not depend on it, move it where it helps
            R = X - U @ V
            worst = int(np.argmax(np.einsum("ij,ij->j", R, R)))
            col = R[:, worst] if np.any(R[:, worst]) else rng_cols.standard_normal(U.shape[0])
            U[:, j] = col / np.linalg.norm(col)
            dead += 1
            continue
        u = U[:, j] + (XVt[:, j] - U @ VVt[:, j]) / VVt[j, j]
        n = np.linalg.norm(u)
        U[:, j] = u / n if n > 1.0 else u
    return U, dead


def fit_dictionary(X_f, k_f: int, alpha: float, config: Optional[SolverConfig] = None,
                   *, U_init=None) -> DictionaryModel:
    cfg = config or SolverConfig()
    X = np.asarray(X_f, dtype=float)
    if X.ndim != 2:
        raise ValueError("X_f must be a matrix")
    if not np.all(np.isfinite(np.linalg.norm(X, axis=0))):
        raise DegenerateData("X_f has non-finite column norms")
    p, m = X.shape
    if k_f < 1 or m < k_f:
        raise ValueError(f"need 1 <= k_f <= m (k_f={k_f}, m={m})")
    if alpha < 0 or not np.isfinite(alpha):
        raise ValueError("alpha must be finite and nonnegative")

    if U_init is not None:
        U = np.array(U_init, dtype=float)
        if not np.all(np.isfinite(U)):
            raise NonFiniteInput("U_init must be finite")
        U /= np.maximum(np.linalg.norm(U, axis=0), 1.0)
    else:
        U = _init_dictionary(X, k_f, cfg)
    rng_cols = np.random.default_rng([cfg.seed, 1])
    V = np.zeros((k_f, m))
    trace = [dictionary_objective(X, U, V, alpha)]
    dead_total = 0
    converged = False
    it = 0
    for it in range(1, cfg.max_iterations + 1):
        V = _code_sweeps(U.T @ U, U.T @ X, V, alpha, cfg.code_sweeps)
        U, dead = _atom_update(X, U, V, rng_cols)
        dead_total += dead
        trace.append(dictionary_objective(X, U, V, alpha))
        prev, cur = trace[-2], trace[-1]
        if dead == 0 and abs(prev - cur) <= cfg.tol * max(abs(prev), np.finfo(float).tiny):
            converged = True
            break
    U.setflags(write=False)
    V.setflags(write=False)
    return DictionaryModel(U, V, float(alpha), tuple(trace), it, converged, dead_total)
