"""PCA action units and their sign-split expansion ``[U, -U]``.

Positive encodings cannot use negative PCA weights, so each component is
paired with its negation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, ZeroData


@dataclass(frozen=True, eq=False)
class PcaModel:
    components: np.ndarray  # r x c, orthonormal columns
    singular_values: np.ndarray
    centered: bool
    mean: np.ndarray
    ve_train: float

    @property
    def c(self) -> int:
        return self.components.shape[1]

    @property
    def expanded(self) -> np.ndarray:
        return np.hstack([self.components, -self.components])


def fit_pca_baseline(X, target_ve: Optional[float] = 95.0, c: Optional[int] = None,
                     center: bool = False) -> PcaModel:
    """Smallest ``c`` whose projection reaches ``target_ve`` percent, or a fixed ``c``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.size == 0:
        raise ValueError("X must be a non-empty matrix")
    mean = X.mean(axis=1) if center else np.zeros(X.shape[0])
    Xc = X - mean[:, None]
    total = float(np.sum(X * X))
    if total == 0:
        raise ZeroData("X is all zeros")
    U, s, _ = np.linalg.svd(Xc, full_matrices=False)
    rank_tol = s[0] * max(X.shape) * np.finfo(float).eps if s.size else 0.0
    n_max = int(np.count_nonzero(s > rank_tol))

    def ve_of(n):
        P = U[:, :n]
        R = Xc - P @ (P.T @ Xc)
        return 100.0 * (1.0 - float(np.sum(R * R)) / total)

    if c is None:
        if target_ve is None:
            raise ConfigError("give either target_ve or c")
        c = n_max
        for n in range(1, n_max + 1):
            if ve_of(n) >= target_ve:
                c = n
                break
    if not 1 <= c <= len(s):
        raise ConfigError(f"c must lie in [1, {len(s)}]")
    comps = U[:, :c].copy()
    comps.setflags(write=False)
    return PcaModel(comps, s[:c].copy(), center, mean, ve_of(c))
