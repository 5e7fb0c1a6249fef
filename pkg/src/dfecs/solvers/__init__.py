"""Numerical solvers for the positive lasso and the two factorizations."""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import ConfigError

DICT_INITS = ("data", "random")
NMF_INITS = ("nndsvd", "random")


@dataclass(frozen=True)
class SolverConfig:
    """Shared settings for the alternating factorization solvers.

    ``tol`` is the relative objective change below which iteration stops.
    """

    max_iterations: int = 500
    tol: float = 1e-6
    seed: int = 0
    dict_init: str = "data"
    nmf_init: str = "nndsvd"
    code_sweeps: int = 5

    def __post_init__(self):
        if not (isinstance(self.max_iterations, int) and self.max_iterations >= 1):
            raise ConfigError("max_iterations must be an integer >= 1")
        if not self.tol > 0:
            raise ConfigError("tol must be positive")
        if self.dict_init not in DICT_INITS:
            raise ConfigError(f"dict_init must be one of {DICT_INITS}")
        if self.nmf_init not in NMF_INITS:
            raise ConfigError(f"nmf_init must be one of {NMF_INITS}")
        if self.code_sweeps < 1:
            raise ConfigError("code_sweeps must be >= 1")


from .lasso import (  # noqa: E402
    LassoPath,
    kkt_residual,
    objective,
    positive_lasso,
    positive_lasso_batch,
    positive_lasso_path,
)
from .dictionary import DictionaryModel, fit_dictionary  # noqa: E402
from .nmf import NmfModel, fit_nmf, nmf_objective  # noqa: E402

__all__ = [
    "SolverConfig", "LassoPath", "kkt_residual", "objective", "positive_lasso",
    "positive_lasso_batch", "positive_lasso_path", "DictionaryModel",
    "fit_dictionary", "NmfModel", "fit_nmf", "nmf_objective",
]
