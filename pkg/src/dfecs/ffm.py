"""Full Face Model: per-part dictionaries stacked under an NMF hierarchy.

Each face part f gets a dictionary X_f ~ U_f V_f (PFM). The part codes are
stacked into V and factorized as V ~ A B (HFM). The DFECS action units are
the columns of U' = U A.

Hyperparameters are chosen by a first-qualifying grid scan. The VE budget
``beta`` is split so that each PFM must explain at least ``100 (1 - beta/2)``
percent of its part and the full model ``100 (1 - beta)`` percent of X.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import ColumnMismatch, ConfigError, EmptyGrid
from .evaluation import variance_explained
from .geometry import Template
from .kpm import DEFAULT_PARTITION, N_ROWS, FacePartition, KpmMatrix, expand_to_full
from .presets import DEFAULT_ALPHAS
from .solvers import SolverConfig
from .solvers.dictionary import DictionaryModel, fit_dictionary
from .solvers.nmf import NmfModel, fit_nmf

log = logging.getLogger(__name__)


def _alpha_tuple(values, name):
    vals = tuple(float(a) for a in values)
    if not vals:
        raise EmptyGrid(f"{name} grid is empty")
    if any(not (a > 0 and np.isfinite(a)) for a in vals):
        raise ConfigError(f"{name} values must be positive and finite")
    return tuple(sorted(set(vals), reverse=True))


@dataclass(frozen=True, eq=False)
class GridSpec:
    """Search grids.

    ``k_values`` and ``part_alphas`` override the defaults per part (the
    default k range is 1..p). ``q_values`` defaults to 1..k. Alpha grids are
    always scanned from largest to smallest, sizes from smallest to largest.
    """

    alphas: Tuple[float, ...] = DEFAULT_ALPHAS
    k_values: Optional[Mapping[str, Tuple[int, ...]]] = None
    part_alphas: Optional[Mapping[str, Tuple[float, ...]]] = None
    q_values: Optional[Tuple[int, ...]] = None
    alphas_A: Tuple[float, ...] = DEFAULT_ALPHAS
    alphas_B: Tuple[float, ...] = DEFAULT_ALPHAS
    skip_parts: Tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "alphas", _alpha_tuple(self.alphas, "alpha"))
        object.__setattr__(self, "alphas_A", _alpha_tuple(self.alphas_A, "alpha_A"))
        object.__setattr__(self, "alphas_B", _alpha_tuple(self.alphas_B, "alpha_B"))
        if self.part_alphas is not None:
            object.__setattr__(self, "part_alphas", {
                p: _alpha_tuple(v, f"alpha ({p})") for p, v in self.part_alphas.items()})
        if self.k_values is not None:
            kv = {p: tuple(sorted(set(int(k) for k in v))) for p, v in self.k_values.items()}
            for p, v in kv.items():
                if not v:
                    raise EmptyGrid(f"k grid for {p!r} is empty")
                if v[0] < 1:
                    raise ConfigError("k values must be >= 1")
            object.__setattr__(self, "k_values", kv)
        if self.q_values is not None:
            qv = tuple(sorted(set(int(q) for q in self.q_values)))
            if not qv:
                raise EmptyGrid("q grid is empty")
            if qv[0] < 1:
                raise ConfigError("q values must be >= 1")
            object.__setattr__(self, "q_values", qv)
        object.__setattr__(self, "skip_parts", tuple(self.skip_parts))

    def pfm_cells(self, part: Optional[str], p: int, m: int):
        ks = self.k_values.get(part) if (self.k_values and part in self.k_values) else None
        ks = tuple(range(1, p + 1)) if ks is None else ks
        ks = tuple(k for k in ks if k <= m)
        alphas = self.part_alphas.get(part, self.alphas) if self.part_alphas else self.alphas
        cells = [(k, a) for k in ks for a in alphas]
        if not cells:
            raise EmptyGrid(f"no PFM grid cells for part {part!r}")
        return cells

    def hfm_cells(self, k: int, m: int):
        qs = tuple(range(1, k + 1)) if self.q_values is None else self.q_values
        qs = tuple(q for q in qs if q <= min(k, m))
        cells = [(q, a, b) for q in qs for a in self.alphas_A for b in self.alphas_B]
        if not cells:
            raise EmptyGrid("no HFM grid cells")
        return cells

    def to_dict(self):
        return {
            "alphas": list(self.alphas),
            "k_values": None if self.k_values is None else {p: list(v) for p, v in self.k_values.items()},
            "part_alphas": None if self.part_alphas is None else {p: list(v) for p, v in self.part_alphas.items()},
            "q_values": None if self.q_values is None else list(self.q_values),
            "alphas_A": list(self.alphas_A),
            "alphas_B": list(self.alphas_B),
            "skip_parts": list(self.skip_parts),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


def scan_grid(cells: Sequence, evaluate: Callable, threshold: float, n_jobs: int = 1):
    """First cell (in the given order) whose score reaches ``threshold``.

    Cells are evaluated in batches of ``n_jobs``; results are reduced in cell
    order, so the choice does not depend on scheduling. Returns
    ``(index, result, exhausted, n_evaluated)``. When nothing qualifies, the
    highest-scoring cell (earliest on ties) is returned with ``exhausted``.
    ``evaluate`` returns ``(score, payload)``.
    """
    if not cells:
        raise EmptyGrid("grid is empty")
    best = None
    n_eval = 0
    batch = max(1, int(n_jobs))
    pool = ThreadPoolExecutor(max_workers=batch) if batch > 1 else None
    try:
        for start in range(0, len(cells), batch):
            chunk = cells[start:start + batch]
            results = list(pool.map(evaluate, chunk)) if pool else [evaluate(chunk[0])]
            for offset, res in enumerate(results):
                idx = start + offset
                n_eval += 1
                if res[0] >= threshold:
                    return idx, res, False, n_eval
                if best is None or res[0] > best[1][0]:
                    best = (idx, res)
    finally:
        if pool:
            pool.shutdown()
    return best[0], best[1], True, n_eval


@dataclass(frozen=True, eq=False)
class PartModel:
    part: str
    model: Optional[DictionaryModel]  # None when the part was skipped
    k_f: int
    alpha: Optional[float]
    ve: Optional[float]
    grid_exhausted: bool = False
    skipped: bool = False
    cells_evaluated: int = 0

    @property
    def m(self) -> Optional[int]:
        return None if self.model is None else self.model.V.shape[1]

    def summary(self):
        return {"part": self.part, "k_f": self.k_f, "alpha": self.alpha, "ve": self.ve,
                "grid_exhausted": self.grid_exhausted, "skipped": self.skipped}


def fit_pfm(X_f, beta: float, grid: Optional[GridSpec] = None,
            config: Optional[SolverConfig] = None, *, part: Optional[str] = None,
            n_jobs: int = 1) -> PartModel:
    """Scan (k_f ascending, alpha descending) for the first dictionary whose
    VE on ``X_f`` reaches ``100 (1 - beta/2)``."""
    if not 0 < beta < 1:
        raise ConfigError("beta must lie in (0, 1)")
    grid = grid or GridSpec()
    cfg = config or SolverConfig()
    X_f = np.asarray(X_f, dtype=float)
    p, m = X_f.shape
    name = part or "part"
    if not np.any(X_f):
        log.info("PFM %s: all-zero data, part skipped", name)
        return PartModel(name, None, 0, None, None, skipped=True)
    cells = grid.pfm_cells(part, p, m)
    threshold = 100.0 * (1.0 - beta / 2.0)

    def evaluate(cell):
        k, a = cell
        model = fit_dictionary(X_f, k, a, cfg)
        return variance_explained(X_f, model.U @ model.V), model

    idx, (ve, model), exhausted, n_eval = scan_grid(cells, evaluate, threshold, n_jobs)
    k, a = cells[idx]
    if exhausted:
        log.warning("PFM %s: no grid cell reached %.2f%% VE; best is k=%d alpha=%g (%.2f%%)",
                    name, threshold, k, a, ve)
    else:
        log.info("PFM %s: k=%d alpha=%g VE=%.3f%% after %d cells", name, k, a, ve, n_eval)
    return PartModel(name, model, k, a, ve, exhausted, False, n_eval)


def stack_parts(part_models: Sequence[PartModel],
                partition: FacePartition = DEFAULT_PARTITION):
    """Block-structured ``U`` (136 x k) and stacked codes ``V`` (k x m).

    Column order follows ``part_models``; skipped parts contribute nothing.
    """
    ms = {pm.m for pm in part_models if not pm.skipped}
    if len(ms) > 1:
        raise ColumnMismatch(f"part models were fitted on different column counts: {sorted(ms)}")
    if not ms:
        raise ColumnMismatch("no fitted part models to stack")
    Us, Vs = [], []
    for pm in part_models:
        if pm.skipped:
            continue
        Us.append(expand_to_full(pm.model.U, pm.part, partition))
        Vs.append(pm.model.V)
    return np.hstack(Us), np.vstack(Vs)


@dataclass(frozen=True, eq=False)
class HierModel:
    model: NmfModel
    q: int
    alpha_A: float
    alpha_B: float
    ve: float  # X against U A B
    ve_codes: float  # V against A B, diagnostic only
    grid_exhausted: bool = False
    cells_evaluated: int = 0

    def summary(self):
        return {"q": self.q, "alpha_A": self.alpha_A, "alpha_B": self.alpha_B, "ve": self.ve,
                "ve_codes": self.ve_codes, "grid_exhausted": self.grid_exhausted}


def fit_hfm(X, U, V, beta: float, grid: Optional[GridSpec] = None,
            config: Optional[SolverConfig] = None, *, n_jobs: int = 1) -> HierModel:
    """Scan (q ascending, alpha_A descending, alpha_B descending); a cell
    qualifies when ``U A B`` explains ``100 (1 - beta)`` percent of X."""
    if not 0 < beta < 1:
        raise ConfigError("beta must lie in (0, 1)")
    grid = grid or GridSpec()
    cfg = config or SolverConfig()
    X = np.asarray(X.X if isinstance(X, KpmMatrix) else X, dtype=float)
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    k, m = V.shape
    cells = grid.hfm_cells(k, m)
    threshold = 100.0 * (1.0 - beta)

    def evaluate(cell):
        q, a, b = cell
        model = fit_nmf(V, q, a, b, cfg)
        return variance_explained(X, U @ (model.A @ model.B)), model

    idx, (ve, model), exhausted, n_eval = scan_grid(cells, evaluate, threshold, n_jobs)
    q, a, b = cells[idx]
    ve_codes = variance_explained(V, model.A @ model.B) if np.any(V) else float("nan")
    if exhausted:
        log.warning("HFM: no grid cell reached %.2f%% VE; best is q=%d (%.2f%%)", threshold, q, ve)
    else:
        log.info("HFM: q=%d alpha_A=%g alpha_B=%g VE=%.3f%% (codes %.3f%%) after %d cells",
                 q, a, b, ve, ve_codes, n_eval)
    return HierModel(model, q, a, b, ve, ve_codes, exhausted, n_eval)


@dataclass(frozen=True, eq=False)
class FullFaceModel:
    """Two-level factorization X ~ U A B; ``U_prime = U A`` are the AUs."""

    U: np.ndarray
    A: np.ndarray
    B: np.ndarray
    beta: float
    partition: FacePartition
    parts: Tuple[dict, ...]
    hierarchy: dict
    ve_train: float
    template: Optional[Template] = None
    metadata: Dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("U", "A", "B"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.U.shape[0] != N_ROWS or self.U.shape[1] != self.A.shape[0] \
                or self.A.shape[1] != self.B.shape[0]:
            raise ValueError(f"shape chain broken: U{self.U.shape} A{self.A.shape} B{self.B.shape}")
        U_prime = self.U @ self.A
        U_prime.setflags(write=False)
        object.__setattr__(self, "_U_prime", U_prime)

    @property
    def U_prime(self) -> np.ndarray:
        return self._U_prime

    @property
    def k(self) -> int:
        return self.U.shape[1]

    @property
    def q(self) -> int:
        return self.A.shape[1]

    def part_columns(self) -> Dict[str, slice]:
        out, start = {}, 0
        for info in self.parts:
            if info.get("skipped"):
                continue
            out[info["part"]] = slice(start, start + info["k_f"])
            start += info["k_f"]
        return out


def fit_ffm(X, beta: float, grid: Optional[GridSpec] = None,
            config: Optional[SolverConfig] = None, *,
            partition: FacePartition = DEFAULT_PARTITION,
            template: Optional[Template] = None, n_jobs: int = 1,
            metadata: Optional[dict] = None) -> FullFaceModel:
    """PFM per part, stacking, then the HFM scan."""
    grid = grid or GridSpec()
    cfg = config or SolverConfig()
    meta = dict(metadata or {})
    if isinstance(X, KpmMatrix):
        meta.setdefault("sample_count", X.sample_count)
        meta.setdefault("sample_seed", X.sample_seed)
        X = X.X
    X = np.asarray(X, dtype=float)
    if X.shape[0] != N_ROWS:
        raise ValueError(f"X must have {N_ROWS} rows")

    part_models = []
    for part in partition.names:
        X_f = X[partition.rows(part)]
        if part in grid.skip_parts:
            part_models.append(PartModel(part, None, 0, None, None, skipped=True))
            continue
        part_models.append(fit_pfm(X_f, beta, grid, cfg, part=part, n_jobs=n_jobs))
    U, V = stack_parts(part_models, partition)
    hier = fit_hfm(X, U, V, beta, grid, cfg, n_jobs=n_jobs)
    meta.update(seed=cfg.seed, max_iterations=cfg.max_iterations, tol=cfg.tol,
                grid=grid.to_dict())
    return FullFaceModel(U, hier.model.A, hier.model.B, beta, partition,
                         tuple(pm.summary() for pm in part_models), hier.summary(),
                         hier.ve, template, meta)
