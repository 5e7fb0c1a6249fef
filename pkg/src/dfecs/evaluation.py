"""Encoding against fixed AU matrices, variance explained, VE curves and
the interpretability metric."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import IncompleteLabels, ShapeError, ZeroData
from .solvers.lasso import LassoPath, kkt_residual, positive_lasso, positive_lasso_path


def _data(Y):
    return np.asarray(getattr(Y, "X", Y), dtype=float)


def variance_explained(X, X_hat) -> float:
    """``100 (1 - ||X - X_hat||^2 / ||X||^2)``; can be negative, never clamped."""
    X = np.asarray(X, dtype=float)
    X_hat = np.asarray(X_hat, dtype=float)
    if X.shape != X_hat.shape:
        raise ShapeError(f"shape mismatch {X.shape} vs {X_hat.shape}")
    total = float(np.sum(X * X))
    if total == 0:
        raise ZeroData("variance explained is undefined for all-zero data")
    R = X - X_hat
    return 100.0 * (1.0 - float(np.sum(R * R)) / total)


def per_sample_ve(Y, Y_hat) -> np.ndarray:
    """Column-wise VE; NaN for all-zero columns."""
    Y, Y_hat = _data(Y), np.asarray(Y_hat, dtype=float)
    tot = np.einsum("ij,ij->j", Y, Y)
    R = Y - Y_hat
    res = np.einsum("ij,ij->j", R, R)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(tot > 0, 100.0 * (1.0 - res / tot), np.nan)


@dataclass(frozen=True, eq=False)
class EncodingResult:
    V: np.ndarray  # k x m, nonnegative
    alpha: Union[float, str]
    supports: np.ndarray
    kkt: np.ndarray  # per-column KKT residual at the reported alpha
    provenance: str = "dfecs"
    paths: Optional[Tuple[LassoPath, ...]] = None
    eval_alpha: float = 0.0

    @property
    def max_kkt(self) -> float:
        return float(self.kkt.max(initial=0.0))


def _map(fn, items, n_jobs):
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            return list(ex.map(fn, items))
    return [fn(i) for i in items]


def encode_dataset(Y, U, alpha: Optional[float] = None, *, mode: str = "fixed",
                   provenance: str = "dfecs", n_jobs: int = 1) -> EncodingResult:
    """Per-column positive lasso ``min ||y - U v||^2 + alpha sum(v), v >= 0``.

    ``mode="path"`` computes each column's full solution path and reports
    the coefficients at ``alpha`` (default 0, the path endpoint).
    """
    Y, U = _data(Y), np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] != Y.shape[0]:
        raise ShapeError(f"AU matrix has {U.shape[0] if U.ndim == 2 else '?'} rows, data has {Y.shape[0]}")
    m = Y.shape[1]
    cols = range(m)
    if mode == "fixed":
        if alpha is None:
            raise ValueError("fixed mode needs alpha")
        V = np.column_stack(_map(lambda i: positive_lasso(U, Y[:, i], alpha), cols, n_jobs)) \
            if m else np.zeros((U.shape[1], 0))
        paths, reported, eval_alpha = None, float(alpha), float(alpha)
    elif mode == "path":
        eval_alpha = 0.0 if alpha is None else float(alpha)
        paths = tuple(_map(lambda i: positive_lasso_path(U, Y[:, i]), cols, n_jobs))
        V = np.column_stack([p.at(eval_alpha) for p in paths]) if m else np.zeros((U.shape[1], 0))
        reported = "path"
    else:
        raise ValueError(f"unknown mode {mode!r}")
    V = np.maximum(V, 0.0)
    kkt = np.array([kkt_residual(U, Y[:, i], V[:, i], eval_alpha) for i in cols])
    return EncodingResult(V, reported, np.count_nonzero(V > 0, axis=0), kkt,
                          provenance, paths, eval_alpha)


@dataclass(frozen=True, eq=False)
class VarianceCurve:
    """Mean per-sample VE along an axis (AU count or L1 budget).

    ``pooled_ve`` is the Frobenius VE over all used samples; ``quantiles``
    holds the 10/25/50/75/90th percentiles of per-sample VE. Zero-norm
    samples are excluded and counted in ``n_excluded``.
    """

    axis: str
    values: np.ndarray
    mean_ve: np.ndarray
    pooled_ve: np.ndarray
    quantiles: np.ndarray  # len(values) x 5
    n_samples: int
    n_excluded: int
    label: str = ""

    def rows(self):
        for v, mean, pooled in zip(self.values, self.mean_ve, self.pooled_ve):
            yield float(v), float(mean), float(pooled), self.n_samples


QUANTILES = (10, 25, 50, 75, 90)


def _paths_for(Y, U_or_enc, n_jobs):
    if isinstance(U_or_enc, EncodingResult):
        if U_or_enc.paths is None:
            raise ValueError("encoding was computed without paths")
        return U_or_enc.paths
    U = np.asarray(U_or_enc, dtype=float)
    return encode_dataset(Y, U, mode="path", n_jobs=n_jobs).paths


def _curve(axis, values, residuals, norms, label):
    # residuals: n_values x m (squared), norms: m (squared)
    used = norms > 0
    res, tot = residuals[:, used], norms[used]
    n = int(used.sum())
    if n == 0:
        raise ZeroData("every sample has zero norm")
    ve = 100.0 * (1.0 - res / tot)
    return VarianceCurve(axis, np.asarray(values, dtype=float), ve.mean(axis=1),
                         100.0 * (1.0 - res.sum(axis=1) / tot.sum()),
                         np.percentile(ve, QUANTILES, axis=1).T, n, int((~used).sum()), label)


def _sq_residual(U, y, v):
    r = y - U @ v
    return float(r @ r)


def _support_refit(U, y, coef, cache):
    """Squared residual of the NNLS fit restricted to ``coef``'s support."""
    S = tuple(np.flatnonzero(coef > 0))
    if S not in cache:
        if not S:
            cache[S] = float(y @ y)
        else:
            US = U[:, S]
            cache[S] = _sq_residual(US, y, positive_lasso(US, y, 0.0))
    return cache[S]


def ve_curve_by_k(Y, U, paths=None, *, ks: Optional[Sequence[int]] = None,
                  refit: bool = True, label: str = "", n_jobs: int = 1) -> VarianceCurve:
    """VE using at most k AUs. ``ks`` defaults to 0..n_columns.

    The lasso path of each sample proposes supports; at k the sample uses
    the best path knot with support size <= k. With ``refit`` (default)
    each knot is scored by the nonnegative least-squares fit on its
    support, which removes the lasso shrinkage. That score can only grow
    when columns are added to U, so a superset of AUs never loses. With
    ``refit=False`` the shrunken path coefficients are scored directly.
    Both curves are non-decreasing in k and end at the NNLS VE.
    """
    Y, U = _data(Y), np.asarray(U, dtype=float)
    paths = paths if paths is not None else _paths_for(Y, U, n_jobs)
    ks = list(range(U.shape[1] + 1)) if ks is None else [int(k) for k in ks]
    norms = np.einsum("ij,ij->j", Y, Y)

    def sample_residuals(i):
        y, path, cache = Y[:, i], paths[i], {}
        if refit:
            knot_res = np.array([_support_refit(U, y, c, cache) for c in path.coefs])
        else:
            knot_res = np.array([_sq_residual(U, y, c) for c in path.coefs])
        sup = path.supports
        return [knot_res[sup <= k].min() if np.any(sup <= k) else norms[i] for k in ks]

    residuals = np.array(_map(sample_residuals, range(Y.shape[1]), n_jobs)).T.reshape(len(ks), Y.shape[1])
    return _curve("num_components", ks, residuals, norms, label)


def _at_l1(path: LassoPath, budget: float) -> np.ndarray:
    l1 = path.l1_norms
    if budget >= l1[-1]:
        return path.coefs[-1]
    if budget <= 0:
        return np.zeros_like(path.coefs[0])
    # L1 grows as alpha falls; find the segment crossing the budget
    j = int(np.searchsorted(l1, budget, side="right"))
    lo, hi = l1[j - 1], l1[j]
    t = 0.0 if hi == lo else (budget - lo) / (hi - lo)
    return (1 - t) * path.coefs[j - 1] + t * path.coefs[j]


def ve_curve_by_l1(Y, U, paths=None, *, budgets: Optional[Sequence[float]] = None,
                   label: str = "", n_jobs: int = 1) -> VarianceCurve:
    """VE at an L1 budget: per sample, the path point whose coefficient L1
    norm is the largest not exceeding the budget (interpolated inside a
    segment). ``budgets`` defaults to 0..1000 in steps of 10."""
    Y, U = _data(Y), np.asarray(U, dtype=float)
    paths = paths if paths is not None else _paths_for(Y, U, n_jobs)
    budgets = np.arange(0.0, 1001.0, 10.0) if budgets is None else np.asarray(budgets, dtype=float)
    norms = np.einsum("ij,ij->j", Y, Y)
    residuals = np.empty((len(budgets), Y.shape[1]))
    for i, path in enumerate(paths):
        for a, b in enumerate(budgets):
            residuals[a, i] = _sq_residual(U, Y[:, i], _at_l1(path, b))
    return _curve("l1_norm", budgets, residuals, norms, label)


@dataclass(frozen=True)
class InterpretabilityRecord:
    """Per-AU rater labels; True means the rater judged the AU non-interpretable."""

    labels: Mapping[str, Tuple[bool, ...]]

    def __post_init__(self):
        bad = [au for au, votes in self.labels.items() if len(votes) != 3]
        if bad:
            raise IncompleteLabels(f"AUs without exactly three labels: {bad}")
        if not self.labels:
            raise IncompleteLabels("no AUs labelled")

    @property
    def majority(self) -> Dict[str, bool]:
        return {au: sum(bool(v) for v in votes) >= 2 for au, votes in self.labels.items()}

    def rater_metric(self, rater: int) -> float:
        k = len(self.labels)
        ni = sum(bool(votes[rater]) for votes in self.labels.values())
        return (k - ni) / k * 100.0


def interpretability_metric(record: InterpretabilityRecord) -> float:
    """``(k - ni) / k * 100`` with ni the majority-voted non-interpretable count."""
    k = len(record.labels)
    ni = sum(record.majority.values())
    return (k - ni) / k * 100.0


@dataclass(frozen=True, eq=False)
class SetComparison:
    name: str
    encoding: EncodingResult
    by_k: VarianceCurve
    by_l1: VarianceCurve


def compare_au_sets(Y, au_sets: Mapping[str, np.ndarray], *, budgets=None,
                    refit: bool = True, n_jobs: int = 1) -> Dict[str, SetComparison]:
    """Path encodings and both VE curves for each named AU matrix."""
    out = {}
    for name, U in au_sets.items():
        enc = encode_dataset(Y, U, mode="path", provenance=name, n_jobs=n_jobs)
        out[name] = SetComparison(
            name, enc,
            ve_curve_by_k(Y, U, enc.paths, refit=refit, label=name),
            ve_curve_by_l1(Y, U, enc.paths, budgets=budgets, label=name))
    return out


def comparison_table(results: Mapping[str, SetComparison]):
    """Rows of (name, n_AUs, endpoint mean VE, endpoint pooled VE)."""
    rows = []
    for name, res in results.items():
        c = res.by_k
        rows.append((name, int(c.values[-1]), float(c.mean_ve[-1]), float(c.pooled_ve[-1])))
    return rows


def reencode_ve(X, model, alpha: float = 0.0) -> float:
    """VE of X re-encoded against a model's AUs at ``alpha``."""
    X = _data(X)
    enc = encode_dataset(X, model.U_prime, alpha, mode="fixed")
    return variance_explained(X, model.U_prime @ enc.V)
