"""Positive lasso: fixed-penalty solvers and the full solution path.

Objective (no 1/2 on the data term)::

    f(v) = ||y - U v||^2 + alpha * sum(v),   v >= 0

Stationarity for this objective: ``2 u_j^T (U v - y) + alpha`` is zero for
active coordinates and nonnegative for coordinates at zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..errors import NonFiniteInput


def _check(U, y):
    U = np.asarray(U, dtype=float)
    y = np.asarray(y, dtype=float)
    if U.ndim != 2 or y.ndim != 1 or U.shape[0] != y.shape[0]:
        raise ValueError(f"shape mismatch: U {U.shape}, y {y.shape}")
    if not (np.all(np.isfinite(U)) and np.all(np.isfinite(y))):
        raise NonFiniteInput("U and y must be finite")
    return U, y


def objective(U, y, v, alpha) -> float:
    r = y - U @ v
    return float(r @ r + alpha * np.sum(v))


def kkt_residual(U, y, v, alpha) -> float:
    """Largest violation of the KKT conditions (0 at an exact solution)."""
    U, y = _check(U, y)
    g = 2.0 * U.T @ (U @ v - y) + alpha
    active = v > 0
    viol = np.zeros_like(g)
    viol[active] = np.abs(g[active])
    viol[~active] = np.maximum(-g[~active], 0.0)
    neg = np.maximum(-v, 0.0)
    return float(max(viol.max(initial=0.0), neg.max(initial=0.0)))


def _restricted_solve(G, b, P):
    GP = G[np.ix_(P, P)]
    try:
        z = np.linalg.solve(GP, b[P])
        if np.all(np.isfinite(z)) and np.allclose(GP @ z, b[P], rtol=1e-9,
                                                  atol=1e-12 * max(1.0, np.abs(b[P]).max())):
            return z
    except np.linalg.LinAlgError:
        pass
    return np.linalg.lstsq(GP, b[P], rcond=None)[0]


def _solve_or_none(GP, bP):
    try:
        z = np.linalg.solve(GP, bP)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(z)):
        return None
    if np.abs(GP @ z - bP).max(initial=0.0) > 1e-10 * max(1.0, np.abs(bP).max(initial=0.0)):
        return None
    return z


def _kkt_violation(G, c0, v, alpha):
    g = 2.0 * (G @ v - c0) + alpha
    pos = v > 0
    return float(max(np.abs(g[pos]).max(initial=0.0), (-g[~pos]).max(initial=0.0)))


def _well_posed_solve(GP, bP, max_cond=1e12):
    ev = np.linalg.eigvalsh(GP)
    if ev[0] <= ev[-1] / max_cond:
        return None
    return _solve_or_none(GP, bP)


def _active_set(G, b, tol, max_iter):
    """Lawson-Hanson style active set for min v'Gv - 2b'v, v >= 0.

    G may be singular (more atoms than rows). A singular restricted block
    makes the restricted problem unbounded along its null direction, so we
    follow that direction until a coordinate reaches zero.
    """
    k = G.shape[0]
    v = np.zeros(k)
    passive = np.zeros(k, dtype=bool)
    w = b.copy()
    blocked = np.zeros(k, dtype=bool)
    for _ in range(max_iter):
        cand = np.where(~passive & ~blocked & (w > tol))[0]
        if cand.size == 0:
            break
        j = cand[np.argmax(w[cand])]
        passive[j] = True
        for _inner in range(4 * k + 10):
            P = np.where(passive)[0]
            GP = G[np.ix_(P, P)]
            vP = v[P]
            z = _solve_or_none(GP, b[P])
            if z is None:
                # descent along the null space of GP (objective is linear there)
                n = np.linalg.svd(GP)[2][-1]
                if b[P] @ n < 0:
                    n = -n
                dec = n < -1e-14
                if not dec.any():
                    break
                t = float(np.min(vP[dec] / -n[dec]))
                v[P] = np.maximum(vP + t * n, 0.0)
                hit = P[dec][np.argmin(vP[dec] / -n[dec])]
                v[hit] = 0.0
                passive[hit] = False
            elif np.all(z > 0):
                v[:] = 0.0
                v[P] = z
                break
            else:
                neg = z <= 0
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratios = np.where(neg, vP / (vP - z), np.inf)
                t = float(np.clip(ratios.min(), 0.0, 1.0))
                v[P] = vP + t * (z - vP)
                drop = P[neg & (ratios <= t)]
                v[drop] = 0.0
                passive[drop] = False
            v[~passive] = 0.0
            if not passive.any():
                break
        # a variable that leaves at once cannot be made positive; block it
        # until the active set changes again
        if not passive[j]:
            blocked[j] = True
        else:
            blocked[:] = False
        w = b - G @ v
    return v


def _polish(G, b, v, sweeps=50):
    # exact coordinate minimization from the active-set point
    for _ in range(sweeps):
        change = 0.0
        for j in range(len(v)):
            if G[j, j] <= 0:
                continue
            new = max(0.0, v[j] + (b[j] - G[j] @ v) / G[j, j])
            change = max(change, abs(new - v[j]))
            v[j] = new
        if change <= 1e-15 * max(1.0, np.abs(v).max()):
            break
    return v


def positive_lasso(U, y, alpha, *, method="active_set", tol=None, max_iter=None) -> np.ndarray:
    """Minimize ``||y - U v||^2 + alpha * sum(v)`` over ``v >= 0``.

    ``method`` is "active_set" (exact, default) or "cd" (cyclic coordinate
    descent, kept as an independent cross-check).
    """
    U, y = _check(U, y)
    if alpha < 0 or not np.isfinite(alpha):
        raise ValueError("alpha must be a finite nonnegative number")
    G = U.T @ U
    b = U.T @ y - 0.5 * alpha
    k = G.shape[0]
    if method == "cd":
        return _coordinate_descent(G, b, tol=1e-14 if tol is None else tol,
                                   max_sweeps=max_iter or 100_000)
    if method != "active_set":
        raise ValueError(f"unknown method {method!r}")
    scale = max(1.0, np.abs(b).max(initial=0.0), np.abs(G).max(initial=0.0))
    tol = 1e-13 * scale if tol is None else tol
    v = _active_set(G, b, tol, max_iter or 5 * k + 20)
    w = b - G @ v
    if np.any(w > tol) or np.any(np.abs(w[v > 0]) > tol):
        v = _polish(G, b, v)
    return v


def _coordinate_descent(G, b, tol, max_sweeps):
    k = G.shape[0]
    v = np.zeros(k)
    for _ in range(max_sweeps):
        change = 0.0
        for j in range(k):
            if G[j, j] <= 0:
                v[j] = 0.0
                continue
            new = max(0.0, v[j] + (b[j] - G[j] @ v) / G[j, j])
            change = max(change, abs(new - v[j]) * np.sqrt(G[j, j]))
            v[j] = new
        if change <= tol * max(1.0, np.abs(b).max()):
            break
    return v


def positive_lasso_batch(U, Y, alpha, **kwargs) -> np.ndarray:
    """Column-wise :func:`positive_lasso` for a matrix of samples."""
    Y = np.asarray(Y, dtype=float)
    out = np.zeros((np.shape(U)[1], Y.shape[1]))
    for i in range(Y.shape[1]):
        out[:, i] = positive_lasso(U, Y[:, i], alpha, **kwargs)
    return out


@dataclass(frozen=True, eq=False)
class LassoPath:
    """Piecewise-linear positive-lasso path.

    ``alphas`` are the knots in decreasing order, ending at 0 unless the path
    stopped early; ``coefs[i]`` is the solution at ``alphas[i]``;
    ``active_sets[i]`` holds the active coordinates on the open segment
    between knots i and i + 1. ``events`` lists ``(alpha, kind, index)`` in
    the order they happened, kind being "enter" or "leave".
    """

    alphas: np.ndarray
    coefs: np.ndarray  # (n_knots, k)
    active_sets: Tuple[Tuple[int, ...], ...]
    events: Tuple[Tuple[float, str, int], ...] = ()

    @property
    def alpha_max(self) -> float:
        return float(self.alphas[0])

    @property
    def breakpoints(self) -> np.ndarray:
        """Knots where the active set changes (the terminal alpha = 0 excluded)."""
        if len(self.alphas) > 1 and self.alphas[-1] == 0.0:
            return self.alphas[:-1]
        return self.alphas

    @property
    def supports(self) -> np.ndarray:
        return np.count_nonzero(self.coefs > 0, axis=1)

    @property
    def l1_norms(self) -> np.ndarray:
        return self.coefs.sum(axis=1)

    def at(self, alpha: float) -> np.ndarray:
        a = self.alphas
        if alpha >= a[0]:
            return self.coefs[0].copy()
        if alpha <= a[-1]:
            return self.coefs[-1].copy()
        # a is decreasing; find i with a[i] >= alpha > a[i+1]
        i = int(np.searchsorted(-a, -alpha, side="right")) - 1
        i = min(max(i, 0), len(a) - 2)
        t = (a[i] - alpha) / (a[i] - a[i + 1])
        return (1 - t) * self.coefs[i] + t * self.coefs[i + 1]


def positive_lasso_path(U, y, *, max_steps=None) -> LassoPath:
    """Homotopy (LARS-lasso) path for the positive lasso, alpha from alpha_max to 0.

    A coordinate joins the active set when its correlation ``2 u_j^T r``
    rises to alpha and leaves when its coefficient reaches 0. Ties on entry go
    to the lower index.
    """
    U, y = _check(U, y)
    k = U.shape[1]
    G = U.T @ U
    c0 = U.T @ y
    zero = np.zeros(k)
    if k == 0 or c0.max(initial=0.0) <= 0:
        return LassoPath(np.array([0.0]), zero[None, :], ())

    corr = 2.0 * c0
    tiny = 1e-12 * max(1.0, np.abs(corr).max())
    alpha = float(corr.max())
    active = [int(np.flatnonzero(corr >= alpha - tiny)[0])]
    v = zero.copy()
    alphas, coefs, sets = [alpha], [v.copy()], []
    events = [(alpha, "enter", active[0])]
    just_dropped = -1
    half = np.full(k, 0.5)
    scale = max(1.0, np.abs(c0).max(), np.abs(G).max())
    kkt_tol = 1e-9 * scale
    stalled = 0

    for _ in range(max_steps or 20 * k + 50):
        A = np.asarray(active, dtype=int)
        d = _restricted_solve(G, half, A)
        a = G[:, A] @ d
        corr = 2.0 * (c0 - G[:, A] @ v[A])

        steps = np.full(k, np.inf)
        inactive = np.ones(k, dtype=bool)
        inactive[A] = False
        denom = 1.0 - 2.0 * a
        ok = inactive & (denom > 1e-14)
        steps[ok] = np.maximum((alpha - corr[ok]) / denom[ok], 0.0)
        if just_dropped >= 0 and steps[just_dropped] <= tiny:
            steps[just_dropped] = np.inf
        leave = np.full(len(A), np.inf)
        dec = d < 0
        leave[dec] = np.maximum(-v[A][dec] / d[dec], 0.0)
        leave_step = leave.min()

        while True:
            enter_step = steps.min()
            delta = min(enter_step, leave_step, alpha)
            if delta >= alpha - tiny:
                event = "end"
                break
            if leave_step <= enter_step:
                event, who = "leave", int(A[np.argmin(leave)])
                break
            # lowest index among (near-)simultaneous entries
            who = int(np.flatnonzero(steps <= enter_step + 1e-12 * max(1.0, alpha))[0])
            A2 = np.append(A, who)
            d2 = _well_posed_solve(G[np.ix_(A2, A2)], half[A2])
            if d2 is not None and d2[-1] > 0:
                event = "enter"
                break
            # entering would make the equicorrelation system singular or
            # shrink the new coefficient at once; skip it on this segment
            steps[who] = np.inf

        if event == "end":
            new_alpha = 0.0
        elif delta <= tiny:
            new_alpha = alpha
        else:
            new_alpha = alpha - delta
        if new_alpha != alpha:
            v_new = zero.copy()
            v_new[A] = np.maximum(_restricted_solve(G, c0 - 0.5 * new_alpha, A), 0.0)
            if event == "leave":
                v_new[who] = 0.0
            if _kkt_violation(G, c0, v_new, new_alpha) > kkt_tol:
                # homotopy drifted (ill-conditioned active set): re-anchor on
                # the exact solution at this alpha
                v_new = _active_set(G, c0 - 0.5 * new_alpha, 1e-13 * scale, 5 * k + 20)
                active = [int(i) for i in np.flatnonzero(v_new > 0)]
                event = "end" if new_alpha == 0.0 else "reanchor"
            sets.append(tuple(sorted(int(i) for i in A)))
            alphas.append(new_alpha)
            coefs.append(v_new)
            v, alpha = v_new, new_alpha
            stalled = 0
        else:
            stalled += 1
            if event == "leave":
                v = v.copy()
                v[who] = 0.0
                coefs[-1] = v
        if event == "end":
            break
        if event == "enter":
            active.append(who)
            just_dropped = -1
            events.append((float(alpha), event, who))
        elif event == "leave":
            active.remove(who)
            just_dropped = who
            events.append((float(alpha), event, who))
        if stalled > k or not active:
            # cycling at one alpha: finish from the exact solution at alpha = 0
            sets.append(tuple(sorted(int(i) for i in active)))
            alphas.append(0.0)
            coefs.append(_active_set(G, c0, 1e-13 * scale, 5 * k + 20))
            break
    else:
        if alpha > 0:
            sets.append(tuple(sorted(int(i) for i in active)))
            alphas.append(0.0)
            coefs.append(_active_set(G, c0, 1e-13 * scale, 5 * k + 20))

    return LassoPath(np.asarray(alphas), np.asarray(coefs), tuple(sets), tuple(events))
