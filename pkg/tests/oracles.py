"""Independent reference solutions used by the tests."""
import itertools

import numpy as np


def brute_force_positive_lasso(U, y, alpha):
    """Minimum of ||y - U v||^2 + alpha sum(v) over v >= 0 by enumerating supports.

    On a support S the objective is a quadratic whose stationary points solve
    G_SS v = U_S^T y - alpha/2; a feasible minimizer always sits on some S.
    """
    U = np.asarray(U, float)
    y = np.asarray(y, float)
    k = U.shape[1]
    G, c = U.T @ U, U.T @ y
    best_v, best = np.zeros(k), float(y @ y)
    for size in range(1, k + 1):
        for S in itertools.combinations(range(k), size):
            S = list(S)
            rhs = c[S] - alpha / 2
            vS = np.linalg.lstsq(G[np.ix_(S, S)], rhs, rcond=None)[0]
            if not np.allclose(G[np.ix_(S, S)] @ vS, rhs, atol=1e-9 * max(1, np.abs(rhs).max())):
                continue
            if np.any(vS < -1e-12):
                continue
            v = np.zeros(k)
            v[S] = np.maximum(vS, 0)
            r = y - U @ v
            obj = float(r @ r + alpha * v.sum())
            if obj < best:
                best, best_v = obj, v
    return best_v, best


def random_lasso_instance(rng, max_k=6, wide=False):
    k = int(rng.integers(1, max_k + 1))
    r = int(rng.integers(1, k + 1)) if wide else int(rng.integers(k, k + 6))
    U = rng.normal(size=(r, k))
    kind = rng.integers(4)
    if kind == 1 and k > 1:
        U[:, -1] = U[:, 0] * rng.uniform(0.5, 2)  # collinear pair
    elif kind == 2:
        U[:, 0] = 0.0  # zero column
    y = rng.normal(size=r) * rng.uniform(0.1, 10)
    c_max = max(2 * float((U.T @ y).max()), 1e-3)
    alpha = float(rng.choice([0.0, rng.uniform(0, c_max), rng.uniform(0, 0.1 * c_max)]))
    return U, y, alpha
