"""Independent reference implementations used as test oracles."""

import numpy as np

from ncxadmm.regularizers import phi_values


def prox_grid(spec, v, beta, coarse=1e-3, fine=1e-6):
    """Brute-force ``argmin_s mu*phi(s) + beta/2 (s - v)^2`` on a grid.

    A coarse pass over ``[-|v|-1, |v|+1]`` locates every local minimum; each
    one (and ``s = 0``) is then refined on a ``fine`` grid.
    """
    lo, hi = -abs(v) - 1.0, abs(v) + 1.0

    def f(s):
        return spec.mu * phi_values(spec, s) + 0.5 * beta * (s - v) ** 2

    s = np.arange(lo, hi + coarse, coarse)
    fs = f(s)
    idx = np.flatnonzero((fs <= np.roll(fs, 1)) & (fs <= np.roll(fs, -1)))
    centers = np.concatenate([s[idx], [0.0]])
    best_s, best_f = 0.0, float(f(0.0))
    for c in centers:
        g = np.arange(c - 2 * coarse, c + 2 * coarse + fine, fine)
        g = np.concatenate([g, [0.0]]) if g[0] <= 0 <= g[-1] else g
        fg = f(g)
        i = int(np.argmin(fg))
        if fg[i] < best_f - 1e-15 or (abs(fg[i] - best_f) <= 1e-15 and abs(g[i]) < abs(best_s)):
            best_s, best_f = float(g[i]), float(fg[i])
    return best_s, best_f


def prox_objective(spec, s, v, beta):
    return float(spec.mu * phi_values(spec, s) + 0.5 * beta * (s - v) ** 2)


def random_penalty(rng, kind):
    from ncxadmm import PenaltySpec

    mu = float(np.exp(rng.uniform(np.log(0.01), np.log(1.0))))
    if kind == "bridge":
        return PenaltySpec(kind, mu, p=float(rng.uniform(0.1, 1.0)))
    alpha = {"fraction": (0.5, 5), "logistic": (0.5, 5), "scad": (2.1, 5),
             "mcp": (1.1, 5), "hard": (1, 1)}[kind]
    return PenaltySpec(kind, mu, alpha=float(rng.uniform(*alpha)))


def blur_dense(A):
    """Dense matrix of a frame blur acting on one vectorized frame."""
    return np.kron(A.Hr, A.Hc)


def omega_qp(X, l):
    """Projection onto {equal columns, |u_i| <= l} by a bounded least-squares solve."""
    from scipy.optimize import lsq_linear

    m, n = X.shape
    # u minimizes sum_j ||u - x_j||^2 = n ||u - mean||^2 + const; solve it as a
    # stacked least-squares problem without using the mean explicitly
    M = np.tile(np.eye(m), (n, 1))
    res = lsq_linear(M, X.T.ravel(), bounds=(-l, l), tol=1e-14, lsmr_tol=1e-14)
    return np.repeat(res.x[:, None], n, axis=1)
