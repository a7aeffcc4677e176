"""Pure-Python implementations of the hot kernels.

Signatures and results match the compiled ``_ckernels`` module exactly; this
module is used whenever the extension is not built or
``TASKMARKET_PURE_PYTHON=1`` is set.
"""

import math

import numpy as np


def cost_gap(z, lm, lr, la, wage, normalized, kbar, theta, gamma, rental):
    """Labor unit cost minus digital unit cost at scalar ``z``."""
    m = 1.0 - z
    r = 4.0 * z * (1.0 - z)
    lam = lm * m + lr * r + la * z
    if normalized:
        lam /= m + r + z
    labor = wage / lam if lam > 0.0 else math.inf
    return labor - rental / (kbar + theta * z**gamma)


def bisect_cost_gap(lo, hi, lm, lr, la, wage, normalized, kbar, theta, gamma, rental,
                    xtol, maxiter):
    """Bisect the labor-minus-digital cost gap on ``[lo, hi]``.

    The gap must differ in sign at the two ends. Returns
    ``(root, iterations, converged)`` where ``root`` is whichever final
    bracket end has the smaller absolute gap.
    """
    args = (lm, lr, la, wage, normalized, kbar, theta, gamma, rental)
    g_lo = cost_gap(lo, *args)
    g_hi = cost_gap(hi, *args)
    if g_lo == 0.0:
        return lo, 0, True
    if g_hi == 0.0:
        return hi, 0, True
    neg_lo = g_lo < 0.0
    it = 0
    while hi - lo > xtol and it < maxiter:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        it += 1
        g_mid = cost_gap(mid, *args)
        if g_mid == 0.0:
            return mid, it, True
        if (g_mid < 0.0) == neg_lo:
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
    root = lo if abs(g_lo) <= abs(g_hi) else hi
    return root, it, hi - lo <= xtol or it < maxiter


def demean_alternating(X, codes, n_levels, tol, maxiter):
    """Sweep group-mean removal over every factor until the largest
    adjustment in a sweep is at most ``tol``.

    ``X`` (n, k) float64 is modified in place; ``codes`` (n, F) holds dense
    integer level codes per factor. Returns ``(sweeps, converged)``.
    """
    n, k = X.shape
    n_factors = codes.shape[1]
    counts = [np.bincount(codes[:, f], minlength=n_levels[f]).astype(float) for f in range(n_factors)]
    for sweep in range(1, maxiter + 1):
        biggest = 0.0
        for f in range(n_factors):
            c = codes[:, f]
            cnt = counts[f]
            for j in range(k):
                means = np.bincount(c, weights=X[:, j], minlength=n_levels[f]) / cnt
                X[:, j] -= means[c]
                if n:
                    biggest = max(biggest, float(np.max(np.abs(means))))
        if n_factors <= 1 or biggest <= tol:
            return sweep, True
    return maxiter, False
