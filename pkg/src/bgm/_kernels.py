"""Compiled coordinate-descent kernels.

Arrays passed in are expected to be float64; ``X`` should be Fortran
ordered so that column access is contiguous.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def soft(z, lam):
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


@njit(cache=True, nogil=True)
def weighted_cd(X, z, w, lam, beta, b0, max_sweeps, tol, trace):
    """Cyclic coordinate descent for

        (1/2n) sum_i w_i (z_i - b0 - x_i'beta)^2 + lam * |beta|_1

    with an unpenalized intercept. ``beta`` is updated in place.

    Sweeps alternate between full passes and passes over the current
    active set; convergence is declared only after a full pass in which
    no coordinate (intercept included) moved by ``tol`` or more.
    ``trace[k]`` receives the objective after sweep ``k``.

    Returns (b0, sweeps, converged).
    """
    n, m = X.shape
    xw = np.empty(m)
    for j in range(m):
        s = 0.0
        for i in range(n):
            s += w[i] * X[i, j] * X[i, j]
        xw[j] = s / n
    r = np.empty(n)
    for i in range(n):
        r[i] = z[i] - b0
    for j in range(m):
        bj = beta[j]
        if bj != 0.0:
            for i in range(n):
                r[i] -= bj * X[i, j]
    sw = 0.0
    for i in range(n):
        sw += w[i]

    sweeps = 0
    converged = False
    full = True
    while sweeps < max_sweeps:
        maxd = 0.0
        s = 0.0
        for i in range(n):
            s += w[i] * r[i]
        d = s / sw
        if d != 0.0:
            b0 += d
            for i in range(n):
                r[i] -= d
            maxd = abs(d)
        for j in range(m):
            old = beta[j]
            if (not full and old == 0.0) or xw[j] <= 0.0:
                continue
            g = 0.0
            for i in range(n):
                g += w[i] * X[i, j] * r[i]
            new = soft(g / n + xw[j] * old, lam) / xw[j]
            if new != old:
                d = new - old
                for i in range(n):
                    r[i] -= d * X[i, j]
                beta[j] = new
                if abs(d) > maxd:
                    maxd = abs(d)

        loss = 0.0
        for i in range(n):
            loss += w[i] * r[i] * r[i]
        pen = 0.0
        for j in range(m):
            pen += abs(beta[j])
        trace[sweeps] = loss / (2.0 * n) + lam * pen
        sweeps += 1

        if maxd < tol:
            if full:
                converged = True
                break
            full = True
        else:
            full = False
    return b0, sweeps, converged
