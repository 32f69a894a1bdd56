"""Pure numpy kernels; the reference the compiled core must match bit-for-bit."""

import numpy as np

BACKEND = "python"


def prox(code, x, gamma, lo, hi, lam):
    x = np.asarray(x, dtype=float)
    if code == 0:
        return x.copy()
    if code == 1:
        t = gamma * lam
        return np.where(x > t, x - t, np.where(x < -t, x + t, 0.0))
    if code == 2 or code == 3:
        v = np.where(x < lo, lo, x)
        return np.where(v > hi, hi, v)
    if code == 4:
        return x / (1.0 + gamma * lam)
    raise ValueError(f"unknown g code {code}")


def run_momentum(diag, b, code, lo, hi, lam, L, x0, wyz, wyx, wzz, wzy, gstep, gamma, corr):
    """Run the shared three-sequence recursion with per-step coefficients.

    Returns stacked arrays X, Z of shape (N+1, n) and Y, ZBAR, G of shape (N, n).
    """
    n = x0.shape[0]
    N = len(wyz)
    X = np.empty((N + 1, n))
    Z = np.empty((N + 1, n))
    Y = np.empty((N, n))
    ZB = np.empty((N, n))
    G = np.empty((N, n))
    inv_L = 1.0 / L
    x = np.array(x0, dtype=float)
    z = x.copy()
    X[0] = x
    Z[0] = z
    for k in range(N):
        y = wyz[k] * z + wyx[k] * x
        gr = diag * y - b
        zb = wzz[k] * z + wzy[k] * y - gstep[k] * gr
        z1 = prox(code, zb, gamma[k], lo, hi, lam)
        x = y - inv_L * gr - corr[k] * (zb - z1)
        z = z1
        Y[k] = y
        G[k] = gr
        ZB[k] = zb
        X[k + 1] = x
        Z[k + 1] = z
    return X, Y, Z, ZB, G


def run_pg(diag, b, code, lo, hi, lam, L, x0, momentum, N):
    """Proximal gradient from an extrapolated point; momentum 0 is plain prox-grad."""
    n = x0.shape[0]
    X = np.empty((N + 1, n))
    Y = np.empty((N, n))
    ZB = np.empty((N, n))
    G = np.empty((N, n))
    inv_L = 1.0 / L
    x = np.array(x0, dtype=float)
    xprev = x.copy()
    X[0] = x
    for k in range(N):
        y = x + momentum * (x - xprev)
        gr = diag * y - b
        zb = y - inv_L * gr
        x1 = prox(code, zb, inv_L, lo, hi, lam)
        xprev = x
        x = x1
        Y[k] = y
        G[k] = gr
        ZB[k] = zb
        X[k + 1] = x
    return X, Y, X.copy(), ZB, G


def pg_solve(diag, b, code, lo, hi, lam, L, x0, tol, max_iter):
    inv_L = 1.0 / L
    x = np.array(x0, dtype=float)
    res = np.inf
    for it in range(max_iter):
        p = prox(code, x - inv_L * (diag * x - b), inv_L, lo, hi, lam)
        res = float(np.sqrt(np.sum((x - p) ** 2)))
        if res <= tol:
            return x, res, it
        x = p
    return x, res, max_iter
