"""Compiled inner loops for the recursive ADF sweep.

Every window statistic is computed from running cross-product sums, so one
BSADF value at fixed end point costs O(T) and a full GSADF sweep O(T^2).
"""
import numpy as np
from numba import njit

# windows whose centred Gram matrix is this ill-conditioned are skipped
_COND_LIMIT = 1e12


@njit(cache=True, error_model="numpy")
def _window_stat(Sz, Szz, Szy, Sy, Syy, n, p, intercept, A, L, b, z, e, x):
    """(beta, t) on the lagged level from raw sums over n rows; NaN if degenerate.

    A, L, b, z, e, x are caller-owned scratch buffers of size p / (p, p).
    """
    if intercept:
        inv_n = 1.0 / n
        for i in range(p):
            b[i] = Szy[i] - Sz[i] * Sy * inv_n
            for j in range(i + 1):
                A[i, j] = Szz[i, j] - Sz[i] * Sz[j] * inv_n
        cyy = Syy - Sy * Sy * inv_n
        dof = n - p - 1
    else:
        for i in range(p):
            b[i] = Szy[i]
            for j in range(i + 1):
                A[i, j] = Szz[i, j]
        cyy = Syy
        dof = n - p
    if dof <= 0:
        return np.nan, np.nan
    if p == 1:
        if A[0, 0] <= 0.0:
            return np.nan, np.nan
        beta = b[0] / A[0, 0]
        rss = cyy - beta * b[0]
        floor = 1e-15 * cyy
        if rss < floor:
            rss = floor
        if rss <= 0.0:
            return np.nan, np.nan
        return beta, beta / np.sqrt(rss / dof / A[0, 0])
    if p == 2:
        a00 = A[0, 0]
        a10 = A[1, 0]
        a11 = A[1, 1]
        det = a00 * a11 - a10 * a10
        tr = a00 + a11
        if det <= 0.0 or tr * tr > _COND_LIMIT * det:
            return np.nan, np.nan
        inv = 1.0 / det
        beta = (a11 * b[0] - a10 * b[1]) * inv
        beta1 = (a00 * b[1] - a10 * b[0]) * inv
        rss = cyy - beta * b[0] - beta1 * b[1]
        floor = 1e-15 * cyy
        if rss < floor:
            rss = floor
        if rss <= 0.0:
            return np.nan, np.nan
        return beta, beta / np.sqrt(rss / dof * a11 * inv)
    # Cholesky on the lower triangle
    for i in range(p):
        for j in range(i + 1):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            if i == j:
                if s <= 0.0:
                    return np.nan, np.nan
                L[i, i] = np.sqrt(s)
            else:
                L[i, j] = s / L[j, j]
    dmin = L[0, 0]
    dmax = L[0, 0]
    for i in range(1, p):
        if L[i, i] < dmin:
            dmin = L[i, i]
        if L[i, i] > dmax:
            dmax = L[i, i]
    if (dmax / dmin) ** 2 > _COND_LIMIT:
        return np.nan, np.nan
    for i in range(p):
        s = b[i]
        s0 = 1.0 if i == 0 else 0.0
        for k in range(i):
            s -= L[i, k] * z[k]
            s0 -= L[i, k] * e[k]
        z[i] = s / L[i, i]
        e[i] = s0 / L[i, i]
    for i in range(p - 1, -1, -1):
        s = z[i]
        for k in range(i + 1, p):
            s -= L[k, i] * x[k]
        x[i] = s / L[i, i]
    # (A^{-1})_{00} = ||L^{-1} e0||^2 ; RSS = cyy - b'x = cyy - ||z||^2
    inv00 = 0.0
    rss = cyy
    for i in range(p):
        inv00 += e[i] * e[i]
        rss -= z[i] * z[i]
    floor = 1e-15 * cyy
    if rss < floor:
        rss = floor
    if rss <= 0.0:
        return np.nan, np.nan
    se = np.sqrt(rss / dof * inv00)
    return x[0], x[0] / se


@njit(cache=True, error_model="numpy")
def _regressors(y, K):
    """Rows t = K+1..T-1: z_t = (y_{t-1}, dy_{t-1}, ..., dy_{t-K}), target dy_t."""
    T = y.shape[0]
    p = K + 1
    Z = np.zeros((T, p))
    dy = np.zeros(T)
    for t in range(1, T):
        dy[t] = y[t] - y[t - 1]
    for t in range(K + 1, T):
        Z[t, 0] = y[t - 1]
        for k in range(1, K + 1):
            Z[t, k] = dy[t - k]
    return Z, dy


@njit(cache=True, error_model="numpy")
def _bsadf_generic(y, K, min_window, intercept):
    """BSADF(r2) for every end index r2 (NaN below the first admissible r2).

    Window [r1, r2] holds observations y[r1..r2]; its ADF regression uses
    rows t = r1+K+1..r2.  Admissible windows have r2 - r1 + 1 >= min_window.
    """
    T = y.shape[0]
    p = K + 1
    # centring the level leaves every statistic unchanged and keeps sums small
    yc = y - np.mean(y)
    Z, dy = _regressors(yc, K)
    out = np.full(T, np.nan)
    Sz = np.zeros(p)
    Szz = np.zeros((p, p))
    Szy = np.zeros(p)
    min_rows = min_window - K - 1
    A = np.zeros((p, p))
    L = np.zeros((p, p))
    b = np.zeros(p)
    z = np.zeros(p)
    e = np.zeros(p)
    x = np.zeros(p)
    for r2 in range(min_window - 1, T):
        Sz[:] = 0.0
        Szz[:, :] = 0.0
        Szy[:] = 0.0
        Sy = 0.0
        Syy = 0.0
        best = -np.inf
        n = 0
        for t in range(r2, K, -1):
            yt = dy[t]
            for i in range(p):
                zi = Z[t, i]
                Sz[i] += zi
                Szy[i] += zi * yt
                for j in range(i + 1):
                    Szz[i, j] += zi * Z[t, j]
            Sy += yt
            Syy += yt * yt
            n += 1
            if n >= min_rows:
                _, stat = _window_stat(Sz, Szz, Szy, Sy, Syy, n, p, intercept,
                                       A, L, b, z, e, x)
                if stat == stat and stat > best:
                    best = stat
        if best > -np.inf:
            out[r2] = best
    return out


@njit(cache=True, error_model="numpy")
def _t_from_moments2(a00, a10, a11, b0, b1, cyy, dof):
    det = a00 * a11 - a10 * a10
    tr = a00 + a11
    if dof <= 0 or det <= 0.0 or tr * tr > _COND_LIMIT * det:
        return np.nan
    inv = 1.0 / det
    beta = (a11 * b0 - a10 * b1) * inv
    beta1 = (a00 * b1 - a10 * b0) * inv
    rss = cyy - beta * b0 - beta1 * b1
    if rss < 1e-15 * cyy:
        rss = 1e-15 * cyy
    if rss <= 0.0:
        return np.nan
    return beta / np.sqrt(rss / dof * a11 * inv)


@njit(cache=True, error_model="numpy")
def _bsadf_k1(y, min_window, intercept):
    T = y.shape[0]
    yc = y - np.mean(y)
    out = np.full(T, np.nan)
    min_rows = min_window - 2
    for r2 in range(min_window - 1, T):
        s0 = s1 = s00 = s01 = s11 = sy = syy = s0y = s1y = 0.0
        best = -np.inf
        n = 0
        for t in range(r2, 1, -1):
            z0 = yc[t - 1]
            z1 = yc[t - 1] - yc[t - 2]
            d = yc[t] - yc[t - 1]
            s0 += z0
            s1 += z1
            s00 += z0 * z0
            s01 += z0 * z1
            s11 += z1 * z1
            sy += d
            syy += d * d
            s0y += z0 * d
            s1y += z1 * d
            n += 1
            if n < min_rows:
                continue
            if intercept:
                inv_n = 1.0 / n
                stat = _t_from_moments2(
                    s00 - s0 * s0 * inv_n, s01 - s0 * s1 * inv_n,
                    s11 - s1 * s1 * inv_n, s0y - s0 * sy * inv_n,
                    s1y - s1 * sy * inv_n, syy - sy * sy * inv_n, n - 3)
            else:
                stat = _t_from_moments2(s00, s01, s11, s0y, s1y, syy, n - 2)
            if stat > best:
                best = stat
        if best > -np.inf:
            out[r2] = best
    return out


@njit(cache=True, error_model="numpy")
def _bsadf_k0(y, min_window, intercept):
    T = y.shape[0]
    yc = y - np.mean(y)
    out = np.full(T, np.nan)
    min_rows = min_window - 1
    for r2 in range(min_window - 1, T):
        s0 = s00 = sy = syy = s0y = 0.0
        best = -np.inf
        n = 0
        for t in range(r2, 0, -1):
            z0 = yc[t - 1]
            d = yc[t] - z0
            s0 += z0
            s00 += z0 * z0
            sy += d
            syy += d * d
            s0y += z0 * d
            n += 1
            if n < min_rows:
                continue
            if intercept:
                inv_n = 1.0 / n
                a00 = s00 - s0 * s0 * inv_n
                b0 = s0y - s0 * sy * inv_n
                cyy = syy - sy * sy * inv_n
                dof = n - 2
            else:
                a00 = s00
                b0 = s0y
                cyy = syy
                dof = n - 1
            if dof <= 0 or a00 <= 1e-300:
                continue
            beta = b0 / a00
            rss = cyy - beta * b0
            if rss < 1e-15 * cyy:
                rss = 1e-15 * cyy
            if rss <= 0.0:
                continue
            stat = beta / np.sqrt(rss / dof / a00)
            if stat > best:
                best = stat
        if best > -np.inf:
            out[r2] = best
    return out


def bsadf_sequence(y, K, min_window, intercept=True):
    """BSADF(r2) for every end index r2 of ``y`` (NaN where undefined).

    Window [r1, r2] holds y[r1..r2] and its ADF regression uses rows
    t = r1+K+1..r2; admissible windows have r2 - r1 + 1 >= min_window.
    """
    y = np.ascontiguousarray(y, dtype=np.float64)
    if K == 0:
        return _bsadf_k0(y, int(min_window), bool(intercept))
    if K == 1:
        return _bsadf_k1(y, int(min_window), bool(intercept))
    return _bsadf_generic(y, int(K), int(min_window), bool(intercept))
