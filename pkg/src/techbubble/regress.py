"""OLS, Newey-West covariance and the windowed ADF regression."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .errors import (DegenerateInputError, InvalidBandwidthError,
                     SingularDesignError, WindowTooShortError)
from .timeseries import TimeSeries

COND_LIMIT = 1e12


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    residuals: np.ndarray
    stderr_classical: np.ndarray
    r_squared: float
    nobs: int
    fitted: np.ndarray | None = None
    names: tuple = ()
    stderr_hac: np.ndarray | None = None
    sigma2: float = float("nan")

    @property
    def df_resid(self) -> int:
        return self.nobs - len(self.coefficients)

    def with_hac(self, se: np.ndarray) -> "OlsFit":
        return OlsFit(self.coefficients, self.residuals, self.stderr_classical, self.r_squared,
                      self.nobs, self.fitted, self.names, np.asarray(se), self.sigma2)


def _has_constant(X: np.ndarray) -> bool:
    return bool(np.any(np.all(X == X[0:1, :], axis=0) & (X[0] != 0)))


def check_rank(X: np.ndarray, names: Sequence[str] | None = None) -> None:
    """Raise ``SingularDesignError`` if ``X`` is rank deficient or ill-conditioned.

    Columns are scaled to unit norm first so the check ignores units. The
    offending columns are those pivoted QR places beyond the numerical rank.
    """
    n, k = X.shape
    names = list(names) if names is not None else [f"x{j}" for j in range(k)]
    norms = np.linalg.norm(X, axis=0)
    zero = [names[j] for j in range(k) if norms[j] == 0.0]
    if zero:
        raise SingularDesignError(f"design has all-zero column(s) {zero}", zero)
    Xs = X / norms
    sv = np.linalg.svd(Xs, compute_uv=False)
    if sv[-1] == 0.0 or sv[0] / sv[-1] > COND_LIMIT:
        _, R, piv = linalg.qr(Xs, mode="economic", pivoting=True)
        d = np.abs(np.diag(R))
        rank = min(int(np.sum(d > d[0] / COND_LIMIT)), k - 1)
        bad = [names[j] for j in piv[rank:]]
        raise SingularDesignError(f"design is singular or ill-conditioned; offending column(s) {bad}", bad)


def ols(y, X, names: Sequence[str] | None = None) -> OlsFit:
    """Least squares via pivoted QR with classical standard errors.

    Parameters
    ----------
    y : array_like, shape (n,)
    X : array_like, shape (n, k)
        Design matrix. Include a column of ones for an intercept.
    names : sequence of str, optional
        Column labels used in error messages and downstream tables.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, k = X.shape
    if n != y.shape[0]:
        raise DegenerateInputError(f"design has {n} rows but y has {y.shape[0]}")
    if n <= k:
        raise DegenerateInputError(f"need more rows than columns, got {n} x {k}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DegenerateInputError("non-finite values in regression inputs")
    check_rank(X, names)
    Q, R = linalg.qr(X, mode="economic")
    beta = linalg.solve_triangular(R, Q.T @ y)
    resid = y - X @ beta
    rss = float(resid @ resid)
    sigma2 = rss / (n - k)
    Rinv = linalg.solve_triangular(R, np.eye(k))
    se = np.sqrt(sigma2 * np.sum(Rinv * Rinv, axis=1))
    tss = float(np.sum((y - y.mean()) ** 2)) if _has_constant(X) else float(y @ y)
    r2 = 1.0 - rss / tss if tss > 0 else 1.0
    return OlsFit(beta, resid, se, float(min(max(r2, 0.0), 1.0)), n, y - resid,
                  tuple(names) if names is not None else (), None, sigma2)


def newey_west_se(fit: OlsFit, X, bandwidth: int) -> np.ndarray:
    """Newey-West HAC standard errors with Bartlett weights ``1 - j/(bandwidth+1)``.

    No small-sample degrees-of-freedom correction is applied, so bandwidth 0
    gives White's heteroskedasticity-robust errors.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    bandwidth = int(bandwidth)
    if bandwidth < 0 or bandwidth >= fit.nobs:
        raise InvalidBandwidthError(f"bandwidth must lie in [0, {fit.nobs - 1}], got {bandwidth}")
    scores = X * fit.residuals[:, None]
    S = scores.T @ scores
    for j in range(1, bandwidth + 1):
        w = 1.0 - j / (bandwidth + 1.0)
        G = scores[j:].T @ scores[:-j]
        S += w * (G + G.T)
    bread = np.linalg.inv(X.T @ X)
    V = bread @ S @ bread
    return np.sqrt(np.maximum(np.diag(V), 0.0))


def long_run_variance(u, bandwidth: int) -> float:
    """Bartlett-kernel long-run variance of a scalar series."""
    u = np.asarray(u, dtype=np.float64)
    n = u.shape[0]
    if bandwidth < 0 or bandwidth >= n:
        raise InvalidBandwidthError(f"bandwidth must lie in [0, {n - 1}], got {bandwidth}")
    lrv = float(u @ u) / n
    for j in range(1, bandwidth + 1):
        lrv += 2.0 * (1.0 - j / (bandwidth + 1.0)) * float(u[j:] @ u[:-j]) / n
    return lrv


@dataclass(frozen=True)
class AdfResult:
    beta_hat: float
    t_stat: float
    lag_order: int
    window: tuple[int, int]
    nobs: int = 0


def adf_design(values: np.ndarray, K: int, intercept: bool = True):
    """Response and regressors of the ADF regression on one window.

    Rows are t = K+1 .. n-1 (0-based within the window). Columns are the
    optional intercept, the lagged level and ``K`` lagged differences.
    """
    dy = np.diff(values)
    n = values.shape[0]
    rows = np.arange(K + 1, n)
    cols = []
    names = []
    if intercept:
        cols.append(np.ones(rows.shape[0]))
        names.append("const")
    cols.append(values[rows - 1])
    names.append("y_lag")
    for k in range(1, K + 1):
        cols.append(dy[rows - 1 - k])
        names.append(f"dy_lag{k}")
    return dy[rows - 1], np.column_stack(cols), names


def _unit_se(X: np.ndarray, j: int) -> float:
    return float(np.sqrt(np.linalg.inv(X.T @ X)[j, j]))


def min_adf_window(K: int) -> int:
    """Shortest window that leaves at least one residual degree of freedom."""
    return 2 * int(K) + 4


def adf_t_stat(y: TimeSeries, r1: int, r2: int, K: int, intercept: bool = True) -> AdfResult:
    """Right-tailed ADF t-statistic on the window of times ``[r1, r2]``.

    The regression uses only observations inside the window, with classical
    standard errors. ``r1`` and ``r2`` are time indices of ``y``.
    """
    K = int(K)
    if K < 0:
        raise WindowTooShortError(f"lag order must be non-negative, got {K}")
    length = r2 - r1 + 1
    if length < min_adf_window(K):
        raise WindowTooShortError(
            f"window [{r1}, {r2}] has {length} observations; K={K} needs {min_adf_window(K)}")
    vals = y.window(r1, r2).values
    resp, X, names = adf_design(vals, K, intercept)
    lag = X[:, 1 if intercept else 0]
    if np.ptp(lag) == 0.0 and intercept:
        raise SingularDesignError("lagged level has zero variance in the window", ["y_lag"])
    fit = ols(resp, X, names)
    j = 1 if intercept else 0
    beta = float(fit.coefficients[j])
    # an exact fit would give a zero standard error; floor the residual
    # variance relative to the response variation as the compiled sweep does
    scale = float(np.sum((resp - resp.mean()) ** 2)) if intercept else float(resp @ resp)
    rss = max(float(fit.residuals @ fit.residuals), 1e-15 * scale)
    se = np.sqrt(rss / fit.df_resid) * _unit_se(X, j)
    if not se > 0:
        raise SingularDesignError("zero standard error on the lagged level", ["y_lag"])
    return AdfResult(beta, beta / se, K, (int(r1), int(r2)), fit.nobs)
