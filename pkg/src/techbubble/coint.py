"""Cointegrating regressions and identification diagnostics."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConfigError, DegenerateInputError, SampleTooShortError, SingularDesignError
from .regress import AdfResult, adf_t_stat, long_run_variance, newey_west_se, ols
from .timeseries import Frame, RngStream, TimeSeries, common_span

# MacKinnon (2010) response surfaces for residual-based tests with a constant,
# keyed by the number of variables in the cointegrating regression. Each row is
# (asymptotic, 1/T, 1/T^2, 1/T^3) for the 1%, 5% and 10% levels.
MACKINNON_C = {
    1: ((-3.43035, -6.5393, -16.786, -79.433), (-2.86154, -2.8903, -4.234, -40.04),
        (-2.56677, -1.5384, -2.809, 0.0)),
    2: ((-3.89644, -10.9519, -33.527, 0.0), (-3.33613, -6.1101, -6.823, 0.0),
        (-3.04445, -4.2412, -2.72, 0.0)),
    3: ((-4.29374, -14.4354, -33.195, 47.433), (-3.74066, -8.5632, -10.852, 27.982),
        (-3.45218, -6.2143, -3.718, 0.0)),
    4: ((-4.64332, -18.1031, -37.972, 0.0), (-4.096, -11.2349, -11.175, 0.0),
        (-3.8102, -8.3931, -4.137, 0.0)),
    5: ((-4.95756, -21.8883, -45.142, 0.0), (-4.41519, -14.0405, -12.575, 0.0),
        (-4.13157, -10.7417, -3.784, 0.0)),
    6: ((-5.24568, -25.6688, -57.737, 88.639), (-4.70693, -16.9178, -17.492, 60.007),
        (-4.42501, -13.1875, -5.104, 27.877)),
}
EG_LEVELS = (0.01, 0.05, 0.10)
# flat 1% threshold quoted for the AI-era residual test
FLAT_CV = -2.58

# Upper-tail quantiles of L_c by number of I(1) regressors m, at the tail
# probabilities below. Simulated with scripts/hansen_table.py (n=1000, 20000
# draws); the 5% and 1% entries for m=3 and m=4 are the published values.
HANSEN_PROBS = (0.20, 0.10, 0.05, 0.025, 0.01, 0.001)
HANSEN_LC_TABLE = {
    1: (0.327, 0.440, 0.563, 0.698, 0.891, 1.431),
    2: (0.428, 0.559, 0.698, 0.841, 1.048, 1.607),
    3: (0.524, 0.674, 0.788, 0.978, 1.160, 1.775),
    4: (0.630, 0.788, 0.884, 1.109, 1.278, 1.845),
    5: (0.725, 0.899, 1.069, 1.232, 1.444, 2.006),
}


@dataclass(frozen=True)
class CointFit:
    """Level coefficients of a cointegrating regression with HAC inference.

    ``residuals`` is ``p - (intercept + beta'X)`` over the whole span of the
    inputs; ``regression_residuals`` are the residuals of the augmented
    regression on its trimmed sample.
    """

    names: tuple
    coefficients: np.ndarray
    hac_se: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r_squared: float
    adj_r_squared: float
    residuals: TimeSeries
    regression_residuals: TimeSeries
    q_leads_lags: int
    nw_bandwidth: int
    nobs: int
    covariates: tuple = ()

    @property
    def intercept(self) -> float:
        return float(self.coefficients[0])

    @property
    def beta(self) -> np.ndarray:
        return self.coefficients[1:]

    def coef(self, name: str) -> float:
        return float(self.coefficients[self.names.index(name)])

    def level_fit(self, X: Frame) -> TimeSeries:
        """Intercept plus ``beta'X_t`` over the span of ``X``."""
        M = X.matrix(self.covariates)
        return TimeSeries(self.intercept + M @ self.beta, X.start_index, "fitted")


def _align(p: TimeSeries, X: Frame) -> tuple[TimeSeries, Frame]:
    a, b = common_span(p, X)
    return p.window(a, b), X.window(a, b)


def dols_fit(p: TimeSeries, X: Frame, q: int = 1, nw_bandwidth: int = 4) -> CointFit:
    """Dynamic OLS of ``p`` on ``[1, X_t, dX_{t-q}, ..., dX_{t+q}]``.

    Level coefficients get Newey-West errors and normal p-values. The sample
    is the common span of ``p`` and ``X`` trimmed by ``q + 1`` at the start
    and ``q`` at the end.
    """
    if q < 0:
        raise ConfigError("q must be non-negative")
    p, X = _align(p, X)
    names = X.names
    if not names:
        raise DegenerateInputError("no covariates supplied")
    Xm = X.matrix()
    n_all, k = Xm.shape
    dX = np.diff(Xm, axis=0)  # dX[i] = X[i+1] - X[i]
    rows = np.arange(q + 1, n_all - q)
    if len(rows) <= 1 + k * (2 * q + 2):
        raise SampleTooShortError(f"{n_all} observations are too few for q={q} with {k} covariates")
    cols = [np.ones(len(rows)), *(Xm[rows, j] for j in range(k))]
    cnames = ["const", *names]
    for j in range(-q, q + 1):
        # dX_{t-j} = X_{t-j} - X_{t-j-1}
        for c in range(k):
            cols.append(dX[rows - j - 1, c])
            cnames.append(f"d{names[c]}[{-j:+d}]")
    D = np.column_stack(cols)
    y = p.values[rows]
    fit = ols(y, D, cnames)
    se = newey_west_se(fit, D, nw_bandwidth)
    lv = slice(0, k + 1)
    coefs = fit.coefficients[lv]
    tstat = coefs / se[lv]
    pval = 2.0 * stats.norm.sf(np.abs(tstat))
    n, kk = D.shape
    adj = 1.0 - (1.0 - fit.r_squared) * (n - 1) / (n - kk)
    level = coefs[0] + Xm @ coefs[1:]
    return CointFit(tuple(cnames[:k + 1]), coefs, se[lv], tstat, pval, fit.r_squared, adj,
                    p.with_values(p.values - level, "residual"),
                    TimeSeries(fit.residuals, p.start_index + q + 1, "dols_residual"),
                    int(q), int(nw_bandwidth), n, tuple(names))


@dataclass(frozen=True)
class FirstDifferenceFit:
    names: tuple
    coefficients: np.ndarray
    se: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    r_squared: float
    residuals: TimeSeries
    anchor_index: int
    anchor_value: float
    covariates: tuple = ()

    def counterfactual(self, X: Frame, anchor_index: int | None = None,
                       anchor_value: float | None = None) -> TimeSeries:
        """``p_{T0} + sum_{s=T0+1}^{t} alpha'dX_s``, cumulated both ways from the anchor."""
        t0 = self.anchor_index if anchor_index is None else int(anchor_index)
        v0 = self.anchor_value if anchor_value is None else float(anchor_value)
        M = X.matrix(self.covariates)
        inc = np.concatenate([[0.0], np.diff(M, axis=0) @ self.coefficients])
        cum = np.cumsum(inc)
        pos = t0 - X.start_index
        if not 0 <= pos < len(X):
            raise DegenerateInputError(f"anchor {t0} outside the covariate span")
        return TimeSeries(v0 + cum - cum[pos], X.start_index, "fitted")

    def level_fit(self, X: Frame) -> TimeSeries:
        return self.counterfactual(X)


def first_difference_fit(p: TimeSeries, X: Frame) -> FirstDifferenceFit:
    """OLS of ``dp`` on ``dX`` without intercept, anchored at the last observation."""
    p, X = _align(p, X)
    dy = np.diff(p.values)
    dX = np.diff(X.matrix(), axis=0)
    names = [f"d{n}" for n in X.names]
    # a constant increment is a pure drift, not a covariate loading
    flat = [names[j] for j in range(dX.shape[1]) if np.ptp(dX[:, j]) == 0.0]
    if flat:
        raise SingularDesignError(f"constant first difference in column(s) {flat}", flat)
    fit = ols(dy, dX, names)
    t = fit.coefficients / fit.stderr_classical
    pv = 2.0 * stats.t.sf(np.abs(t), fit.df_resid)
    return FirstDifferenceFit(tuple(names), fit.coefficients, fit.stderr_classical, t, pv,
                              fit.r_squared, TimeSeries(fit.residuals, p.start_index + 1, "dresid"),
                              p.end_index, float(p.values[-1]), tuple(X.names))


# -- residual test -----------------------------------------------------------

def mackinnon_cv(n_vars: int, nobs: int, level: float) -> float:
    if n_vars not in MACKINNON_C:
        raise ConfigError(f"critical values tabulated for 1..6 variables, got {n_vars}")
    b = MACKINNON_C[n_vars][EG_LEVELS.index(level)]
    x = 1.0 / nobs
    return b[0] + b[1] * x + b[2] * x * x + b[3] * x ** 3


@dataclass(frozen=True)
class EngleGrangerResult:
    adf: AdfResult
    critical_values: dict
    reject: dict
    flat_cv: float
    reject_flat_cv: bool
    n_vars: int


def engle_granger(residuals: TimeSeries, K: int = 1, n_regressors: int = 1) -> EngleGrangerResult:
    """Left-tailed ADF on cointegrating residuals, without intercept.

    Reports rejection against MacKinnon response-surface values for
    ``n_regressors + 1`` variables and, separately, against the flat -2.58
    threshold.
    """
    adf = adf_t_stat(residuals, residuals.start_index, residuals.end_index, K, intercept=False)
    n_vars = int(n_regressors) + 1
    cvs = {a: mackinnon_cv(n_vars, adf.nobs, a) for a in EG_LEVELS}
    return EngleGrangerResult(adf, cvs, {a: adf.t_stat < cvs[a] for a in EG_LEVELS},
                              FLAT_CV, adf.t_stat < FLAT_CV, n_vars)


# -- parameter stability -----------------------------------------------------

@dataclass(frozen=True)
class HansenResult:
    lc: float
    p_value: float
    p_text: str
    cv_5: float
    cv_1: float
    m: int


def hansen_p_value(lc: float, m: int) -> tuple[float, str]:
    """Piecewise-linear interpolation of the tail probability in the embedded table."""
    if m not in HANSEN_LC_TABLE:
        raise ConfigError(f"L_c table covers 1..5 regressors, got {m}")
    q = np.array(HANSEN_LC_TABLE[m])
    pr = np.array(HANSEN_PROBS)
    if lc <= q[0]:
        return float(pr[0]), f"p > {pr[0]:.2f}"
    if lc >= q[-1]:
        return float(pr[-1]), f"p < {pr[-1]:.3f}"
    p = float(np.interp(lc, q, pr))
    return p, f"p = {p:.3f}"


def hansen_lc(p: TimeSeries, X: Frame, q: int = 1, nw_bandwidth: int = 4) -> HansenResult:
    """Hansen's L_c from the cumulated level scores of the DOLS regression."""
    fit = dols_fit(p, X, q, nw_bandwidth)
    u = fit.regression_residuals
    Xw = X.window(u.start_index, u.end_index).matrix(fit.covariates)
    Z = np.column_stack([np.ones(len(u)), Xw])
    e = u.values
    S = np.cumsum(Z * e[:, None], axis=0)
    M = Z.T @ Z
    n = len(e)
    omega2 = long_run_variance(e, nw_bandwidth)
    lc = float(np.trace(np.linalg.solve(M, S.T @ S)) / (n * omega2))
    m = Xw.shape[1]
    pval, txt = hansen_p_value(lc, m)
    row = HANSEN_LC_TABLE[m]
    return HansenResult(lc, pval, txt, row[HANSEN_PROBS.index(0.05)], row[HANSEN_PROBS.index(0.01)], m)


# -- Granger causality -------------------------------------------------------

@dataclass(frozen=True)
class GrangerResult:
    f_stat: float
    p_standard: float
    p_bootstrap: float
    lag_order: int
    direction: tuple
    nobs: int


def _lag_design(x: np.ndarray, y: np.ndarray, L: int, start: int):
    n = len(y)
    rows = np.arange(start, n)
    own = [y[rows - j] for j in range(1, L + 1)]
    cross = [x[rows - j] for j in range(1, L + 1)]
    Xr = np.column_stack([np.ones(len(rows)), *own])
    Xu = np.column_stack([Xr, *cross])
    return y[rows], Xr, Xu


def _f_stat(y, Xr, Xu, L) -> float:
    br, *_ = np.linalg.lstsq(Xr, y, rcond=None)
    bu, *_ = np.linalg.lstsq(Xu, y, rcond=None)
    rr = y - Xr @ br
    ru = y - Xu @ bu
    rss_r, rss_u = rr @ rr, ru @ ru
    dof = len(y) - Xu.shape[1]
    return float(((rss_r - rss_u) / L) / (rss_u / dof))


def log_growth(s: TimeSeries) -> TimeSeries:
    """First differences, the growth rate of a log-level series."""
    return TimeSeries(np.diff(s.values), s.start_index + 1, s.label)


def granger_test(x: TimeSeries, y: TimeSeries, max_lag: int = 4, n_boot: int = 2000,
                 stream: RngStream = RngStream(0)) -> GrangerResult:
    """Does ``x`` Granger-cause ``y``?

    The lag is chosen by BIC of the unrestricted regression, comparing all
    candidates on the common sample after ``max_lag`` initial observations.
    The bootstrap keeps the regressors fixed and flips the signs of the
    restricted-model residuals with Rademacher weights; its p-value is
    ``(1 + #{F* >= F}) / (B + 1)``.
    """
    if max_lag < 1:
        raise ConfigError("max_lag must be at least 1")
    a, b = common_span(x, y)
    xv, yv = x.window(a, b).values, y.window(a, b).values
    n_eff = len(yv) - max_lag
    if n_eff <= 2 * max_lag + 2:
        raise SampleTooShortError(f"{len(yv)} observations are too few for max_lag={max_lag}")
    best, best_bic = 1, np.inf
    for L in range(1, max_lag + 1):
        yy, _, Xu = _lag_design(xv, yv, L, max_lag)
        bu, *_ = np.linalg.lstsq(Xu, yy, rcond=None)
        r = yy - Xu @ bu
        bic = len(yy) * np.log(r @ r / len(yy)) + Xu.shape[1] * np.log(len(yy))
        if bic < best_bic - 1e-12:
            best, best_bic = L, bic
    L = best
    yy, Xr, Xu = _lag_design(xv, yv, L, L)
    F = _f_stat(yy, Xr, Xu, L)
    dof = len(yy) - Xu.shape[1]
    p_std = float(stats.f.sf(F, L, dof))
    br, *_ = np.linalg.lstsq(Xr, yy, rcond=None)
    fitted = Xr @ br
    resid = yy - fitted
    count = 0
    if n_boot > 0:
        gen = stream.generator()
        W = gen.integers(0, 2, size=(n_boot, len(yy))) * 2.0 - 1.0
        Pr = Xr @ np.linalg.pinv(Xr)
        Pu = Xu @ np.linalg.pinv(Xu)
        for w in W:
            ys = fitted + resid * w
            er = ys - Pr @ ys
            eu = ys - Pu @ ys
            Fs = ((er @ er - eu @ eu) / L) / (eu @ eu / dof)
            count += Fs >= F
    p_boot = (1.0 + count) / (n_boot + 1.0)
    return GrangerResult(F, p_std, float(p_boot), L, (x.label, y.label), len(yy))


# -- principal components ----------------------------------------------------

@dataclass(frozen=True)
class PcaResult:
    loadings: np.ndarray
    variance_explained: np.ndarray
    scores: Frame
    eigenvalues: np.ndarray
    columns: tuple


def pca(gaps: Frame, standardize: bool = False) -> PcaResult:
    """Principal components of the column-demeaned covariance (or correlation) matrix.

    Each loading row is signed so its largest-magnitude entry is positive.
    """
    M = gaps.matrix()
    n, k = M.shape
    if k < 2 or n < k + 1:
        raise DegenerateInputError(f"need at least 2 columns and {k + 1} rows, got {n} x {k}")
    Z = M - M.mean(axis=0)
    if standardize:
        sd = Z.std(axis=0, ddof=1)
        if np.any(sd == 0):
            raise DegenerateInputError("a column has zero variance")
        Z = Z / sd
    C = Z.T @ Z / (n - 1)
    if np.trace(C) <= 0:
        raise DegenerateInputError("covariance matrix is zero")
    w, V = np.linalg.eigh(C)
    order = np.argsort(w)[::-1]
    w = np.clip(w[order], 0.0, None)
    L = V[:, order].T
    for i in range(k):
        j = np.argmax(np.abs(L[i]))
        if L[i, j] < 0:
            L[i] = -L[i]
    scores = Z @ L.T
    sf = Frame({f"PC{i + 1}": scores[:, i] for i in range(k)}, gaps.start_index)
    return PcaResult(L, w / w.sum(), sf, w, tuple(gaps.names))


# -- tables ------------------------------------------------------------------

def fit_to_csv(fit, path) -> None:
    """Write (variable, coef, se, t, p) rows followed by fit statistics."""
    se = fit.hac_se if isinstance(fit, CointFit) else fit.se
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["variable", "coef", "se", "t", "p"])
        for i, name in enumerate(fit.names):
            w.writerow([name, f"{fit.coefficients[i]:.6f}", f"{se[i]:.6f}",
                        f"{fit.t_stats[i]:.4f}", f"{fit.p_values[i]:.4f}"])
        w.writerow(["R2", f"{fit.r_squared:.6f}", "", "", ""])
        if isinstance(fit, CointFit):
            w.writerow(["adj_R2", f"{fit.adj_r_squared:.6f}", "", "", ""])
            w.writerow(["N", fit.nobs, "", "", ""])
