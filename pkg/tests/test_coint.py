import numpy as np
import pytest
from statsmodels.tsa.adfvalues import mackinnoncrit

from techbubble.coint import (HANSEN_LC_TABLE, HANSEN_PROBS, dols_fit, engle_granger,
                              first_difference_fit, fit_to_csv, granger_test, hansen_lc,
                              hansen_p_value, log_growth, mackinnon_cv, pca)
from techbubble.errors import ConfigError, DegenerateInputError, SingularDesignError
from techbubble.timeseries import Frame, RngStream, TimeSeries


def _ar1(g, n, phi=0.5):
    e = g.standard_normal(n)
    u = np.zeros(n)
    for i in range(1, n):
        u[i] = phi * u[i - 1] + e[i]
    return u


def _cointegrated(seed: int, n: int = 400, beta=0.5):
    g = RngStream(11, seed).generator()
    x = np.cumsum(g.standard_normal(n))
    b = np.broadcast_to(beta, (n,))
    return TimeSeries(1.0 + b * x + _ar1(g, n), 0, "p"), Frame({"x": x}, 0), g


def test_dols_coverage():
    hits = 0
    for s in range(200):
        p, X, _ = _cointegrated(s)
        f = dols_fit(p, X)
        hits += abs(f.coef("x") - 0.5) <= 3 * f.hac_se[1]
    assert hits / 200 >= 0.95


def test_dols_layout_and_residuals():
    p, X, _ = _cointegrated(0, n=120)
    f = dols_fit(p, X, q=2, nw_bandwidth=3)
    assert f.names == ("const", "x")
    assert f.nobs == 120 - 2 * 2 - 1
    assert f.regression_residuals.start_index == 3
    # level residuals cover the whole input span
    assert len(f.residuals) == 120
    assert np.allclose(f.residuals.values, p.values - f.level_fit(X).values)
    assert 0 < f.adj_r_squared < f.r_squared < 1


def test_dols_duplicate_column_is_singular():
    p, X, _ = _cointegrated(1)
    X2 = Frame({"x": X["x"].values, "x_copy": X["x"].values}, 0)
    with pytest.raises(SingularDesignError):
        dols_fit(p, X2)


def test_first_difference_exact():
    x = np.cumsum(RngStream(2, 0).generator().standard_normal(50))
    p = TimeSeries(3.0 + 2.0 * x, 10)
    X = Frame({"x": x}, 10)
    f = first_difference_fit(p, X)
    assert f.coefficients[0] == pytest.approx(2.0, abs=1e-12)
    assert np.allclose(f.counterfactual(X).values, p.values, atol=1e-10)
    assert f.anchor_index == 59


def test_first_difference_null_coverage():
    hits = 0
    for s in range(200):
        g = RngStream(21, s).generator()
        X = Frame({"x": np.cumsum(g.standard_normal(200))})
        p = TimeSeries(np.cumsum(g.standard_normal(200)))
        f = first_difference_fit(p, X)
        hits += abs(f.coefficients[0]) <= 3 * f.se[0]
    assert hits / 200 >= 0.95


def test_first_difference_constant_increment_is_singular():
    X = Frame({"trend": np.arange(30.0)})
    with pytest.raises(SingularDesignError):
        first_difference_fit(TimeSeries(np.arange(30.0) ** 1.1), X)


@pytest.mark.parametrize("N", [1, 2, 3, 4, 5, 6])
@pytest.mark.parametrize("nobs", [50, 300])
def test_mackinnon_matches_statsmodels(N, nobs):
    ref = mackinnoncrit(N=N, regression="c", nobs=nobs)
    ours = [mackinnon_cv(N, nobs, a) for a in (0.01, 0.05, 0.10)]
    assert np.allclose(ours, ref, atol=1e-10)
    with pytest.raises(ConfigError):
        mackinnon_cv(7, 100, 0.05)


def test_engle_granger_power_and_flat_threshold():
    wn = rw = 0
    for s in range(200):
        g = RngStream(12, s).generator()
        wn += engle_granger(TimeSeries(g.standard_normal(300))).reject[0.05]
        rw += engle_granger(TimeSeries(np.cumsum(g.standard_normal(300)))).reject_flat_cv
    assert wn / 200 >= 0.90
    assert rw / 200 <= 0.15


def test_engle_granger_fields():
    r = engle_granger(TimeSeries(RngStream(1, 0).generator().standard_normal(200)), K=2,
                      n_regressors=3)
    assert r.n_vars == 4 and r.flat_cv == -2.58
    assert r.critical_values[0.01] < r.critical_values[0.05] < r.critical_values[0.10]


def test_hansen_table_monotone():
    for m, row in HANSEN_LC_TABLE.items():
        assert all(a < b for a, b in zip(row, row[1:]))
    assert HANSEN_LC_TABLE[3][HANSEN_PROBS.index(0.05)] == 0.788
    assert HANSEN_LC_TABLE[4][HANSEN_PROBS.index(0.01)] == 1.278


def test_hansen_p_value_interpolation():
    row = HANSEN_LC_TABLE[1]
    assert hansen_p_value(row[2], 1)[0] == pytest.approx(0.05)
    p, txt = hansen_p_value(0.01, 1)
    assert p == 0.20 and txt == "p > 0.20"
    assert hansen_p_value(10.0, 1)[1] == "p < 0.001"
    mid = hansen_p_value(0.5 * (row[2] + row[3]), 1)[0]
    assert 0.025 < mid < 0.05
    with pytest.raises(ConfigError):
        hansen_p_value(0.3, 6)


def test_hansen_size_and_power():
    size = power = 0
    for s in range(200):
        p, X, g = _cointegrated(s)
        size += hansen_lc(p, X).p_value < 0.05
        x = X["x"].values
        beta = np.where(np.arange(400) < 200, 0.5, 1.5)
        power += hansen_lc(TimeSeries(1.0 + beta * x + _ar1(g, 400)), X).p_value < 0.05
    assert size / 200 <= 0.12
    assert power / 200 >= 0.80


def test_granger_size_and_power():
    size = np.zeros(2)
    power = np.zeros(2)
    for s in range(200):
        g = RngStream(13, s).generator()
        x, y = g.standard_normal(150), g.standard_normal(150)
        r = granger_test(TimeSeries(x, 0, "x"), TimeSeries(y, 0, "y"), 4, 199, RngStream(14, s))
        size += [r.p_standard < 0.05, r.p_bootstrap < 0.05]
        y2 = np.concatenate([[0.0], 0.8 * x[:-1]]) + g.standard_normal(150)
        r = granger_test(TimeSeries(x, 0, "x"), TimeSeries(y2, 0, "y"), 4, 199, RngStream(14, s))
        power += [r.p_standard < 0.05, r.p_bootstrap < 0.05]
    assert np.all((size / 200 >= 0.01) & (size / 200 <= 0.10))
    assert np.all(power / 200 >= 0.90)


def test_granger_is_deterministic():
    g = RngStream(15, 0).generator()
    x = TimeSeries(g.standard_normal(120), 0, "x")
    y = TimeSeries(g.standard_normal(120), 0, "y")
    a = granger_test(x, y, 4, 99, RngStream(1, 0))
    b = granger_test(x, y, 4, 99, RngStream(1, 0))
    assert a == b
    assert a.direction == ("x", "y")
    with pytest.raises(ConfigError):
        granger_test(x, y, 0)


def test_granger_bootstrap_p_value_bounds():
    g = RngStream(16, 0).generator()
    x = TimeSeries(g.standard_normal(100), 0, "x")
    y = TimeSeries(g.standard_normal(100), 0, "y")
    r = granger_test(x, y, 2, 49, RngStream(2, 0))
    assert 1 / 50 <= r.p_bootstrap <= 1.0
    assert abs(r.p_bootstrap * 50 - round(r.p_bootstrap * 50)) < 1e-9


def test_log_growth():
    s = TimeSeries(np.log([1.0, 2.0, 4.0]), 5, "v")
    d = log_growth(s)
    assert d.start_index == 6 and np.allclose(d.values, np.log(2.0))


def test_pca_exact_covariance():
    g = RngStream(17, 0).generator()
    Z = g.standard_normal((500, 2))
    Z -= Z.mean(axis=0)
    W = np.linalg.cholesky(np.cov(Z, rowvar=False))
    Z = np.linalg.solve(W, Z.T).T  # sample covariance now the identity
    M = Z @ np.linalg.cholesky(np.array([[2.0, 1.0], [1.0, 2.0]])).T
    r = pca(Frame({"a": M[:, 0], "b": M[:, 1]}))
    assert np.allclose(r.variance_explained, [0.75, 0.25], atol=1e-12)
    assert np.allclose(r.eigenvalues, [3.0, 1.0], atol=1e-10)
    assert np.allclose(np.abs(r.loadings[0]), [1 / np.sqrt(2)] * 2)
    assert r.loadings[0].max() > 0


def test_pca_identical_columns():
    v = np.sin(np.arange(30.0))
    r = pca(Frame({"a": v, "b": v}))
    assert r.variance_explained[0] == pytest.approx(1.0)
    with pytest.raises(DegenerateInputError):
        pca(Frame({"a": v}))


def test_fit_csv(tmp_path):
    p, X, _ = _cointegrated(3, n=100)
    fit_to_csv(dols_fit(p, X), tmp_path / "fit.csv")
    lines = (tmp_path / "fit.csv").read_text().splitlines()
    assert lines[0] == "variable,coef,se,t,p"
    assert lines[1].startswith("const,") and lines[2].startswith("x,")
    assert lines[-1].startswith("N,")


def test_pca_shares_and_uncorrelated_scores():
    g = RngStream(18, 0).generator()
    Z = g.standard_normal((300, 4)) @ g.standard_normal((4, 4))
    r = pca(Frame({c: Z[:, i] for i, c in enumerate("abcd")}))
    assert r.variance_explained.sum() == pytest.approx(1.0, abs=1e-10)
    C = np.cov(r.scores.matrix(), rowvar=False)
    assert np.allclose(C - np.diag(np.diag(C)), 0.0, atol=1e-8)


def test_hansen_invariant_to_covariate_scale():
    p, X, g = _cointegrated(4, n=300)
    X2 = Frame({"x": X["x"].values, "z": np.cumsum(g.standard_normal(300))})
    base = hansen_lc(p, X2).lc
    assert hansen_lc(p, X2.scaled({"x": 3.0, "z": 0.2})).lc == pytest.approx(base, abs=1e-8)


def test_dols_regression_sample_reconstructs_price():
    p, X, _ = _cointegrated(5, n=150)
    q = 2
    f = dols_fit(p, X, q=q)
    x, y = X["x"].values, p.values
    t = np.arange(q + 1, 150 - q)
    D = np.column_stack([np.ones(len(t)), x[t]] + [x[t - j] - x[t - j - 1] for j in range(-q, q + 1)])
    b = np.linalg.lstsq(D, y[t], rcond=None)[0]
    u = f.regression_residuals
    assert np.allclose(f.coefficients, b[:2], atol=1e-9)
    assert np.allclose(D @ b + u.values, y[t], atol=1e-10)
