from dataclasses import replace

import numpy as np
import pytest

from techbubble.adjust import (ROBUSTNESS_HEADER, AdjustmentPlan, RobustnessRow, adjust_series,
                               lag_covariates, lagged_covariates, leave_one_out, placebo_window,
                               robustness_to_csv, run_decomposition, stability_to_csv,
                               sweep_training_windows)
from techbubble.dgp import BubbleSpec, PresentValueModel, TechShockProfile, simulate_economy
from techbubble.errors import AlignmentError, ConfigError, DegenerateInputError
from techbubble.timeseries import Frame, RngStream, TimeSeries, detrend_linear

PLAN = AdjustmentPlan((1, 120), (121, 240), cv_reps=2000, cv_seed=5)


def _synthetic(seed: int, bubble: bool = False, T: int = 240):
    g = RngStream(21, seed).generator()
    x1 = np.cumsum(0.02 + 0.1 * g.standard_normal(T))
    x2 = np.cumsum(0.01 + 0.1 * g.standard_normal(T))
    p = 1.0 + 0.8 * x1 + 0.5 * x2 + 0.05 * g.standard_normal(T)
    if bubble:
        b = np.zeros(T)
        for i in range(170, T):
            b[i] = 1.04 * b[i - 1] + 0.3 * (i == 170) + 0.02 * g.standard_normal()
        p = p + b
    return TimeSeries(p, 1, "p"), Frame({"x1": x1, "x2": x2}, 1)


def test_plan_validation():
    with pytest.raises(ConfigError):
        AdjustmentPlan((1, 50), (51, 100))
    with pytest.raises(ConfigError):
        AdjustmentPlan((1, 100), (90, 120))
    with pytest.raises(ConfigError):
        AdjustmentPlan((1, 100), (101, 120), estimator="fmols")
    assert PLAN.span == (1, 240)


def test_adjusted_size():
    rejects = sum(run_decomposition(*_synthetic(s), PLAN).adjusted_test.rejects(0.05)
                  for s in range(200))
    assert rejects / 200 <= 0.10


def test_adjusted_power():
    rejects = sum(run_decomposition(*_synthetic(s, True), PLAN).adjusted_test.rejects(0.05)
                  for s in range(200))
    assert rejects / 200 >= 0.90


def test_decomposition_identity_and_span():
    p, X = _synthetic(0)
    d = run_decomposition(p, X, PLAN)
    assert d.span == (1, 240)
    assert np.allclose(d.gap.values + d.counterfactual.values, p.values)
    assert d.unadjusted_test.T == 240
    # the fit only sees the training period
    assert d.fit.nobs == 120 - 3


def test_test_span_truncates_at_last_complete_row():
    p, X = _synthetic(1)
    d = run_decomposition(p, X.window(1, 230), PLAN)
    assert d.span == (1, 230) and len(d.gap) == 230
    with pytest.raises(AlignmentError):
        run_decomposition(p, X.window(50, 240), PLAN)


def test_first_difference_estimator():
    p, X = _synthetic(2)
    d = run_decomposition(p, X, replace(PLAN, estimator="first_difference"))
    # anchored at the end of training
    assert d.counterfactual.at(120) == pytest.approx(p.at(120))


def test_lagged_covariates_shift():
    X = Frame({"a": np.arange(10.0)}, 1)
    L = lag_covariates(X, 2)
    assert L["a"].at(5) == X["a"].at(3)
    assert lag_covariates(X, 0) is X
    p, Xs = _synthetic(3)
    rows = lagged_covariates(p, Xs, PLAN, [1, 3])
    assert [r.specification for r in rows] == ["lag h=1", "lag h=3"]
    d = run_decomposition(p, Xs, replace(PLAN, covariate_lag_h=3))
    assert d.span == (4, 240)
    assert d.fit.regression_residuals.start_index == 4 + 2


def test_oracle_adjustment_recovers_noise():
    m = PresentValueModel()
    for bubble in (None, BubbleSpec(150, 220, 0.3, 1.03, 0.05)):
        e = simulate_economy(TechShockProfile(), m, 300, bubble=bubble, stream=RngStream(8, 1))
        adj = adjust_series(e.price, "log_price", e.delta, e.pv_term)
        target = np.cumsum(e.innovations.values) + e.bubble.values
        assert np.allclose(detrend_linear(adj).values,
                           detrend_linear(TimeSeries(target, 1)).values, atol=1e-9)


def test_adjust_series_kinds():
    y = TimeSeries([1.0, 2.0, 3.0], 1)
    z = TimeSeries(np.zeros(3), 1)
    assert np.array_equal(adjust_series(y, "log_price", z, z).values, y.values)
    d = TimeSeries([0.1, 0.2, 0.0], 1)
    pv = TimeSeries([0.5, 0.25, 0.0], 1)
    assert np.allclose(adjust_series(y, "pd_ratio", d, pv).values, [0.5, 1.75, 3.0])
    assert np.allclose(adjust_series(y, "log_price", d, pv).values, [0.4, 1.45, 2.7])
    with pytest.raises(ConfigError):
        adjust_series(y, "returns", d, pv)
    with pytest.raises(AlignmentError):
        adjust_series(y, "pd_ratio", TimeSeries(np.zeros(3), 0), pv)


def test_leave_one_out_single_covariate():
    p, X = _synthetic(4)
    with pytest.raises(DegenerateInputError):
        leave_one_out(p, X.select(["x1"]), PLAN)


def test_omitting_the_ramp_covariate_raises_the_statistic():
    higher = 0
    for s in range(100):
        g = RngStream(22, s).generator()
        t = np.arange(240)
        x1 = np.cumsum(0.1 * g.standard_normal(240)) + 2e-4 * np.maximum(t - 120, 0) ** 2
        x2 = np.cumsum(0.1 * g.standard_normal(240))
        p = TimeSeries(1.0 + x1 + 0.05 * g.standard_normal(240), 1)
        rows = leave_one_out(p, Frame({"x1": x1, "x2": x2}, 1), PLAN)
        base, drop1 = rows[0].result.gsadf, rows[1].result.gsadf
        assert rows[1].specification == "drop x1"
        higher += drop1 > base
    assert higher / 100 >= 0.80


def test_training_window_stability():
    narrow = 0
    for s in range(50):
        p, X = _synthetic(s)
        rows = sweep_training_windows(p, X, PLAN, range(110, 131))
        g = [r.gsadf for r in rows]
        narrow += max(g) - min(g) < 1.0
    assert narrow / 50 >= 0.90


def test_single_window_sweep_equals_baseline():
    p, X = _synthetic(5)
    rows = sweep_training_windows(p, X, PLAN, [120])
    base = run_decomposition(p, X, PLAN)
    assert len(rows) == 1
    assert rows[0].gsadf == base.adjusted_test.gsadf
    assert rows[0].coefficients["x1"] == pytest.approx(base.fit.coef("x1"))


def test_placebo_size_and_power():
    quiet = loud = 0
    for s in range(200):
        quiet += not placebo_window(*_synthetic(s), PLAN, (20, 100)).rejects(0.05)
        loud += placebo_window(*_synthetic(s, True), PLAN, (150, 240)).rejects(0.05)
    assert quiet / 200 >= 0.95
    assert loud / 200 >= 0.90


def test_tables(tmp_path):
    p, X = _synthetic(6)
    d = run_decomposition(p, X, PLAN)
    robustness_to_csv([RobustnessRow("adjusted", d.adjusted_test)], tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].split(",") == ROBUSTNESS_HEADER
    assert lines[1].startswith("adjusted,")
    stability_to_csv(sweep_training_windows(p, X, PLAN, [119, 120]), tmp_path / "s.csv")
    head = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert head == "end_index,GSADF,CV05,R2,const,x1,x2"


def test_inflating_evaluation_covariates_shrinks_the_gap():
    p, X = _synthetic(7)
    X = Frame({n: X[n].values + 10.0 for n in X.names}, 1)
    base = run_decomposition(p, X, PLAN)
    assert all(base.fit.coef(n) > 0 for n in X.names)
    factor = np.where(X.index >= 121, 1.05, 1.0)
    up = run_decomposition(p, Frame({n: X[n].values * factor for n in X.names}, 1), PLAN)
    assert np.array_equal(up.fit.coefficients, base.fit.coefficients)
    assert np.all(up.gap.values <= base.gap.values + 1e-12)
    assert np.all(up.gap.window(121, 240).values < base.gap.window(121, 240).values)


@pytest.mark.parametrize("h", [1, 2, 4])
def test_lag_plan_equals_pre_shifted_covariates(h):
    p, X = _synthetic(8)
    via_plan = run_decomposition(p, X, replace(PLAN, covariate_lag_h=h))
    start = 1 + h
    plan = replace(PLAN, training=(start, 120))
    pre = run_decomposition(p, lag_covariates(X, h), plan)
    assert via_plan.span == pre.span
    assert np.array_equal(via_plan.gap.values, pre.gap.values)
    assert via_plan.adjusted_test.gsadf == pre.adjusted_test.gsadf
