"""Fundamental-versus-speculative decomposition and its robustness sweeps."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .coint import CointFit, FirstDifferenceFit, dols_fit, first_difference_fit
from .errors import AlignmentError, ConfigError, DegenerateInputError
from .psy import (LEVELS, CriticalValueTable, ExplosiveTestResult, PsyConfig,
                  cached_critical_values, psy_test)
from .timeseries import Frame, TimeSeries, check_aligned

MIN_TRAINING = 60


@dataclass(frozen=True)
class AdjustmentPlan:
    """Training/evaluation split and test settings.

    ``test_span`` defaults to the training start through the evaluation end.
    ``covariate_lag_h`` replaces ``X_t`` by ``X_{t-h}`` in both periods; the
    first ``h`` rows of the training period and test span drop out.
    """

    training: tuple[int, int]
    evaluation: tuple[int, int]
    estimator: str = "dols"
    q: int = 1
    nw_bandwidth: int = 4
    covariate_lag_h: int = 0
    psy: PsyConfig = PsyConfig()
    cv_reps: int = 2000
    cv_seed: int = 0
    test_span: tuple[int, int] | None = None
    cv_cache: str | None = None
    workers: int = 1
    constant_cv: bool = False

    def __post_init__(self):
        a, b = self.training
        c, d = self.evaluation
        if b - a + 1 < MIN_TRAINING:
            raise ConfigError(f"training period has {b - a + 1} observations; need {MIN_TRAINING}")
        if not (b < c <= d):
            raise ConfigError(f"training {self.training} must precede evaluation {self.evaluation}")
        if self.estimator not in ("dols", "first_difference"):
            raise ConfigError(f"unknown estimator {self.estimator!r}")
        if self.covariate_lag_h < 0:
            raise ConfigError("covariate_lag_h must be non-negative")

    @property
    def span(self) -> tuple[int, int]:
        return self.test_span if self.test_span is not None else (self.training[0], self.evaluation[1])

    def critical_values(self, T: int) -> CriticalValueTable:
        return cached_critical_values(T, self.psy, self.cv_reps, self.cv_seed, self.cv_cache,
                                      self.workers, LEVELS)


@dataclass(frozen=True)
class DecompositionResult:
    counterfactual: TimeSeries
    gap: TimeSeries
    fit: CointFit | FirstDifferenceFit
    unadjusted_test: ExplosiveTestResult
    adjusted_test: ExplosiveTestResult
    span: tuple[int, int]


def lag_covariates(X: Frame, h: int) -> Frame:
    return X.shift(h) if h else X


def _clip_start(a: int, first: int, h: int) -> int:
    # lagging the covariates by h loses up to h leading rows
    return first if a < first <= a + h else a


def _fit(p: TimeSeries, X: Frame, plan: AdjustmentPlan):
    a, b = plan.training
    a = _clip_start(a, X.start_index, plan.covariate_lag_h)
    try:
        pt, Xt = p.window(a, b), X.window(a, b)
    except AlignmentError as exc:
        raise AlignmentError(f"inputs do not cover the training period {plan.training}: {exc}")
    if plan.estimator == "dols":
        return dols_fit(pt, Xt, plan.q, plan.nw_bandwidth)
    return first_difference_fit(pt, Xt)


def _usable_span(p: TimeSeries, X: Frame, span: tuple[int, int], h: int = 0) -> tuple[int, int]:
    a, b = span
    a = _clip_start(a, X.start_index, h)
    # stop at the last row where both price and covariates are present
    b = min(b, p.end_index, X.end_index)
    if a < max(p.start_index, X.start_index) or b <= a:
        raise AlignmentError(f"inputs do not cover the test span {span}")
    return a, b


def _test(y: TimeSeries, plan: AdjustmentPlan) -> ExplosiveTestResult:
    return psy_test(y, plan.psy, plan.critical_values(len(y)), plan.constant_cv)


def run_decomposition(p: TimeSeries, X: Frame, plan: AdjustmentPlan,
                      unadjusted: ExplosiveTestResult | None = None) -> DecompositionResult:
    """Fit on the training period, build the gap over the test span and test both series.

    The unadjusted test runs on the full price series; pass a precomputed
    result to skip it in sweeps.
    """
    Xh = lag_covariates(X, plan.covariate_lag_h)
    fit = _fit(p, Xh, plan)
    a, b = _usable_span(p, Xh, plan.span, plan.covariate_lag_h)
    fhat = fit.level_fit(Xh.window(a, b))
    pw = p.window(a, b)
    gap = pw.with_values(pw.values - fhat.values, "gap")
    adj = _test(gap, plan)
    unadj = unadjusted if unadjusted is not None else _test(p, plan)
    return DecompositionResult(fhat.with_values(fhat.values, "counterfactual"), gap, fit, unadj,
                               adj, (a, b))


def adjust_series(y: TimeSeries, kind: str, delta_hat: TimeSeries, pv_hat: TimeSeries) -> TimeSeries:
    """Remove the estimated technology component.

    ``kind`` is ``"pd_ratio"`` (subtract the present-value term) or
    ``"log_price"`` (also subtract the running sum of the shock).
    """
    check_aligned(y, delta_hat, pv_hat)
    k = kind.lower().replace("-", "_")
    if k in ("pd_ratio", "pdratio"):
        return y.with_values(y.values - pv_hat.values)
    if k in ("log_price", "logprice"):
        return y.with_values(y.values - np.cumsum(delta_hat.values) - pv_hat.values)
    raise ConfigError(f"unknown adjustment kind {kind!r}")


@dataclass(frozen=True)
class RobustnessRow:
    specification: str
    result: ExplosiveTestResult
    fit: object = None

    def cells(self) -> list:
        r = self.result
        cv = r.critical_values
        return [self.specification, f"{r.gsadf:.3f}", f"{cv[0.10]:.3f}", f"{cv[0.05]:.3f}",
                f"{cv[0.01]:.3f}", int(r.gsadf > cv[0.10]), int(r.gsadf > cv[0.05]),
                int(r.gsadf > cv[0.01])]


def leave_one_out(p: TimeSeries, X: Frame, plan: AdjustmentPlan) -> list[RobustnessRow]:
    """Adjusted test after dropping each covariate in turn."""
    if len(X.names) < 2:
        raise DegenerateInputError("dropping the only covariate leaves an empty design")
    base = run_decomposition(p, X, plan)
    rows = [RobustnessRow("baseline", base.adjusted_test, base.fit)]
    for name in X.names:
        d = run_decomposition(p, X.drop(name), plan, unadjusted=base.unadjusted_test)
        rows.append(RobustnessRow(f"drop {name}", d.adjusted_test, d.fit))
    return rows


def lagged_covariates(p: TimeSeries, X: Frame, plan: AdjustmentPlan,
                      lags: Sequence[int]) -> list[RobustnessRow]:
    out = []
    for h in lags:
        d = run_decomposition(p, X, replace(plan, covariate_lag_h=int(h)))
        out.append(RobustnessRow(f"lag h={h}", d.adjusted_test, d.fit))
    return out


@dataclass(frozen=True)
class StabilityRow:
    end_index: int
    gsadf: float
    coefficients: dict
    r_squared: float
    cv_05: float


def sweep_training_windows(p: TimeSeries, X: Frame, plan: AdjustmentPlan,
                           end_dates: Sequence[int]) -> list[StabilityRow]:
    """Re-estimate with each training end date, holding the test span fixed.

    The evaluation period always starts the period after the training end.
    """
    span = plan.span
    rows = []
    unadj = None
    for e in end_dates:
        sub = replace(plan, training=(plan.training[0], int(e)),
                      evaluation=(int(e) + 1, plan.evaluation[1]), test_span=span)
        d = run_decomposition(p, X, sub, unadjusted=unadj)
        unadj = d.unadjusted_test
        coefs = dict(zip(d.fit.names, map(float, d.fit.coefficients)))
        rows.append(StabilityRow(int(e), d.adjusted_test.gsadf, coefs, float(d.fit.r_squared),
                                 d.adjusted_test.critical_values[0.05]))
    return rows


def placebo_window(p: TimeSeries, X: Frame, plan: AdjustmentPlan,
                   placebo: tuple[int, int]) -> ExplosiveTestResult:
    """Trained adjustment applied to, and tested on, the placebo window only."""
    Xh = lag_covariates(X, plan.covariate_lag_h)
    fit = _fit(p, Xh, plan)
    a, b = placebo
    fhat = fit.level_fit(Xh.window(a, b))
    pw = p.window(a, b)
    return _test(pw.with_values(pw.values - fhat.values, "gap"), plan)


ROBUSTNESS_HEADER = ["specification", "GSADF", "CV10", "CV05", "CV01", "rej10", "rej05", "rej01"]


def robustness_to_csv(rows: Sequence[RobustnessRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(ROBUSTNESS_HEADER)
        for r in rows:
            w.writerow(r.cells())


def stability_to_csv(rows: Sequence[StabilityRow], path) -> None:
    names = list(rows[0].coefficients) if rows else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["end_index", "GSADF", "CV05", "R2"] + names)
        for r in rows:
            w.writerow([r.end_index, f"{r.gsadf:.4f}", f"{r.cv_05:.4f}", f"{r.r_squared:.4f}"]
                       + [f"{r.coefficients.get(n, float('nan')):.6f}" for n in names])
