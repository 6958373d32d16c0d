"""Recursive right-tailed ADF tests: BSADF, GSADF, critical values, date-stamping."""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._kernels import bsadf_sequence
from .errors import (AlignmentError, ConfigError, ParseError, SampleTooShortError,
                     SingularDesignError, WindowTooShortError)
from .regress import adf_t_stat, min_adf_window
from .timeseries import RngStream, TimeSeries

LEVELS = (0.10, 0.05, 0.01)


def default_r0(T: int) -> float:
    """Minimum window fraction ``0.01 + 1.8/sqrt(T)``, capped at 0.9."""
    if T < 30:
        raise SampleTooShortError(f"default window fraction needs T >= 30, got {T}")
    return min(0.01 + 1.8 / math.sqrt(T), 0.9)


@dataclass(frozen=True)
class PsyConfig:
    """Settings of the recursive test.

    Parameters
    ----------
    r0_fraction : float or None
        Minimum window as a fraction of the sample; ``None`` uses
        :func:`default_r0` of the tested length.
    lag_K : int
        Number of lagged differences in every ADF regression.
    intercept : bool
        Include an intercept in the ADF regression.
    """

    r0_fraction: float | None = None
    lag_K: int = 0
    intercept: bool = True

    def __post_init__(self):
        if self.r0_fraction is not None and not (0.01 <= self.r0_fraction < 1.0):
            raise ConfigError(f"r0_fraction must lie in [0.01, 1), got {self.r0_fraction}")
        if self.lag_K < 0:
            raise ConfigError(f"lag_K must be non-negative, got {self.lag_K}")

    def r0(self, T: int) -> float:
        return default_r0(T) if self.r0_fraction is None else float(self.r0_fraction)

    def min_window_obs(self, T: int) -> int:
        """``floor(r0 * T)``, validated against the lag order."""
        w = int(math.floor(self.r0(T) * T + 1e-9))
        if w < min_adf_window(self.lag_K):
            raise WindowTooShortError(
                f"minimum window {w} is below {min_adf_window(self.lag_K)} for K={self.lag_K}")
        if w > T:
            raise WindowTooShortError(f"minimum window {w} exceeds the sample length {T}")
        return w


@dataclass(frozen=True)
class ExplosiveTestResult:
    """GSADF statistic and BSADF sequence of one series.

    ``bsadf_sequence[i]`` is BSADF at end time ``r2_start + i``. Critical
    values and episodes are filled in by :func:`psy_test`.
    """

    gsadf: float
    bsadf_sequence: np.ndarray
    r2_start: int
    T: int
    min_window: int
    lag_K: int
    critical_values: dict = field(default_factory=dict)
    bsadf_cv: dict = field(default_factory=dict)
    episodes: dict = field(default_factory=dict)

    @property
    def r2_index(self) -> np.ndarray:
        return np.arange(self.r2_start, self.r2_start + len(self.bsadf_sequence))

    def rejects(self, level: float = 0.05) -> bool:
        return bool(self.gsadf > self.critical_values[level])


def _check_series(y: TimeSeries, cfg: PsyConfig) -> int:
    T = len(y)
    if T < 3:
        raise SampleTooShortError(f"series has {T} observations")
    return cfg.min_window_obs(T)


def _naive_bsadf_sequence(values: np.ndarray, K: int, w: int, intercept: bool) -> np.ndarray:
    """Direct enumeration with one OLS per window; the reference for the fast sweep."""
    y = TimeSeries(values)
    T = len(values)
    out = np.full(T, np.nan)
    for r2 in range(w - 1, T):
        best = -np.inf
        for r1 in range(0, r2 - w + 2):
            try:
                best = max(best, adf_t_stat(y, r1, r2, K, intercept).t_stat)
            except SingularDesignError:
                continue
        if best > -np.inf:
            out[r2] = best
    return out


def _sequence(values: np.ndarray, cfg: PsyConfig, w: int, naive: bool) -> np.ndarray:
    if naive:
        return _naive_bsadf_sequence(values, cfg.lag_K, w, cfg.intercept)
    return bsadf_sequence(values, cfg.lag_K, w, cfg.intercept)


def bsadf(y: TimeSeries, r2: int, cfg: PsyConfig, min_window: int | None = None) -> float:
    """Sup of ADF statistics over all admissible start dates, end fixed at time ``r2``.

    The minimum window is taken from the full length of ``y`` unless given.
    """
    w = _check_series(y, cfg) if min_window is None else int(min_window)
    pos = y.position(r2)
    if pos + 1 < w:
        raise WindowTooShortError(f"end point {r2} leaves fewer than {w} observations")
    seq = bsadf_sequence(y.values[:pos + 1], cfg.lag_K, w, cfg.intercept)
    val = seq[pos]
    if not np.isfinite(val):
        raise SingularDesignError(f"every window ending at {r2} is singular")
    return float(val)


def gsadf(y: TimeSeries, cfg: PsyConfig, naive: bool = False) -> ExplosiveTestResult:
    """GSADF statistic and BSADF sequence (no critical values).

    Set ``naive`` to run the O(T^3) window-by-window reference path.
    """
    w = _check_series(y, cfg)
    seq = _sequence(y.values, cfg, w, naive)[w - 1:]
    if not np.any(np.isfinite(seq)):
        raise SingularDesignError("every admissible window is singular")
    return ExplosiveTestResult(float(np.nanmax(seq)), seq, y.start_index + w - 1, len(y), w,
                               cfg.lag_K)


# -- critical values ---------------------------------------------------------

@dataclass(frozen=True)
class CriticalValueTable:
    """Simulated null quantiles of GSADF and of BSADF at every end point.

    ``bsadf_cv[level][i]`` is the quantile for the end point at position
    ``min_window - 1 + i`` of a length-``T`` sample.
    """

    T: int
    r0_fraction: float
    lag_K: int
    min_window: int
    levels: tuple
    gsadf_cv: dict
    bsadf_cv: dict
    n_reps: int
    master_seed: int
    gsadf_draws: np.ndarray | None = None

    def constant_sequence(self, level: float) -> np.ndarray:
        return np.full(self.T - self.min_window + 1, self.gsadf_cv[level])


def _null_sequences(args) -> np.ndarray:
    T, K, w, intercept, seed, reps = args
    out = np.empty((len(reps), T - w + 1))
    for i, rep in enumerate(reps):
        y = np.cumsum(RngStream(seed, rep).generator().standard_normal(T))
        out[i] = bsadf_sequence(y, K, w, intercept)[w - 1:]
    return out


def null_bsadf_draws(T: int, cfg: PsyConfig, n_reps: int, seed: int, workers: int = 1) -> np.ndarray:
    """BSADF sequences of ``n_reps`` Gaussian random walks; replication ``i`` uses stream ``i``."""
    w = cfg.min_window_obs(T)
    reps = np.arange(n_reps)
    if workers <= 1:
        return _null_sequences((T, cfg.lag_K, w, cfg.intercept, seed, reps))
    chunks = np.array_split(reps, workers * 4)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_null_sequences,
                            [(T, cfg.lag_K, w, cfg.intercept, seed, c) for c in chunks if len(c)]))
    return np.vstack(parts)


def simulate_critical_values(T: int, cfg: PsyConfig, levels: Iterable[float] = LEVELS,
                             n_reps: int = 2000, seed: int = 0, workers: int = 1) -> CriticalValueTable:
    """Critical values from driftless Gaussian random walks of length ``T``.

    A level ``a`` maps to the empirical ``1 - a`` quantile (linear interpolation).
    The result does not depend on ``workers``.
    """
    if n_reps < 200:
        raise ConfigError(f"need at least 200 replications, got {n_reps}")
    levels = tuple(float(a) for a in levels)
    for a in levels:
        if not 0.0 < a < 1.0:
            raise ConfigError(f"levels must lie in (0, 1), got {a}")
    seqs = null_bsadf_draws(T, cfg, n_reps, seed, workers)
    g = np.nanmax(seqs, axis=1)
    gcv = {a: float(np.quantile(g, 1.0 - a)) for a in levels}
    bcv = {a: np.nanquantile(seqs, 1.0 - a, axis=0) for a in levels}
    return CriticalValueTable(T, cfg.r0(T), cfg.lag_K, cfg.min_window_obs(T), levels, gcv, bcv,
                              int(n_reps), int(seed), g)


def _level_tag(a: float) -> str:
    return f"cv_{int(round(a * 100)):02d}"


def cache_stem(T: int, r0: float, K: int, n_reps: int, seed: int) -> str:
    return f"cv_T{T}_r0{r0:.6f}_K{K}_n{n_reps}_s{seed}"


def save_critical_values(table: CriticalValueTable, directory) -> tuple[Path, Path]:
    """Write the scalar and per-end-point tables as two CSV files."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    stem = cache_stem(table.T, table.r0_fraction, table.lag_K, table.n_reps, table.master_seed)
    p1, p2 = d / f"{stem}_gsadf.csv", d / f"{stem}_bsadf.csv"
    with open(p1, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "gsadf_cv"])
        for a in table.levels:
            w.writerow([repr(a), repr(table.gsadf_cv[a])])
    with open(p2, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r2_index"] + [_level_tag(a) for a in table.levels])
        for i in range(table.T - table.min_window + 1):
            w.writerow([table.min_window - 1 + i] + [repr(float(table.bsadf_cv[a][i])) for a in table.levels])
    return p1, p2


def load_critical_values(directory, T: int, cfg: PsyConfig, n_reps: int, seed: int) -> CriticalValueTable | None:
    d = Path(directory)
    stem = cache_stem(T, cfg.r0(T), cfg.lag_K, n_reps, seed)
    p1, p2 = d / f"{stem}_gsadf.csv", d / f"{stem}_bsadf.csv"
    if not (p1.exists() and p2.exists()):
        return None
    try:
        with open(p1, newline="") as fh:
            rows = list(csv.DictReader(fh))
        gcv = {float(r["level"]): float(r["gsadf_cv"]) for r in rows}
        levels = tuple(gcv)
        with open(p2, newline="") as fh:
            rows = list(csv.DictReader(fh))
        bcv = {a: np.array([float(r[_level_tag(a)]) for r in rows]) for a in levels}
        w = int(rows[0]["r2_index"]) + 1
    except (KeyError, ValueError, IndexError) as exc:
        raise ParseError(f"corrupt critical-value cache {stem}: {exc}")
    return CriticalValueTable(T, cfg.r0(T), cfg.lag_K, w, levels, gcv, bcv, n_reps, seed)


_MEMO: dict = {}


def cached_critical_values(T: int, cfg: PsyConfig, n_reps: int, seed: int, cache_dir=None,
                           workers: int = 1, levels: Iterable[float] = LEVELS) -> CriticalValueTable:
    """Load a table from memory or ``cache_dir`` when present, otherwise simulate and store it."""
    levels = tuple(float(a) for a in levels)
    key = (T, cfg.r0(T), cfg.lag_K, cfg.intercept, n_reps, seed, levels)
    if key in _MEMO:
        return _MEMO[key]
    if cache_dir is not None:
        hit = load_critical_values(cache_dir, T, cfg, n_reps, seed)
        if hit is not None and all(a in hit.gsadf_cv for a in levels):
            _MEMO[key] = hit
            return hit
    table = simulate_critical_values(T, cfg, levels, n_reps, seed, workers)
    if cache_dir is not None:
        save_critical_values(table, cache_dir)
    _MEMO[key] = table
    return table


# -- date-stamping -----------------------------------------------------------

def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    out = []
    i, n = 0, len(mask)
    while i < n:
        if mask[i]:
            j = i
            while j + 1 < n and mask[j + 1]:
                j += 1
            out.append((i, j))
            i = j + 1
        else:
            i += 1
    return out


def date_stamp(result: ExplosiveTestResult, cvs: CriticalValueTable, level: float = 0.05,
               constant: bool = False) -> list[tuple[int, int]]:
    """Maximal runs of end dates where BSADF exceeds its critical value.

    With ``constant`` the scalar GSADF critical value replaces the per-end-point
    sequence. Episodes are returned as closed time-index intervals.
    """
    if cvs.T != result.T or cvs.min_window != result.min_window:
        raise AlignmentError(
            f"critical values for T={cvs.T}, window {cvs.min_window} do not match "
            f"a series with T={result.T}, window {result.min_window}")
    cv = cvs.constant_sequence(level) if constant else cvs.bsadf_cv[level]
    if len(cv) != len(result.bsadf_sequence):
        raise AlignmentError("critical-value sequence and BSADF sequence differ in length")
    with np.errstate(invalid="ignore"):
        mask = result.bsadf_sequence > cv
    return [(result.r2_start + a, result.r2_start + b) for a, b in _runs(mask)]


def first_crossing(result: ExplosiveTestResult, cvs: CriticalValueTable, level: float = 0.05,
                   constant: bool = False) -> int | None:
    eps = date_stamp(result, cvs, level, constant)
    return eps[0][0] if eps else None


def psy_test(y: TimeSeries, cfg: PsyConfig, cvs: CriticalValueTable, constant: bool = False) -> ExplosiveTestResult:
    """GSADF with critical values attached and episodes stamped at every level of ``cvs``."""
    res = gsadf(y, cfg)
    eps = {a: date_stamp(res, cvs, a, constant) for a in cvs.levels}
    return ExplosiveTestResult(res.gsadf, res.bsadf_sequence, res.r2_start, res.T, res.min_window,
                               res.lag_K, dict(cvs.gsadf_cv), dict(cvs.bsadf_cv), eps)
