"""Monte-Carlo experiments: rejection rates of raw and technology-adjusted series."""
from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from ._kernels import bsadf_sequence
from .dgp import (SHAPES, ArNoise, BubbleSpec, PresentValueModel, StochasticShocks,
                  StochasticTechSpec, TechShockProfile, simulate_economy,
                  simulate_stochastic_economy)
from .errors import ConfigError
from .psy import CriticalValueTable, PsyConfig, cached_critical_values
from .timeseries import RngStream, TimeSeries, derive_seed, detrend_linear

EXPERIMENTS = ("A", "B", "C", "Shapes", "Stochastic", "Overlap")
DELTA_GRID = tuple(round(0.02 * i, 2) for i in range(11))
RHO_GRID = (0.90, 0.93, 0.95, 0.97, 0.98, 0.99)
CV_GRID = (0.0, 0.05, 0.10, 0.15, 0.20, 0.30, 0.40, 0.50, 0.75, 1.00)
SHAPE_LABELS = {"triangular": "Triangular", "gaussian": "Gaussian", "beta": "Beta(2,5)",
                "gammalike": "Gamma-Like"}


@dataclass(frozen=True)
class ExperimentSpec:
    """Design of one Monte-Carlo study.

    With ``crn`` every grid point reuses replication ``m``'s stream ``m``;
    otherwise grid point ``g`` uses streams ``g * M + m``. Critical values come
    from a separate seed derived from ``seed``.
    """

    id: str
    grid: tuple
    M: int = 200
    T: int = 300
    model: PresentValueModel = PresentValueModel()
    profile: TechShockProfile = TechShockProfile()
    level: float = 0.05
    seed: int = 20240601
    sigma_eps: float = 0.1
    lag_K: int = 0
    r0_fraction: float | None = None
    cv_reps: int = 2000
    crn: bool = True
    obs_noise_sd: float = 0.0
    pd_noise: ArNoise = ArNoise()
    shapes: tuple = SHAPES
    sigma_xi: float = 0.005
    panel_delta: tuple = (0.04, 0.06)
    bubble: BubbleSpec | None = None
    workers: int = 1
    cv_cache: str | None = None

    def __post_init__(self):
        if self.id not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.id!r}; choose from {EXPERIMENTS}")
        if self.M < 50:
            raise ConfigError(f"M must be at least 50, got {self.M}")
        if not self.grid:
            raise ConfigError("grid is empty")
        object.__setattr__(self, "grid", tuple(self.grid))

    @property
    def psy(self) -> PsyConfig:
        return PsyConfig(self.r0_fraction, self.lag_K)

    @property
    def cv_seed(self) -> int:
        return derive_seed(self.seed, "critical-values")

    def critical_values(self) -> CriticalValueTable:
        return cached_critical_values(self.T, self.psy, self.cv_reps, self.cv_seed, self.cv_cache,
                                      self.workers)

    def stream(self, grid_index: int, rep: int) -> RngStream:
        sid = rep if self.crn else grid_index * self.M + rep
        return RngStream(self.seed, sid)

    def noise_stream(self, grid_index: int, rep: int) -> RngStream:
        sid = rep if self.crn else grid_index * self.M + rep
        return RngStream(derive_seed(self.seed, "pd-noise"), sid)


def default_spec(experiment: str, **overrides) -> ExperimentSpec:
    """Calibrated defaults for each design, with keyword overrides."""
    base: dict = {}
    if experiment in ("A", "B", "Shapes"):
        base["grid"] = DELTA_GRID
    elif experiment == "C":
        base["grid"] = RHO_GRID
        base["profile"] = TechShockProfile(delta_max=0.15)
    elif experiment == "Stochastic":
        base["grid"] = CV_GRID
        base["M"] = 500
    elif experiment == "Overlap":
        base.update(grid=(0.25,), M=100,
                    profile=TechShockProfile("gammalike", 0.25, 50, 150, 30),
                    bubble=BubbleSpec(100, 200, 0.3, 1.035, 0.1, 0.5), obs_noise_sd=0.3)
    else:
        raise ConfigError(f"unknown experiment {experiment!r}")
    base.update(overrides)
    return ExperimentSpec(experiment, **base)


@dataclass(frozen=True)
class RejectionRow:
    grid_point: object
    unadjusted_rate: float
    adjusted_rate: float
    n_reps: int
    group: str = ""


@dataclass(frozen=True)
class RejectionTable:
    rows: tuple
    metadata: dict = field(default_factory=dict)

    def rate(self, grid_point, group: str = "") -> float:
        for r in self.rows:
            if r.group == group and np.isclose(float(r.grid_point), float(grid_point)):
                return r.unadjusted_rate
        raise KeyError((grid_point, group))

    def adjusted(self, grid_point, group: str = "") -> float:
        for r in self.rows:
            if r.group == group and np.isclose(float(r.grid_point), float(grid_point)):
                return r.adjusted_rate
        raise KeyError((grid_point, group))

    def groups(self) -> list[str]:
        return list(dict.fromkeys(r.group for r in self.rows))


def _gsadf(y: np.ndarray, K: int, w: int) -> float:
    return float(np.nanmax(bsadf_sequence(y, K, w)[w - 1:]))


def _detrended(s: TimeSeries) -> np.ndarray:
    return detrend_linear(s).values


def _series_pair(spec: ExperimentSpec, gi: int, rep: int, point, shape: str | None):
    """Raw and oracle-adjusted test series of one replication."""
    if spec.id == "C":
        model = replace(spec.model, rho=float(point), kappa=None)
        profile = spec.profile
    else:
        model = spec.model
        base = spec.profile if shape is None else replace(spec.profile, shape=shape)
        profile = base.scaled(float(point))
    econ = simulate_economy(profile, model, spec.T, spec.sigma_eps, spec.bubble,
                            spec.obs_noise_sd, spec.stream(gi, rep))
    if spec.id == "B":
        u = spec.pd_noise.path(spec.noise_stream(gi, rep).generator().standard_normal(spec.T))
        pd = econ.price.values - econ.dividends.values + u
        return pd, pd - (1.0 - model.phi) * econ.pv_term.values
    return _detrended(econ.price), _detrended(econ.oracle_adjusted_log_price())


def _run_block(args):
    spec, gi, point, shape, reps, w = args
    out = np.empty((len(reps), 2))
    for i, rep in enumerate(reps):
        raw, adj = _series_pair(spec, gi, rep, point, shape)
        out[i] = _gsadf(raw, spec.lag_K, w), _gsadf(adj, spec.lag_K, w)
    return out


def _map(fn, tasks, workers: int):
    if workers <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def _grid_tasks(spec: ExperimentSpec, w: int):
    """(group, grid index, point, task list); replications split into fixed blocks."""
    blocks = np.array_split(np.arange(spec.M), max(1, spec.workers))
    shapes = spec.shapes if spec.id == "Shapes" else (None,)
    out = []
    for shape in shapes:
        for gi, point in enumerate(spec.grid):
            tasks = [(spec, gi, point, shape, b, w) for b in blocks if len(b)]
            out.append((SHAPE_LABELS.get(shape, "") if shape else "", gi, point, tasks))
    return out


def run_experiment(spec: ExperimentSpec) -> RejectionTable:
    """Rejection rates at ``spec.level`` along the grid of Experiments A, B, C or Shapes."""
    if spec.id not in ("A", "B", "C", "Shapes"):
        raise ConfigError(f"run_experiment handles A, B, C and Shapes, not {spec.id}")
    cvt = spec.critical_values()
    cv = cvt.gsadf_cv[spec.level]
    plan = _grid_tasks(spec, cvt.min_window)
    flat = [t for _, _, _, ts in plan for t in ts]
    results = iter(_map(_run_block, flat, spec.workers))
    rows = []
    for group, gi, point, ts in plan:
        stats = np.vstack([next(results) for _ in ts])
        rows.append(RejectionRow(point, float(np.mean(stats[:, 0] > cv)),
                                 float(np.mean(stats[:, 1] > cv)), spec.M, group))
    return RejectionTable(tuple(rows), _metadata(spec, cvt))


def _metadata(spec: ExperimentSpec, cvt: CriticalValueTable) -> dict:
    return {"experiment": spec.id, "M": spec.M, "T": spec.T, "seed": spec.seed,
            "level": spec.level, "lag_K": spec.lag_K, "min_window": cvt.min_window,
            "cv_seed": spec.cv_seed, "cv_reps": spec.cv_reps,
            "gsadf_cv": cvt.gsadf_cv[spec.level], "crn": spec.crn}


# -- stochastic technology ----------------------------------------------------

def _stochastic_block(args):
    spec, reps, w = args
    ng = len(spec.grid)
    out = np.empty((len(reps), 2, ng, 2))
    pA = spec.profile.scaled(spec.panel_delta[0])
    pB = spec.profile.scaled(spec.panel_delta[1])
    n_sup = spec.profile.T2 - spec.profile.T1 + 1
    for i, rep in enumerate(reps):
        shocks = StochasticShocks.draw(spec.stream(0, rep), spec.T, n_sup)
        for gi, cv in enumerate(spec.grid):
            sa = simulate_stochastic_economy(StochasticTechSpec.from_profile(pA, cv, spec.sigma_xi),
                                             spec.model, spec.T, spec.sigma_eps, spec.pd_noise,
                                             shocks=shocks)
            out[i, 0, gi] = (_gsadf(sa.pd_ratio.values, spec.lag_K, w),
                             _gsadf(sa.oracle_adjusted_pd().values, spec.lag_K, w))
            sb = simulate_stochastic_economy(StochasticTechSpec.from_profile(pB, cv, spec.sigma_xi),
                                             spec.model, spec.T, spec.sigma_eps, spec.pd_noise,
                                             shocks=shocks)
            out[i, 1, gi] = (_gsadf(_detrended(sb.log_price), spec.lag_K, w),
                             _gsadf(_detrended(sb.oracle_adjusted_log_price()), spec.lag_K, w))
    return out


def run_stochastic_grid(spec: ExperimentSpec) -> RejectionTable:
    """Rejection rates as prior uncertainty about the cumulative impact grows.

    Replication ``m`` draws its shocks once from stream ``m`` and reuses them
    at every grid point. Group ``"A"`` is the price-dividend ratio, group
    ``"B"`` the detrended log price.
    """
    if spec.id != "Stochastic":
        raise ConfigError("run_stochastic_grid needs the Stochastic design")
    cvt = spec.critical_values()
    cv = cvt.gsadf_cv[spec.level]
    blocks = [b for b in np.array_split(np.arange(spec.M), max(1, spec.workers)) if len(b)]
    stats = np.concatenate(_map(_stochastic_block, [(spec, b, cvt.min_window) for b in blocks],
                                spec.workers))
    rows = []
    for pi, group in enumerate(("A", "B")):
        for gi, point in enumerate(spec.grid):
            s = stats[:, pi, gi]
            rows.append(RejectionRow(point, float(np.mean(s[:, 0] > cv)),
                                     float(np.mean(s[:, 1] > cv)), spec.M, group))
    return RejectionTable(tuple(rows), _metadata(spec, cvt))


# -- technology and bubble overlap --------------------------------------------

@dataclass(frozen=True)
class OverlapResult:
    first_detection_raw: tuple
    first_detection_adj: tuple
    raw_in_tech_phase: float
    adj_after_bubble_start: float
    n_detect_raw: int
    n_detect_adj: int
    timeline: dict
    metadata: dict


def _first_cross(y: np.ndarray, K: int, w: int, cv_seq: np.ndarray, t0: int):
    seq = bsadf_sequence(y, K, w)[w - 1:]
    with np.errstate(invalid="ignore"):
        hit = np.nonzero(seq > cv_seq)[0]
    return (int(t0 + w - 1 + hit[0]) if len(hit) else None), seq


def _overlap_block(args):
    spec, reps, w, cv_seq = args
    out = []
    for rep in reps:
        econ = simulate_economy(spec.profile, spec.model, spec.T, spec.sigma_eps, spec.bubble,
                                spec.obs_noise_sd, spec.stream(0, rep))
        fr, _ = _first_cross(_detrended(econ.price), spec.lag_K, w, cv_seq, 1)
        fa, _ = _first_cross(_detrended(econ.oracle_adjusted_log_price()), spec.lag_K, w, cv_seq, 1)
        out.append((fr, fa))
    return out


def run_overlap(spec: ExperimentSpec, tech_phase: tuple = (50, 100)) -> OverlapResult:
    """First BSADF crossings of raw and adjusted prices when a bubble follows a technology shock.

    Crossings use the per-end-point critical values at ``spec.level``. The
    timeline holds replication 0's sequences.
    """
    if spec.id != "Overlap":
        raise ConfigError("run_overlap needs the Overlap design")
    cvt = spec.critical_values()
    cv_seq = cvt.bsadf_cv[spec.level]
    w = cvt.min_window
    blocks = [b for b in np.array_split(np.arange(spec.M), max(1, spec.workers)) if len(b)]
    pairs = [p for part in _map(_overlap_block, [(spec, b, w, cv_seq) for b in blocks],
                                spec.workers) for p in part]
    raw = tuple(p[0] for p in pairs)
    adj = tuple(p[1] for p in pairs)
    dr = [x for x in raw if x is not None]
    da = [x for x in adj if x is not None]
    lo, hi = tech_phase
    frac_raw = float(np.mean([lo <= x < hi for x in dr])) if dr else float("nan")
    bstart = spec.bubble.start if spec.bubble is not None else hi
    frac_adj = float(np.mean([x >= bstart for x in da])) if da else float("nan")

    econ = simulate_economy(spec.profile, spec.model, spec.T, spec.sigma_eps, spec.bubble,
                            spec.obs_noise_sd, spec.stream(0, 0))
    _, sr = _first_cross(_detrended(econ.price), spec.lag_K, w, cv_seq, 1)
    _, sa = _first_cross(_detrended(econ.oracle_adjusted_log_price()), spec.lag_K, w, cv_seq, 1)
    pad = np.full(w - 1, np.nan)
    timeline = {"t": np.arange(1, spec.T + 1), "p": econ.price.values,
                "p_adj": econ.oracle_adjusted_log_price().values,
                "bsadf_raw": np.concatenate([pad, sr]), "bsadf_adj": np.concatenate([pad, sa]),
                "cv": np.concatenate([pad, cv_seq])}
    return OverlapResult(raw, adj, frac_raw, frac_adj, len(dr), len(da), timeline,
                         _metadata(spec, cvt))


# -- output ------------------------------------------------------------------

def _pct(x: float) -> str:
    return f"{100.0 * x:.1f}"


def table_to_csv(table: RejectionTable, path) -> None:
    """Write a table in the layout of its experiment."""
    exp = table.metadata.get("experiment")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if exp == "Shapes":
            groups = table.groups()
            w.writerow(["delta_max"] + groups + ["adjusted"])
            points = list(dict.fromkeys(r.grid_point for r in table.rows))
            for pt in points:
                cells = [f"{table.rate(pt, g):.3f}" for g in groups]
                adj = np.mean([table.adjusted(pt, g) for g in groups])
                w.writerow([f"{pt:.2f}"] + cells + [f"{adj:.3f}"])
        elif exp == "Stochastic":
            w.writerow(["CV", "A_rej_pct", "A_delta_pp", "B_rej_pct", "B_delta_pp"])
            points = list(dict.fromkeys(r.grid_point for r in table.rows))
            a0, b0 = table.rate(points[0], "A"), table.rate(points[0], "B")
            for pt in points:
                a, b = table.rate(pt, "A"), table.rate(pt, "B")
                w.writerow([f"{pt:.2f}", _pct(a), f"{100 * (a - a0):+.1f}", _pct(b),
                            f"{100 * (b - b0):+.1f}"])
            w.writerow(["adjusted", _pct(table.adjusted(points[0], "A")), "",
                        _pct(table.adjusted(points[0], "B")), ""])
        else:
            name = "rho" if exp == "C" else "delta_max"
            w.writerow([name, "unadjusted_pct", "adjusted_pct", "n_reps"])
            for r in table.rows:
                w.writerow([f"{r.grid_point:.2f}", _pct(r.unadjusted_rate), _pct(r.adjusted_rate),
                            r.n_reps])


def plot_data_to_csv(table: RejectionTable, path, group: str = "") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "unadjusted", "adjusted"])
        for r in table.rows:
            if r.group == group:
                w.writerow([repr(float(r.grid_point)), repr(r.unadjusted_rate), repr(r.adjusted_rate)])


def overlap_to_csv(res: OverlapResult, path) -> None:
    cols = list(res.timeline)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for i in range(len(res.timeline["t"])):
            w.writerow([int(res.timeline["t"][i])] + [repr(float(res.timeline[c][i])) for c in cols[1:]])


def overlap_summary_to_csv(res: OverlapResult, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["rep", "first_detection_raw", "first_detection_adj"])
        for i, (a, b) in enumerate(zip(res.first_detection_raw, res.first_detection_adj)):
            w.writerow([i, "" if a is None else a, "" if b is None else b])
