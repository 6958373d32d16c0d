"""Command-line front end.

Every command writes its CSV artifacts and a ``manifest.json`` into
``--out``. ``techbubble replay manifest.json`` regenerates them.
Exit codes: 0 success, 2 usage, 3 data, 4 numeric.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from . import __version__
from .errors import (EXIT_CODES, AlignmentError, ConfigError, ParseError, TechBubbleError,
                     UsageError)
from .timeseries import Frame, RngStream, TimeSeries, frame_to_csv

_DATE = re.compile(r"^\s*(\d{4})-(\d{2})\s*$")


# -- ingestion ---------------------------------------------------------------

@dataclass(frozen=True)
class IngestSchema:
    """How to read a CSV: the time column and columns to fill by natural cubic spline."""

    time_column: str | None = None
    spline_columns: tuple = ()
    columns: tuple | None = None


@dataclass(frozen=True)
class DateMap:
    first_date: str
    first_index: int = 1

    def to_index(self, date: str) -> int:
        y0, m0 = _parse_date(self.first_date)
        y, m = _parse_date(date)
        return self.first_index + (y - y0) * 12 + (m - m0)

    def to_date(self, index: int) -> str:
        y0, m0 = _parse_date(self.first_date)
        k = (m0 - 1) + index - self.first_index
        return f"{y0 + k // 12:04d}-{k % 12 + 1:02d}"


def _parse_date(s: str) -> tuple[int, int]:
    m = _DATE.match(s)
    if not m or not 1 <= int(m.group(2)) <= 12:
        raise ParseError(f"{s!r} is not a YYYY-MM date")
    return int(m.group(1)), int(m.group(2))


def spline_upsample(values, factor: int = 3) -> np.ndarray:
    """Natural cubic spline through equally spaced knots, sampled ``factor`` times as often.

    The result has ``(n - 1) * factor + 1`` points and equals ``values`` at
    every ``factor``-th point.
    """
    v = np.asarray(values, dtype=np.float64)
    if len(v) < 2:
        raise ParseError("spline needs at least two knots")
    x = np.arange(len(v)) * factor
    return CubicSpline(x, v, bc_type="natural")(np.arange(x[-1] + 1))


def ingest_csv(path, schema: IngestSchema = IngestSchema()) -> tuple[Frame, DateMap | None]:
    """Read a CSV into a frame.

    The time column is ``t`` (consecutive integers) or ``date`` (consecutive
    ``YYYY-MM`` months, mapped to indices from 1). Spline columns may be blank
    except at their knots; they are filled by a natural cubic spline, and rows
    outside the knot range of any spline column are dropped from the start
    and end. Any remaining blank or non-numeric cell is an error naming its
    data row (1-based, header excluded) and column.
    """
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{path}: no such file")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or not any(c.strip() for c in rows[0]):
        raise ParseError(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    tcol = schema.time_column or ("date" if "date" in header else "t")
    if tcol not in header:
        raise ParseError(f"{path}: no time column {tcol!r}")
    ti = header.index(tcol)
    names = [h for h in header if h != tcol]
    if schema.columns is not None:
        missing = [c for c in schema.columns if c not in names]
        if missing:
            raise ParseError(f"{path}: missing column(s) {missing}")
        names = list(schema.columns)
    for c in schema.spline_columns:
        if c not in names:
            raise ParseError(f"{path}: spline column {c!r} not found")
    data = {n: [] for n in names}
    times = []
    date_map = None
    for r, row in enumerate(rows[1:], start=1):
        if not any(c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
        raw_t = row[ti].strip()
        if tcol == "date":
            if date_map is None:
                _parse_date(raw_t)
                date_map = DateMap(raw_t)
            try:
                times.append(date_map.to_index(raw_t))
            except ParseError:
                raise ParseError(f"{path}: row {r}, column 'date': {raw_t!r} is not YYYY-MM")
        else:
            try:
                times.append(int(raw_t))
            except ValueError:
                raise ParseError(f"{path}: row {r}, column {tcol!r}: {raw_t!r} is not an integer")
        for n in names:
            cell = row[header.index(n)].strip()
            if cell == "" or cell.lower() in ("na", "nan"):
                data[n].append(np.nan)
                continue
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: row {r}, column {n!r}: {cell!r} is not numeric")
            if not math.isfinite(v):
                raise ParseError(f"{path}: row {r}, column {n!r}: non-finite value")
            data[n].append(v)
    if not times:
        raise ParseError(f"{path}: no data rows")
    if times != list(range(times[0], times[0] + len(times))):
        raise ParseError(f"{path}: time column must be consecutive")
    cols = {n: np.array(v) for n, v in data.items()}
    lo, hi = 0, len(times) - 1
    for c in schema.spline_columns:
        knots = np.nonzero(np.isfinite(cols[c]))[0]
        if len(knots) < 2:
            raise ParseError(f"{path}: spline column {c!r} has fewer than two values")
        cols[c] = CubicSpline(knots, cols[c][knots], bc_type="natural")(np.arange(len(times)))
        lo, hi = max(lo, knots[0]), min(hi, knots[-1])
    # trim leading and trailing rows that are incomplete in any column
    finite = np.all(np.column_stack([np.isfinite(v) for v in cols.values()]), axis=1) \
        if cols else np.ones(len(times), bool)
    while lo <= hi and not finite[lo]:
        lo += 1
    while hi >= lo and not finite[hi]:
        hi -= 1
    if hi < lo:
        raise ParseError(f"{path}: no complete rows")
    for n, v in cols.items():
        bad = np.nonzero(~np.isfinite(v[lo:hi + 1]))[0]
        if len(bad):
            raise ParseError(f"{path}: row {lo + bad[0] + 1}, column {n!r}: missing value")
    frame = Frame({n: v[lo:hi + 1] for n, v in cols.items()}, times[lo])
    return frame, date_map


# -- argument handling -------------------------------------------------------

def _csv_list(s: str) -> list[str]:
    return [x.strip() for x in s.split(",") if x.strip()]


def _r0(s: str):
    if str(s).lower() == "auto":
        return None
    return float(s)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--config", help="key=value file; command-line flags take precedence")


def _add_psy(p: argparse.ArgumentParser) -> None:
    p.add_argument("--r0", type=_r0, default=None, help="minimum window fraction or 'auto'")
    p.add_argument("--K", type=int, default=0, help="ADF lag order")
    p.add_argument("--reps", type=int, default=2000, help="critical-value replications")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--cv-cache", default=None, help="directory for cached critical values")
    p.add_argument("--constant-cv", action="store_true", help="date-stamp against the GSADF CV")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="techbubble", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=f"techbubble {__version__}")
    sub = ap.add_subparsers(dest="command")

    p = sub.add_parser("simulate", help="simulate one economy",
                       description="Writes economy.csv with columns t, delta, pv_term, d, f, b, p, drift.")
    _add_common(p)
    p.add_argument("--shape", default="triangular")
    p.add_argument("--delta-max", type=float, default=0.15)
    p.add_argument("--T1", type=int, default=80)
    p.add_argument("--T2", type=int, default=200)
    p.add_argument("--tau", type=int, default=30)
    p.add_argument("--rho", type=float, default=0.95)
    p.add_argument("--c", type=float, default=0.02)
    p.add_argument("--r-bar", type=float, default=0.06)
    p.add_argument("--phi", type=float, default=0.0)
    p.add_argument("--T", type=int, default=300)
    p.add_argument("--sigma-eps", type=float, default=0.1)
    p.add_argument("--obs-noise", type=float, default=0.0)
    p.add_argument("--bubble", default=None, help="start:end of an explosive bubble")
    p.add_argument("--bubble-init", type=float, default=0.3)
    p.add_argument("--bubble-rho", type=float, default=1.035)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("psy", help="GSADF test with date-stamping",
                       description="Input: CSV with t or date column. Writes bsadf.csv "
                                   "(t, bsadf, cv_10, cv_05, cv_01), episodes.csv (level, start, end) "
                                   "and summary.csv (statistic, value).")
    _add_common(p)
    p.add_argument("--input", required=False)
    p.add_argument("--column", default=None, help="series to test (default: first column)")
    _add_psy(p)

    p = sub.add_parser("cv", help="simulate critical values",
                       description="Writes cv_gsadf.csv (level, gsadf_cv) and cv_bsadf.csv "
                                   "(r2_index, cv_10, cv_05, cv_01).")
    _add_common(p)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    _add_psy(p)

    p = sub.add_parser("dols", help="cointegrating regression on a training window",
                       description="Writes fit.csv (variable, coef, se, t, p), residuals.csv and "
                                   "tests.csv (Engle-Granger and Hansen L_c).")
    _add_common(p)
    p.add_argument("--input")
    p.add_argument("--price", default="p")
    p.add_argument("--covariates", type=_csv_list, default=None)
    p.add_argument("--train", default=None, help="start:end (integers or YYYY-MM)")
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--bandwidth", type=int, default=4)
    p.add_argument("--estimator", default="dols", choices=["dols", "first_difference"])
    p.add_argument("--eg-lags", type=int, default=1)
    p.add_argument("--spline", type=_csv_list, default=[], help="columns to fill by cubic spline")

    p = sub.add_parser("adjust", help="technology-adjusted PSY test",
                       description="Writes gap.csv (t, p, counterfactual, gap), robustness.csv "
                                   "(specification, GSADF, CV10, CV05, CV01, rej10, rej05, rej01) "
                                   "and training_stability.csv when --sweep is given.")
    _add_common(p)
    p.add_argument("--input")
    p.add_argument("--price", default="p")
    p.add_argument("--covariates", type=_csv_list, default=None)
    p.add_argument("--train", default=None)
    p.add_argument("--eval", default=None)
    p.add_argument("--span", default=None, help="test span start:end (default train start to eval end)")
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--bandwidth", type=int, default=4)
    p.add_argument("--estimator", default="dols", choices=["dols", "first_difference"])
    p.add_argument("--lag-h", type=int, default=0)
    p.add_argument("--loo", action="store_true", help="add leave-one-out rows")
    p.add_argument("--lags", type=_csv_list, default=[], help="extra lagged-covariate rows")
    p.add_argument("--placebo", default=None, help="start:end of a placebo window")
    p.add_argument("--sweep", default=None, help="first:last training end dates")
    p.add_argument("--spline", type=_csv_list, default=[])
    p.add_argument("--workers", type=int, default=1)
    _add_psy(p)

    p = sub.add_parser("mc", help="Monte-Carlo experiments",
                       description="Writes mc_<experiment>.csv in the layout of the matching "
                                   "table, plot_<experiment>.csv (x, unadjusted, adjusted) and, for "
                                   "Overlap, overlap_timeline.csv and overlap_first.csv.")
    _add_common(p)
    p.add_argument("--experiment", default=None, choices=["A", "B", "C", "Shapes", "Stochastic", "Overlap"])
    p.add_argument("--M", type=int, default=None)
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--cv-reps", type=int, default=2000)
    p.add_argument("--K", type=int, default=0)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--no-crn", action="store_true", help="independent streams per grid point")
    p.add_argument("--cv-cache", default=None)

    p = sub.add_parser("diagnose", help="Granger, PCA and Hansen diagnostics",
                       description="Writes granger.csv (cause, effect, lag, F, p, p_boot), "
                                   "pca.csv (component, share, loadings...) and hansen.csv.")
    _add_common(p)
    p.add_argument("--input")
    p.add_argument("--granger", type=_csv_list, default=[], help="cause:effect pairs")
    p.add_argument("--growth", action="store_true", help="difference the Granger inputs first")
    p.add_argument("--max-lag", type=int, default=4)
    p.add_argument("--boot", type=int, default=2000)
    p.add_argument("--pca", type=_csv_list, default=[], help="columns of price gaps")
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--price", default=None, help="price column for Hansen L_c")
    p.add_argument("--covariates", type=_csv_list, default=None)
    p.add_argument("--q", type=int, default=1)
    p.add_argument("--bandwidth", type=int, default=4)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--spline", type=_csv_list, default=[])

    p = sub.add_parser("replay", help="re-run a command from its manifest")
    p.add_argument("manifest")
    p.add_argument("--out", default=None, help="override the recorded output directory")
    return ap


def read_config(path) -> dict:
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    for i, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _subparser(ap: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for a in ap._actions:
        if isinstance(a, argparse._SubParsersAction):
            return a.choices[name]
    raise UsageError(name)


def parse(argv: Sequence[str]) -> argparse.Namespace:
    ap = build_parser()
    argv = list(argv)
    if argv and argv[0] in ("simulate", "psy", "cv", "dols", "adjust", "mc", "diagnose"):
        pre = argparse.ArgumentParser(add_help=False)
        pre.add_argument("--config")
        known, _ = pre.parse_known_args(argv[1:])
        if known.config:
            sp = _subparser(ap, argv[0])
            dests = {a.dest: a for a in sp._actions}
            cfg = read_config(known.config)
            unknown = sorted(k for k in cfg if k not in dests or k in ("help", "config"))
            if unknown:
                raise ConfigError(f"unknown key(s) for {argv[0]}: {unknown}")
            conv = {}
            for k, v in cfg.items():
                act = dests[k]
                if isinstance(act, argparse._StoreTrueAction):
                    conv[k] = v.lower() in ("1", "true", "yes")
                else:
                    try:
                        conv[k] = act.type(v) if act.type else v
                    except (TypeError, ValueError):
                        raise ConfigError(f"config key {k}: invalid value {v!r}")
            sp.set_defaults(**conv)
    ns = ap.parse_args(argv)
    if ns.command is None:
        ap.print_help(sys.stderr)
        raise UsageError("no command given")
    return ns


# -- helpers -----------------------------------------------------------------

def _versions() -> dict:
    import numba
    import scipy
    return {"techbubble": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


def _write_manifest(out: Path, ns: argparse.Namespace, extra: dict | None = None) -> None:
    args = {k: v for k, v in vars(ns).items() if k not in ("config",)}
    body = {"command": ns.command, "args": args, "seed": args.get("seed"),
            "versions": _versions()}
    if extra:
        body.update(extra)
    (out / "manifest.json").write_text(json.dumps(body, indent=2, sort_keys=True, default=str) + "\n")


def _need(ns, *names):
    missing = [n for n in names if getattr(ns, n, None) in (None, [], "")]
    if missing:
        raise UsageError(f"{ns.command}: missing required option(s) "
                         + ", ".join("--" + m.replace("_", "-") for m in missing))


def _span(s: str, date_map: DateMap | None) -> tuple[int, int]:
    try:
        a, b = s.split(":")
    except ValueError:
        raise UsageError(f"expected start:end, got {s!r}")
    conv = (lambda x: date_map.to_index(x)) if (date_map and _DATE.match(a)) else int
    try:
        return conv(a.strip()), conv(b.strip())
    except ValueError:
        raise UsageError(f"bad span {s!r}")


def _load(ns, columns=None) -> tuple[Frame, DateMap | None]:
    _need(ns, "input")
    return ingest_csv(ns.input, IngestSchema(spline_columns=tuple(getattr(ns, "spline", []) or ()),
                                             columns=tuple(columns) if columns else None))


def _label(t: int, dm: DateMap | None):
    return dm.to_date(t) if dm else t


def _date_extra(dm: DateMap | None) -> dict:
    return {"date_map": {"first_date": dm.first_date, "first_index": dm.first_index}} if dm else {}


def _fmt(x: float) -> str:
    return "" if not np.isfinite(x) else repr(float(x))


# -- commands ----------------------------------------------------------------

def cmd_simulate(ns, out: Path) -> None:
    from .dgp import BubbleSpec, PresentValueModel, TechShockProfile, simulate_economy
    _need(ns, "seed")
    profile = TechShockProfile(ns.shape, ns.delta_max, ns.T1, ns.T2, ns.tau)
    model = PresentValueModel(ns.rho, ns.c, ns.r_bar, None, ns.phi)
    bubble = None
    if ns.bubble:
        a, b = _span(ns.bubble, None)
        bubble = BubbleSpec(a, b, ns.bubble_init, ns.bubble_rho)
    econ = simulate_economy(profile, model, ns.T, ns.sigma_eps, bubble, ns.obs_noise, RngStream(ns.seed))
    frame_to_csv(econ.to_frame(), out / "economy.csv")
    _write_manifest(out, ns, {"C": model.C, "kappa": model.kappa})


def _psy_outputs(out: Path, res, cvs, dm, prefix: str = "") -> None:
    with open(out / f"{prefix}bsadf.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "bsadf", "cv_10", "cv_05", "cv_01"])
        for i, t in enumerate(res.r2_index):
            w.writerow([_label(int(t), dm), _fmt(res.bsadf_sequence[i])]
                       + [_fmt(cvs.bsadf_cv[a][i]) for a in (0.10, 0.05, 0.01)])
    with open(out / f"{prefix}episodes.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "start", "end", "length"])
        for a in (0.10, 0.05, 0.01):
            for s, e in res.episodes[a]:
                w.writerow([a, _label(s, dm), _label(e, dm), e - s + 1])
    with open(out / f"{prefix}summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["statistic", "value"])
        w.writerow(["GSADF", f"{res.gsadf:.6f}"])
        for a in (0.10, 0.05, 0.01):
            w.writerow([f"CV{int(round(a * 100)):02d}", f"{res.critical_values[a]:.6f}"])
        w.writerow(["T", res.T])
        w.writerow(["min_window", res.min_window])


def cmd_psy(ns, out: Path) -> None:
    from .psy import PsyConfig, cached_critical_values, psy_test
    _need(ns, "input", "seed")
    frame, dm = _load(ns)
    col = ns.column or frame.names[0]
    if col not in frame.names:
        raise UsageError(f"column {col!r} not in input")
    y = frame[col]
    cfg = PsyConfig(ns.r0, ns.K)
    cvs = cached_critical_values(len(y), cfg, ns.reps, ns.seed, ns.cv_cache)
    res = psy_test(y, cfg, cvs, ns.constant_cv)
    _psy_outputs(out, res, cvs, dm)
    _write_manifest(out, ns, {"r0": cfg.r0(len(y)), "min_window": res.min_window, "T": len(y),
                              **_date_extra(dm)})


def cmd_cv(ns, out: Path) -> None:
    from .psy import PsyConfig, save_critical_values, simulate_critical_values
    _need(ns, "T", "seed")
    cfg = PsyConfig(ns.r0, ns.K)
    table = simulate_critical_values(ns.T, cfg, (0.10, 0.05, 0.01), ns.reps, ns.seed, ns.workers)
    with open(out / "cv_gsadf.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "gsadf_cv"])
        for a in table.levels:
            w.writerow([f"{a:.2f}", f"{table.gsadf_cv[a]:.6f}"])
    with open(out / "cv_bsadf.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["r2_index", "cv_10", "cv_05", "cv_01"])
        for i in range(table.T - table.min_window + 1):
            w.writerow([table.min_window - 1 + i] + [f"{table.bsadf_cv[a][i]:.6f}" for a in table.levels])
    if ns.cv_cache:
        save_critical_values(table, ns.cv_cache)
    _write_manifest(out, ns, {"r0": table.r0_fraction, "min_window": table.min_window})


def cmd_dols(ns, out: Path) -> None:
    from .coint import dols_fit, engle_granger, first_difference_fit, fit_to_csv, hansen_lc
    _need(ns, "input", "covariates", "train")
    frame, dm = _load(ns, [ns.price] + ns.covariates)
    a, b = _span(ns.train, dm)
    p, X = frame[ns.price].window(a, b), frame.select(ns.covariates).window(a, b)
    if ns.estimator == "dols":
        fit = dols_fit(p, X, ns.q, ns.bandwidth)
        resid = fit.residuals
    else:
        fit = first_difference_fit(p, X)
        resid = p - fit.counterfactual(X)
    fit_to_csv(fit, out / "fit.csv")
    frame_to_csv(Frame({"residual": resid.values}, resid.start_index), out / "residuals.csv")
    eg = engle_granger(resid, ns.eg_lags, len(ns.covariates))
    rows = [["engle_granger_t", f"{eg.adf.t_stat:.4f}"]]
    rows += [[f"eg_cv_{int(a * 100):02d}", f"{eg.critical_values[a]:.4f}"] for a in (0.01, 0.05, 0.10)]
    rows += [["eg_flat_cv", f"{eg.flat_cv:.2f}"], ["eg_reject_flat_cv", int(eg.reject_flat_cv)]]
    if ns.estimator == "dols" and len(ns.covariates) <= 5:
        h = hansen_lc(p, X, ns.q, ns.bandwidth)
        rows += [["hansen_lc", f"{h.lc:.4f}"], ["hansen_p", h.p_text],
                 ["hansen_cv_05", f"{h.cv_5:.3f}"], ["hansen_cv_01", f"{h.cv_1:.3f}"]]
    with open(out / "tests.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["statistic", "value"])
        w.writerows(rows)
    _write_manifest(out, ns, _date_extra(dm))


def cmd_adjust(ns, out: Path) -> None:
    from .adjust import (AdjustmentPlan, RobustnessRow, lagged_covariates, leave_one_out,
                         placebo_window, robustness_to_csv, run_decomposition,
                         stability_to_csv, sweep_training_windows)
    from .psy import PsyConfig
    _need(ns, "input", "covariates", "train", "eval", "seed")
    frame, dm = _load(ns, [ns.price] + ns.covariates)
    p, X = frame[ns.price], frame.select(ns.covariates)
    plan = AdjustmentPlan(_span(ns.train, dm), _span(ns.eval, dm), ns.estimator, ns.q, ns.bandwidth,
                          ns.lag_h, PsyConfig(ns.r0, ns.K), ns.reps, ns.seed,
                          _span(ns.span, dm) if ns.span else None, ns.cv_cache, ns.workers,
                          ns.constant_cv)
    d = run_decomposition(p, X, plan)
    pw = p.window(*d.span)
    frame_to_csv(Frame({"p": pw.values, "counterfactual": d.counterfactual.values,
                        "gap": d.gap.values}, d.span[0]), out / "gap.csv")
    _psy_outputs(out, d.adjusted_test, plan.critical_values(len(d.gap)), dm, "adjusted_")
    rows = [RobustnessRow("unadjusted", d.unadjusted_test), RobustnessRow("adjusted", d.adjusted_test)]
    if ns.loo:
        rows += leave_one_out(p, X, plan)[1:]
    if ns.lags:
        rows += lagged_covariates(p, X, plan, [int(h) for h in ns.lags])
    if ns.placebo:
        pa, pb = _span(ns.placebo, dm)
        rows.append(RobustnessRow(f"placebo {_label(pa, dm)}:{_label(pb, dm)}",
                                  placebo_window(p, X, plan, (pa, pb))))
    robustness_to_csv(rows, out / "robustness.csv")
    if ns.sweep:
        a, b = _span(ns.sweep, dm)
        stability_to_csv(sweep_training_windows(p, X, plan, range(a, b + 1)),
                         out / "training_stability.csv")
    _write_manifest(out, ns, {"span": list(d.span), **_date_extra(dm)})


def cmd_mc(ns, out: Path) -> None:
    from . import harness as H
    _need(ns, "experiment")
    if ns.seed is None:
        raise UsageError("mc requires --seed")
    over = {"seed": ns.seed, "workers": ns.workers, "cv_reps": ns.cv_reps, "lag_K": ns.K,
            "level": ns.level, "crn": not ns.no_crn, "cv_cache": ns.cv_cache}
    if ns.M is not None:
        over["M"] = ns.M
    if ns.T is not None:
        over["T"] = ns.T
    spec = H.default_spec(ns.experiment, **over)
    tag = ns.experiment
    if ns.experiment == "Overlap":
        res = H.run_overlap(spec)
        H.overlap_to_csv(res, out / "overlap_timeline.csv")
        H.overlap_summary_to_csv(res, out / "overlap_first.csv")
        with open(out / f"mc_{tag}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["statistic", "value"])
            w.writerows([["n_detect_raw", res.n_detect_raw], ["n_detect_adj", res.n_detect_adj],
                         ["raw_first_in_tech_phase", f"{res.raw_in_tech_phase:.4f}"],
                         ["adj_first_after_bubble_start", f"{res.adj_after_bubble_start:.4f}"]])
        meta = res.metadata
    else:
        table = H.run_stochastic_grid(spec) if ns.experiment == "Stochastic" else H.run_experiment(spec)
        H.table_to_csv(table, out / f"mc_{tag}.csv")
        for g in table.groups():
            H.plot_data_to_csv(table, out / (f"plot_{tag}_{g}.csv" if g else f"plot_{tag}.csv"), g)
        meta = table.metadata
    _write_manifest(out, ns, {"design": meta})


def cmd_diagnose(ns, out: Path) -> None:
    from .coint import granger_test, hansen_lc, log_growth, pca
    _need(ns, "input")
    frame, dm = _load(ns)
    if ns.granger:
        _need(ns, "seed")
        with open(out / "granger.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cause", "effect", "lag", "F", "p", "p_boot", "nobs"])
            for i, pair in enumerate(ns.granger):
                try:
                    c, e = pair.split(":")
                except ValueError:
                    raise UsageError(f"granger pair must be cause:effect, got {pair!r}")
                x, y = frame[c], frame[e]
                if ns.growth:
                    x, y = log_growth(x), log_growth(y)
                g = granger_test(x, y, ns.max_lag, ns.boot, RngStream(ns.seed, i))
                w.writerow([c, e, g.lag_order, f"{g.f_stat:.3f}", f"{g.p_standard:.3f}",
                            f"{g.p_bootstrap:.3f}", g.nobs])
    if ns.pca:
        r = pca(frame.select(ns.pca), ns.standardize)
        with open(out / "pca.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["component", "share"] + list(r.columns))
            for i in range(len(r.variance_explained)):
                w.writerow([f"PC{i + 1}", f"{r.variance_explained[i]:.4f}"]
                           + [f"{v:.4f}" for v in r.loadings[i]])
    if ns.price:
        _need(ns, "covariates")
        h = hansen_lc(frame[ns.price], frame.select(ns.covariates), ns.q, ns.bandwidth)
        with open(out / "hansen.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lc", "p", "cv_05", "cv_01", "m"])
            w.writerow([f"{h.lc:.4f}", h.p_text, f"{h.cv_5:.3f}", f"{h.cv_1:.3f}", h.m])
    _write_manifest(out, ns, _date_extra(dm))


COMMANDS = {"simulate": cmd_simulate, "psy": cmd_psy, "cv": cmd_cv, "dols": cmd_dols,
            "adjust": cmd_adjust, "mc": cmd_mc, "diagnose": cmd_diagnose}


def replay_namespace(manifest_path, out: str | None = None) -> argparse.Namespace:
    try:
        body = json.loads(Path(manifest_path).read_text())
        args = dict(body["args"])
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read manifest {manifest_path}: {exc}")
    if args.get("command") not in COMMANDS:
        raise UsageError(f"manifest has unknown command {args.get('command')!r}")
    if out is not None:
        args["out"] = out
    args["config"] = None
    return argparse.Namespace(**args)


def run(ns: argparse.Namespace) -> None:
    if ns.command == "replay":
        ns = replay_namespace(ns.manifest, ns.out)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    COMMANDS[ns.command](ns, out)


def main(argv: Sequence[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        ns = parse(argv)
        run(ns)
    except TechBubbleError as exc:
        print(f"error[{exc.category}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CODES[exc.category]
    except SystemExit as exc:
        return int(exc.code or 0)
    return 0


if __name__ == "__main__":
    sys.exit(main())
