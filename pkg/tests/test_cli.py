import csv
import json

import numpy as np
import pytest

from techbubble import cli
from techbubble.cli import DateMap, IngestSchema, ingest_csv, spline_upsample
from techbubble.errors import ParseError
from techbubble.timeseries import RngStream


def _write(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
    return path


def _rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _manifest(d):
    return json.loads((d / "manifest.json").read_text())


@pytest.fixture
def monthly(tmp_path):
    """240 months of a price cointegrated with two covariates, explosive from month 170."""
    g = RngStream(41, 0).generator()
    n = 240
    x1 = np.cumsum(0.02 + 0.1 * g.standard_normal(n))
    x2 = np.cumsum(0.01 + 0.1 * g.standard_normal(n))
    b = np.zeros(n)
    for i in range(170, n):
        b[i] = 1.04 * b[i - 1] + 0.3 * (i == 170)
    p = 1.0 + 0.8 * x1 + 0.5 * x2 + 0.05 * g.standard_normal(n) + b
    dm = DateMap("2000-01")
    rows = [[dm.to_date(i + 1), p[i], x1[i], x2[i], x1[i]] for i in range(n)]
    return _write(tmp_path / "monthly.csv", ["date", "p", "x1", "x2", "x1_copy"], rows)


def test_spline_reproduces_knots_and_lines():
    v = np.array([1.0, 3.0, 2.0, 5.0, 4.0])
    up = spline_upsample(v, 3)
    assert len(up) == 13
    assert np.allclose(up[::3], v, atol=1e-12)
    line = spline_upsample(2.0 + 0.5 * np.arange(6), 3)
    assert np.allclose(line, 2.0 + 0.5 * np.arange(16) / 3, atol=1e-9)
    with pytest.raises(ParseError):
        spline_upsample([1.0])


def test_date_map_roundtrip():
    dm = DateMap("1995-11", 1)
    assert dm.to_index("1995-11") == 1 and dm.to_index("1996-02") == 4
    for t in (1, 2, 3, 14, 400):
        assert dm.to_index(dm.to_date(t)) == t
    with pytest.raises(ParseError):
        dm.to_index("1996-13")


def test_ingest_reports_row_and_column(tmp_path):
    rows = [[t, 1.0 + t, 0.5] for t in range(1, 31)]
    rows[16][2] = "abc"
    path = _write(tmp_path / "bad.csv", ["t", "p", "tfp"], rows)
    with pytest.raises(ParseError, match="row 17, column 'tfp'"):
        ingest_csv(path)


def test_ingest_spline_columns_and_trimming(tmp_path):
    rows = []
    for t in range(1, 11):
        knot = (t - 2) % 3 == 0 and 2 <= t <= 8
        rows.append([t, float(t), float(t) if knot else ""])
    path = _write(tmp_path / "q.csv", ["t", "p", "q"], rows)
    f, dm = ingest_csv(path, IngestSchema(spline_columns=("q",)))
    assert dm is None
    assert f.start_index == 2 and len(f) == 7
    assert np.allclose(f["q"].values, np.arange(2.0, 9.0))
    with pytest.raises(ParseError, match="missing value"):
        ingest_csv(path)


def test_ingest_requires_consecutive_time(tmp_path):
    path = _write(tmp_path / "gap.csv", ["t", "p"], [[1, 1.0], [2, 2.0], [4, 3.0]])
    with pytest.raises(ParseError, match="consecutive"):
        ingest_csv(path)


def test_cv_writes_three_levels(tmp_path):
    out = tmp_path / "cv"
    assert cli.main(["cv", "--T", "100", "--reps", "200", "--seed", "3", "--out", str(out)]) == 0
    rows = _rows(out / "cv_gsadf.csv")
    assert rows[0] == ["level", "gsadf_cv"]
    assert [r[0] for r in rows[1:]] == ["0.10", "0.05", "0.01"]
    vals = [float(r[1]) for r in rows[1:]]
    assert vals[0] < vals[1] < vals[2]
    assert len(_rows(out / "cv_bsadf.csv")) == 1 + 100 - _manifest(out)["min_window"] + 1


def test_psy_auto_window_recorded(tmp_path):
    y = np.cumsum(RngStream(42, 0).generator().standard_normal(611))
    path = _write(tmp_path / "series.csv", ["t", "y"], [[t + 1, v] for t, v in enumerate(y)])
    out = tmp_path / "psy"
    code = cli.main(["psy", "--input", str(path), "--r0", "auto", "--reps", "200", "--seed", "1",
                     "--out", str(out)])
    assert code == 0
    m = _manifest(out)
    assert round(m["r0"], 3) == 0.083 and m["min_window"] == 50 and m["T"] == 611
    assert _rows(out / "bsadf.csv")[0] == ["t", "bsadf", "cv_10", "cv_05", "cv_01"]
    summary = dict(_rows(out / "summary.csv")[1:])
    assert set(summary) >= {"GSADF", "CV05", "T", "min_window"}


def test_mc_is_byte_reproducible(tmp_path):
    args = ["mc", "--experiment", "A", "--M", "50", "--T", "200", "--seed", "7"]
    assert cli.main(args + ["--out", str(tmp_path / "a")]) == 0
    assert cli.main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("mc_A.csv", "plot_A.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len(_rows(tmp_path / "a" / "mc_A.csv")) == 12
    assert _manifest(tmp_path / "a")["design"]["M"] == 50


def test_simulate_and_replay(tmp_path):
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--seed", "5", "--T", "120", "--bubble", "90:110",
                     "--out", str(out)]) == 0
    rows = _rows(out / "economy.csv")
    assert rows[0] == ["t", "delta", "pv_term", "d", "f", "b", "p", "drift"]
    assert len(rows) == 121
    again = tmp_path / "again"
    assert cli.main(["replay", str(out / "manifest.json"), "--out", str(again)]) == 0
    assert (out / "economy.csv").read_bytes() == (again / "economy.csv").read_bytes()


def test_dols_outputs(monthly, tmp_path):
    out = tmp_path / "dols"
    code = cli.main(["dols", "--input", str(monthly), "--covariates", "x1,x2",
                     "--train", "2000-01:2009-12", "--out", str(out)])
    assert code == 0
    fit = _rows(out / "fit.csv")
    assert [r[0] for r in fit[1:4]] == ["const", "x1", "x2"]
    assert abs(float(fit[2][1]) - 0.8) < 0.1
    tests = dict(_rows(out / "tests.csv")[1:])
    assert {"engle_granger_t", "eg_cv_05", "hansen_lc", "hansen_p"} <= set(tests)
    assert _rows(out / "residuals.csv")[0] == ["t", "residual"]


def test_adjust_outputs(monthly, tmp_path):
    out = tmp_path / "adj"
    code = cli.main(["adjust", "--input", str(monthly), "--covariates", "x1,x2",
                     "--train", "2000-01:2009-12", "--eval", "2010-01:2019-12",
                     "--reps", "200", "--seed", "2", "--loo", "--placebo", "2001-01:2008-12",
                     "--sweep", "2009-10:2010-02", "--out", str(out)])
    assert code == 0
    gap = _rows(out / "gap.csv")
    assert gap[0] == ["t", "p", "counterfactual", "gap"] and len(gap) == 241
    specs = [r[0] for r in _rows(out / "robustness.csv")[1:]]
    assert specs[:4] == ["unadjusted", "adjusted", "drop x1", "drop x2"]
    assert specs[-1] == "placebo 2001-01:2008-12"
    assert len(_rows(out / "training_stability.csv")) == 6
    # episodes are labelled by date
    ep = _rows(out / "adjusted_episodes.csv")
    assert len(ep) > 1 and all(len(r[1]) == 7 and r[1][4] == "-" for r in ep[1:])
    assert _manifest(out)["date_map"]["first_date"] == "2000-01"


def test_diagnose_outputs(monthly, tmp_path):
    out = tmp_path / "diag"
    code = cli.main(["diagnose", "--input", str(monthly), "--granger", "x1:p,p:x1",
                     "--boot", "49", "--seed", "4", "--pca", "x1,x2", "--price", "p",
                     "--covariates", "x1,x2", "--out", str(out)])
    assert code == 0
    g = _rows(out / "granger.csv")
    assert g[0][:2] == ["cause", "effect"] and len(g) == 3
    pc = _rows(out / "pca.csv")
    assert pc[0] == ["component", "share", "x1", "x2"]
    assert float(pc[1][1]) + float(pc[2][1]) == pytest.approx(1.0, abs=1e-3)
    assert _rows(out / "hansen.csv")[0][0] == "lc"


def test_exit_codes_and_messages(monthly, tmp_path, capsys):
    assert cli.main(["psy", "--input", str(tmp_path / "none.csv"), "--seed", "1",
                     "--out", str(tmp_path / "x")]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error[usage] UsageError: ")
    assert cli.main(["cv", "--T", "100", "--out", str(tmp_path / "x")]) == 2
    assert "--seed" in capsys.readouterr().err
    assert cli.main([]) == 2
    assert capsys.readouterr().err.rstrip().endswith("error[usage] UsageError: no command given")

    short = _write(tmp_path / "short.csv", ["t", "y"], [[t, float(t)] for t in range(1, 20)])
    assert cli.main(["psy", "--input", str(short), "--seed", "1", "--out", str(tmp_path / "x")]) == 3
    assert capsys.readouterr().err.startswith("error[data] SampleTooShortError: ")

    code = cli.main(["dols", "--input", str(monthly), "--covariates", "x1,x1_copy",
                     "--train", "1:120", "--out", str(tmp_path / "x")])
    assert code == 4
    err = capsys.readouterr().err
    assert err.startswith("error[numeric] SingularDesignError: ") and "x1_copy" in err


def test_config_file_merge(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# critical values\nT = 80\nreps = 200\nseed = 6\n")
    out = tmp_path / "c"
    assert cli.main(["cv", "--config", str(cfg), "--T", "90", "--out", str(out)]) == 0
    m = _manifest(out)
    assert m["args"]["T"] == 90 and m["args"]["reps"] == 200 and m["seed"] == 6

    cfg.write_text("T = 80\nrepz = 200\n")
    assert cli.main(["cv", "--config", str(cfg), "--out", str(out)]) == 2
    err = capsys.readouterr().err
    assert err.startswith("error[usage] ConfigError: ") and "repz" in err


def test_artifact_roundtrip(tmp_path):
    from techbubble.dgp import PresentValueModel, TechShockProfile, simulate_economy
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--seed", "9", "--T", "150", "--out", str(out)]) == 0
    frame, _ = ingest_csv(out / "economy.csv")
    econ = simulate_economy(TechShockProfile(), PresentValueModel(), 150, stream=RngStream(9))
    ref = econ.to_frame()
    assert frame.names == ref.names and frame.start_index == ref.start_index
    assert np.array_equal(frame.matrix(), ref.matrix())
