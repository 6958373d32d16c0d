import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from techbubble.errors import AlignmentError, DegenerateInputError, ParseError
from techbubble.timeseries import (Frame, RngStream, TimeSeries, check_aligned, common_span,
                                   derive_seed, detrend_linear, frame_from_csv, frame_to_csv,
                                   standard_normal_draws, uniform_draws)


def test_series_indexing():
    y = TimeSeries([1.0, 2.0, 3.0, 4.0], start_index=10)
    assert y.end_index == 13
    assert y.at(12) == 3.0
    w = y.window(11, 12)
    assert w.start_index == 11 and list(w.values) == [2.0, 3.0]
    with pytest.raises(AlignmentError):
        y.at(14)
    with pytest.raises(AlignmentError):
        y.window(12, 11)


def test_series_is_immutable_and_finite():
    y = TimeSeries([1.0, 2.0])
    with pytest.raises(ValueError):
        y.values[0] = 5.0
    with pytest.raises(DegenerateInputError):
        TimeSeries([1.0, np.nan])


def test_arithmetic_requires_alignment():
    a = TimeSeries([1.0, 2.0], 0)
    b = TimeSeries([1.0, 2.0], 1)
    with pytest.raises(AlignmentError):
        a - b
    assert list((a + a).values) == [2.0, 4.0]
    with pytest.raises(AlignmentError):
        check_aligned(a, b)


def test_frame_operations():
    f = Frame({"x": [1.0, 2.0, 3.0], "z": [4.0, 5.0, 6.0]}, start_index=5)
    assert f.names == ["x", "z"]
    assert f["z"].at(6) == 5.0
    assert f.window(6, 7).matrix().tolist() == [[2.0, 5.0], [3.0, 6.0]]
    assert f.drop("x").names == ["z"]
    # shifting by h makes X_{t-h} the value at t
    s = f.shift(2)
    assert s["x"].at(7) == f["x"].at(5)
    assert common_span(f, s) == (7, 7)
    with pytest.raises(AlignmentError):
        Frame({"a": [1.0], "b": [1.0, 2.0]})
    with pytest.raises(AlignmentError):
        f.window(4, 6)


def test_detrend_hand_values():
    r = detrend_linear(TimeSeries([1.0, 2.0, 4.0]))
    assert np.allclose(r.values, [1 / 6, -1 / 3, 1 / 6], atol=1e-14)


def test_detrend_linear_and_constant_inputs():
    t = np.arange(50)
    assert np.allclose(detrend_linear(TimeSeries(2 + 3 * t)).values, 0.0, atol=1e-11)
    assert np.allclose(detrend_linear(TimeSeries(np.full(20, 7.0))).values, 0.0, atol=1e-12)
    with pytest.raises(DegenerateInputError):
        detrend_linear(TimeSeries([1.0, 2.0]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=60))
def test_detrend_residuals_orthogonal(vals):
    r = detrend_linear(TimeSeries(vals)).values
    t = np.arange(len(vals))
    scale = 1.0 + np.max(np.abs(vals)) * len(vals) ** 2
    assert abs(r.sum()) <= 1e-9 * scale
    assert abs(r @ t) <= 1e-9 * scale * len(vals)


def test_stream_determinism_and_independence():
    a = standard_normal_draws(RngStream(7, 3), 100)
    b = standard_normal_draws(RngStream(7, 3), 100)
    c = standard_normal_draws(RngStream(7, 4), 100)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    u = uniform_draws(RngStream(7, 3), 10)
    assert np.all((u >= 0) & (u < 1))


def test_stream_moments():
    z = standard_normal_draws(RngStream(1, 0), 100_000)
    assert abs(z.mean()) < 0.02
    assert abs(z.var() - 1.0) < 0.03


def test_prefix_stability():
    # the first n draws do not depend on how many are requested
    long = standard_normal_draws(RngStream(5, 1), 50)
    assert np.array_equal(standard_normal_draws(RngStream(5, 1), 20), long[:20])


def test_derived_seeds_differ():
    s1, s2 = derive_seed(1, "critical-values"), derive_seed(1, "pd-noise")
    assert s1 != s2 and s1 == derive_seed(1, "critical-values")
    assert 0 <= s1 < 2**63


def test_csv_roundtrip(tmp_path):
    f = Frame({"a": [0.1, 1 / 3, -2e-17], "b": [1.0, 2.0, 3.0]}, start_index=-1)
    frame_to_csv(f, tmp_path / "f.csv")
    g = frame_from_csv(tmp_path / "f.csv")
    assert g.start_index == -1
    assert np.array_equal(g.matrix(), f.matrix())


def test_csv_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t,a\n1,0.5\n2,oops\n")
    with pytest.raises(ParseError, match="row 2, column 'a'"):
        frame_from_csv(p)
    p.write_text("t,a\n1,0.5\n3,0.7\n")
    with pytest.raises(ParseError, match="consecutive"):
        frame_from_csv(p)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=60))
def test_detrend_is_idempotent(vals):
    once = detrend_linear(TimeSeries(vals))
    twice = detrend_linear(once)
    scale = 1.0 + np.max(np.abs(vals))
    assert np.allclose(twice.values, once.values, atol=1e-9 * scale)


def test_column_extract_and_reinsert_is_identity():
    f = Frame({"x": [1.0, 2.0, 3.0], "z": [4.0, 5.0, 6.0]}, start_index=3)
    back = f.drop("x").with_column(f["x"]).select(f.names)
    assert back.names == f.names and back.start_index == f.start_index
    assert np.array_equal(back.matrix(), f.matrix())


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(1, 40), min_size=1, max_size=6))
def test_stream_chunking_invariance(chunks):
    gen = RngStream(3, 9).generator()
    pieces = np.concatenate([gen.standard_normal(n) for n in chunks])
    assert np.array_equal(pieces, standard_normal_draws(RngStream(3, 9), sum(chunks)))
