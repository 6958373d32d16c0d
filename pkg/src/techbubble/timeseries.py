"""Integer-indexed series, aligned frames and seeded random streams."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .errors import AlignmentError, DegenerateInputError, ParseError


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TimeSeries:
    """Real-valued series observed at consecutive integer times.

    ``values[i]`` is the observation at time ``start_index + i``.
    """

    values: np.ndarray
    start_index: int = 0
    label: str = "y"

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))
        object.__setattr__(self, "start_index", int(self.start_index))
        if not np.all(np.isfinite(self.values)):
            raise DegenerateInputError(f"series {self.label!r} contains NaN or Inf")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def end_index(self) -> int:
        return self.start_index + len(self) - 1

    @property
    def index(self) -> np.ndarray:
        return np.arange(self.start_index, self.start_index + len(self))

    def position(self, t: int) -> int:
        """Array position of time ``t``; raises if out of range."""
        pos = int(t) - self.start_index
        if pos < 0 or pos >= len(self):
            raise AlignmentError(
                f"time {t} outside {self.label!r} [{self.start_index}, {self.end_index}]")
        return pos

    def at(self, t: int) -> float:
        return float(self.values[self.position(t)])

    def window(self, start: int, end: int) -> "TimeSeries":
        """Sub-series on the closed time interval [start, end]."""
        a, b = self.position(start), self.position(end)
        if b < a:
            raise AlignmentError(f"empty window [{start}, {end}]")
        return TimeSeries(self.values[a:b + 1], start, self.label)

    def with_values(self, values, label: str | None = None) -> "TimeSeries":
        return TimeSeries(values, self.start_index, self.label if label is None else label)

    def __sub__(self, other: "TimeSeries") -> "TimeSeries":
        check_aligned(self, other)
        return self.with_values(self.values - other.values)

    def __add__(self, other: "TimeSeries") -> "TimeSeries":
        check_aligned(self, other)
        return self.with_values(self.values + other.values)


def check_aligned(*series: TimeSeries) -> None:
    first = series[0]
    for s in series[1:]:
        if s.start_index != first.start_index or len(s) != len(first):
            raise AlignmentError(
                f"{s.label!r} [{s.start_index}, {s.end_index}] is not aligned with "
                f"{first.label!r} [{first.start_index}, {first.end_index}]")


@dataclass(frozen=True)
class Frame:
    """Named equal-length columns sharing one integer time origin."""

    columns: Mapping[str, np.ndarray]
    start_index: int = 0

    def __post_init__(self):
        cols = {str(k): _frozen(v) for k, v in dict(self.columns).items()}
        lengths = {len(v) for v in cols.values()}
        if len(lengths) > 1:
            raise AlignmentError(f"frame columns have unequal lengths {sorted(lengths)}")
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "start_index", int(self.start_index))

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def __len__(self) -> int:
        return len(next(iter(self.columns.values()))) if self.columns else 0

    @property
    def end_index(self) -> int:
        return self.start_index + len(self) - 1

    @property
    def index(self) -> np.ndarray:
        return np.arange(self.start_index, self.start_index + len(self))

    def __getitem__(self, name: str) -> TimeSeries:
        return TimeSeries(self.columns[name], self.start_index, name)

    def matrix(self, names: Iterable[str] | None = None) -> np.ndarray:
        names = self.names if names is None else list(names)
        if not names:
            return np.empty((len(self), 0))
        return np.column_stack([self.columns[n] for n in names])

    def with_column(self, series: TimeSeries) -> "Frame":
        if self.columns and (series.start_index != self.start_index or len(series) != len(self)):
            raise AlignmentError(f"column {series.label!r} is not aligned with the frame")
        cols = dict(self.columns)
        cols[series.label] = series.values
        return Frame(cols, series.start_index if not self.columns else self.start_index)

    def select(self, names: Iterable[str]) -> "Frame":
        return Frame({n: self.columns[n] for n in names}, self.start_index)

    def drop(self, name: str) -> "Frame":
        return Frame({n: v for n, v in self.columns.items() if n != name}, self.start_index)

    def window(self, start: int, end: int) -> "Frame":
        a, b = start - self.start_index, end - self.start_index
        if a < 0 or b >= len(self) or b < a:
            raise AlignmentError(
                f"window [{start}, {end}] outside frame [{self.start_index}, {self.end_index}]")
        return Frame({n: v[a:b + 1] for n, v in self.columns.items()}, start)

    def shift(self, h: int) -> "Frame":
        """Lag every column by ``h`` periods: the value at t becomes X[t - h]."""
        return Frame(self.columns, self.start_index + int(h))

    def scaled(self, factors: Mapping[str, float]) -> "Frame":
        return Frame({n: v * factors.get(n, 1.0) for n, v in self.columns.items()},
                     self.start_index)


def common_span(*objs) -> tuple[int, int]:
    start = max(o.start_index for o in objs)
    end = min(o.end_index for o in objs)
    if end < start:
        raise AlignmentError("inputs share no common time span")
    return start, end


def detrend_linear(y: TimeSeries) -> TimeSeries:
    """Residuals of an OLS fit of ``y`` on an intercept and time trend."""
    n = len(y)
    if n < 3:
        raise DegenerateInputError(f"detrending needs at least 3 observations, got {n}")
    t = np.arange(n, dtype=np.float64)
    tc = t - t.mean()
    yc = y.values - y.values.mean()
    slope = np.dot(tc, yc) / np.dot(tc, tc)
    return y.with_values(yc - slope * tc)


@dataclass(frozen=True)
class RngStream:
    """Identity of a reproducible random stream.

    Draws come from numpy's PCG64 bit generator seeded through
    ``SeedSequence(master_seed, spawn_key=(stream_id,))``. The sequence depends
    only on the two integers, never on worker count or call pattern.
    """

    master_seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.master_seed) & (2**64 - 1),
                                    spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))


def standard_normal_draws(stream: RngStream, n: int) -> np.ndarray:
    """First ``n`` standard normal draws of ``stream``."""
    if n < 1:
        raise DegenerateInputError("need at least one draw")
    return stream.generator().standard_normal(int(n))


def uniform_draws(stream: RngStream, n: int) -> np.ndarray:
    if n < 1:
        raise DegenerateInputError("need at least one draw")
    return stream.generator().random(int(n))


def derive_seed(master_seed: int, purpose: str) -> int:
    """A 63-bit seed for a named sub-purpose, independent of ``master_seed``'s own streams."""
    key = [ord(c) for c in purpose]
    ss = np.random.SeedSequence(int(master_seed) & (2**64 - 1), spawn_key=tuple(key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


# -- CSV ---------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def frame_to_csv(frame: Frame, path) -> None:
    """Write ``t`` plus every column using round-trippable float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + frame.names)
        mats = [frame.columns[n] for n in frame.names]
        for i, t in enumerate(frame.index):
            w.writerow([int(t)] + [_fmt(m[i]) for m in mats])


def frame_from_csv(path) -> Frame:
    """Read a strict numeric CSV with an integer ``t`` column."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if "t" not in header:
        raise ParseError(f"{path}: missing 't' column")
    ti = header.index("t")
    names = [h for i, h in enumerate(header) if i != ti]
    ts, data = [], {n: [] for n in names}
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
        try:
            ts.append(int(row[ti]))
        except ValueError:
            raise ParseError(f"{path}: row {r}, column 't': {row[ti]!r} is not an integer")
        for i, h in enumerate(header):
            if i == ti:
                continue
            try:
                data[h].append(float(row[i]))
            except ValueError:
                raise ParseError(f"{path}: row {r}, column {h!r}: {row[i]!r} is not numeric")
    if not ts:
        raise ParseError(f"{path}: no data rows")
    if ts != list(range(ts[0], ts[0] + len(ts))):
        raise ParseError(f"{path}: 't' must be consecutive integers")
    return Frame(data, ts[0])
