"""Net-demand and disturbance series: CSV ingestion, resampling, rolling windows.

CSV schema: a header row, an ISO-8601 timestamp column (fixed UTC offsets
allowed, all rows naive or all aware) and one or more numeric columns.
Samples must be strictly increasing on a uniform grid; up to
``MAX_GAP_STEPS`` consecutive missing samples are filled by linear
interpolation, longer gaps are rejected.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

MAX_GAP_STEPS = 3


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True, eq=False)
class ForecastSeries:
    start_time: datetime
    step_seconds: int
    values_gw: np.ndarray

    def __post_init__(self):
        if int(self.step_seconds) != self.step_seconds or self.step_seconds <= 0:
            raise DataError(f"step_seconds must be a positive integer, got {self.step_seconds}")
        values = np.array(self.values_gw, dtype=float).reshape(-1)
        if not np.all(np.isfinite(values)):
            raise DataError("series contains non-finite values")
        values.flags.writeable = False
        object.__setattr__(self, "values_gw", values)
        object.__setattr__(self, "step_seconds", int(self.step_seconds))

    def __len__(self) -> int:
        return len(self.values_gw)

    def __eq__(self, other):
        if not isinstance(other, ForecastSeries):
            return NotImplemented
        return (
            self.start_time == other.start_time
            and self.step_seconds == other.step_seconds
            and np.array_equal(self.values_gw, other.values_gw)
        )

    def time_at(self, index: int) -> datetime:
        return self.start_time + timedelta(seconds=self.step_seconds * index)

    def times(self) -> list[datetime]:
        return [self.time_at(k) for k in range(len(self))]


def _parse_time(text: str) -> datetime:
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    return datetime.fromisoformat(text)


def load_csv(
    path,
    value_column: str = "value_gw",
    time_column: str = "timestamp",
    scale: float = 1.0,
    step_seconds: int | None = None,
) -> ForecastSeries:
    """Read one value column of a CSV file into a :class:`ForecastSeries`.

    ``scale`` multiplies every value (1e-3 converts MW to GW). The step is
    the smallest spacing in the file unless ``step_seconds`` is given.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        for col in (time_column, value_column):
            if col not in header:
                raise DataError(f"{path}: missing column {col!r} (header: {header})")
        ti, vi = header.index(time_column), header.index(value_column)
        times, values = [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{line}: expected {len(header)} fields, found {len(row)}")
            try:
                stamp = _parse_time(row[ti])
            except ValueError:
                raise DataError(f"{path}:{line}: bad timestamp {row[ti]!r}") from None
            try:
                value = float(row[vi])
            except ValueError:
                raise DataError(f"{path}:{line}: bad number {row[vi]!r}") from None
            if not math.isfinite(value):
                raise DataError(f"{path}:{line}: non-finite value {row[vi]!r}")
            if times:
                if (stamp.tzinfo is None) != (times[-1][0].tzinfo is None):
                    raise DataError(f"{path}:{line}: mixes naive and offset-aware timestamps")
                if stamp <= times[-1][0]:
                    raise DataError(
                        f"{path}:{line}: timestamp {row[ti].strip()} does not increase "
                        f"(previous {times[-1][0].isoformat()} on line {times[-1][1]})"
                    )
            times.append((stamp, line))
            values.append(value * scale)
    if not values:
        raise DataError(f"{path}: no data rows")
    return _regularize(path, times, values, step_seconds)


def _regularize(path, times, values, step_seconds):
    t0 = times[0][0]
    offsets = [(t - t0).total_seconds() for t, _ in times]
    if step_seconds is None:
        if len(offsets) < 2:
            raise DataError(f"{path}: cannot infer the step from a single row; pass step_seconds")
        step_seconds = min(b - a for a, b in zip(offsets, offsets[1:]))
    if step_seconds <= 0 or step_seconds != int(step_seconds):
        raise DataError(f"{path}: step {step_seconds} s is not a positive whole number of seconds")
    step = int(step_seconds)
    idx = []
    for off, (_, line) in zip(offsets, times):
        k, rem = divmod(off, step)
        if rem:
            raise DataError(f"{path}:{line}: timestamp is off the {step} s grid")
        idx.append(int(k))
    out = np.full(idx[-1] + 1, np.nan)
    out[idx] = values
    for prev, nxt, (_, line) in zip(idx, idx[1:], times[1:]):
        missing = nxt - prev - 1
        if missing > MAX_GAP_STEPS:
            raise DataError(
                f"{path}:{line}: gap of {missing} missing samples exceeds {MAX_GAP_STEPS}"
            )
        if missing:
            frac = np.arange(1, missing + 1) / (missing + 1)
            out[prev + 1:nxt] = out[prev] + frac * (out[nxt] - out[prev])
    return ForecastSeries(t0, step, out)


def write_csv(series: ForecastSeries, path, value_column: str = "value_gw") -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["timestamp", value_column])
    for k, v in enumerate(series.values_gw):
        writer.writerow([series.time_at(k).isoformat(), repr(float(v))])
    Path(path).write_text(buf.getvalue())


def resample(series: ForecastSeries, target_step_seconds: int) -> ForecastSeries:
    """Linear interpolation when refining, left-aligned bin means when coarsening.

    The coarse-to-fine direction keeps both endpoints, so the span must be a
    whole number of target steps. Coarsening requires an integral ratio; a
    trailing partial bin is averaged over the samples it has.
    """
    if len(series) == 0:
        raise DataError("cannot resample an empty series")
    if int(target_step_seconds) != target_step_seconds or target_step_seconds <= 0:
        raise DataError(f"target step must be a positive integer, got {target_step_seconds}")
    target = int(target_step_seconds)
    step = series.step_seconds
    if target == step:
        return series
    values = series.values_gw
    if target < step:
        span = step * (len(values) - 1)
        if span % target:
            raise DataError(f"span of {span} s is not a multiple of {target} s")
        old_t = np.arange(len(values)) * step
        new_t = np.arange(span // target + 1) * target
        return ForecastSeries(series.start_time, target, np.interp(new_t, old_t, values))
    if target % step:
        raise DataError(f"cannot coarsen {step} s to {target} s: ratio is not integral")
    k = target // step
    bins = [values[j:j + k].mean() for j in range(0, len(values), k)]
    return ForecastSeries(series.start_time, target, np.array(bins))


@dataclass(frozen=True)
class ForecastProvider:
    """Day-ahead forecast with near-term disturbance injected into each window.

    By default the disturbance perturbs only the first ``injection_window_steps``
    entries of a window; ``perturb_whole_horizon`` adds it over the full window.
    Disturbance values are additive in GW as given.
    """

    base: ForecastSeries
    disturbance: ForecastSeries | None = None
    injection_window_steps: int = 6
    perturb_whole_horizon: bool = False

    def __post_init__(self):
        if self.injection_window_steps < 0:
            raise DataError("injection window must be nonnegative")
        d = self.disturbance
        if d is not None:
            if d.step_seconds != self.base.step_seconds:
                raise DataError(
                    f"disturbance step {d.step_seconds} s differs from net-demand step {self.base.step_seconds} s"
                )
            if d.start_time != self.base.start_time:
                lag = (self.base.start_time - d.start_time).total_seconds()
                k, rem = divmod(lag, d.step_seconds)
                if lag < 0 or rem:
                    raise DataError(
                        f"disturbance starting {d.start_time.isoformat()} cannot be aligned "
                        f"with net demand starting {self.base.start_time.isoformat()}"
                    )
                aligned = ForecastSeries(self.base.start_time, d.step_seconds, d.values_gw[int(k):])
                object.__setattr__(self, "disturbance", aligned)

    def __len__(self) -> int:
        n = len(self.base)
        if self.disturbance is not None:
            n = min(n, len(self.disturbance))
        return n

    def covers(self, steps: int) -> bool:
        return len(self) >= steps

    def window(self, t0: int, tau: int) -> np.ndarray:
        if t0 < 0 or tau <= 0 or t0 + tau > len(self.base):
            raise IndexError(f"window [{t0}, {t0 + tau}) outside forecast of length {len(self.base)}")
        out = np.array(self.base.values_gw[t0:t0 + tau], dtype=float)
        if self.disturbance is not None:
            head = tau if self.perturb_whole_horizon else min(self.injection_window_steps, tau)
            if t0 + head > len(self.disturbance):
                raise IndexError(f"disturbance does not cover steps [{t0}, {t0 + head})")
            out[:head] += self.disturbance.values_gw[t0:t0 + head]
        return out

    def realized(self, t0: int, steps: int) -> np.ndarray:
        """Base plus disturbance, the net demand that actually materializes."""
        out = np.array(self.base.values_gw[t0:t0 + steps], dtype=float)
        if self.disturbance is not None:
            out += self.disturbance.values_gw[t0:t0 + steps]
        return out
