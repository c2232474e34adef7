"""Daily count series: ingestion from cumulative case CSVs, event-centered
windowing, and regional aggregation."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "DataError",
    "DailyCountSeries",
    "StudyWindow",
    "ingest_cumulative",
    "slice_window",
    "aggregate_excluding",
    "align_series",
    "read_nyt_rows",
    "series_from_nyt",
    "load_populations",
    "write_series_csv",
    "read_series_csv",
]

# RegionTable: mapping region_id -> population (persons, > 0)
RegionTable = Mapping[str, int]


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class DailyCountSeries:
    """Nonnegative event counts, one per consecutive day from ``origin``."""

    origin: dt.date
    counts: np.ndarray
    region_id: str = ""

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size < 1:
            raise DataError("counts must be a nonempty 1-d sequence")
        if (counts < 0).any():
            raise DataError("counts must be nonnegative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def __len__(self) -> int:
        return int(self.counts.size)

    def date_of(self, day: int) -> dt.date:
        return self.origin + dt.timedelta(days=int(day))

    def index_of(self, date: dt.date) -> int:
        return (date - self.origin).days

    def values(self) -> np.ndarray:
        """Counts as a writable float64 copy (for numerics)."""
        return self.counts.astype(np.float64)


@dataclass(frozen=True)
class StudyWindow:
    """Analysis window indices: start t0, event day t_star, estimated excess
    end t_prime, horizon T (last day index)."""

    t0: int
    t_star: int
    T: int
    t_prime: int | None = None
    truncated: bool = False

    def __post_init__(self):
        if not (self.t0 < self.t_star < self.T):
            raise DataError(
                f"require t0 < t_star < T, got ({self.t0}, {self.t_star}, {self.T})"
            )
        if self.t_prime is not None and not (self.t_star < self.t_prime <= self.T):
            raise DataError(
                f"t_prime must lie in (t_star, T], got {self.t_prime}"
            )

    def with_t_prime(self, t_prime: int) -> "StudyWindow":
        return replace(self, t_prime=int(t_prime))

    @property
    def n_days(self) -> int:
        return self.T - self.t0 + 1

    @property
    def duration(self) -> int:
        return 0 if self.t_prime is None else self.t_prime - self.t_star


def ingest_cumulative(
    rows: Iterable[tuple[dt.date, str, int]], region: str
) -> DailyCountSeries:
    """Convert cumulative case records into a daily count series.

    ``rows`` holds (date, region_id, cumulative_cases) tuples. Records for the
    chosen region are first-differenced; missing interior dates carry the
    cumulative value forward (daily count 0) and negative differences from
    upstream data corrections are clamped to 0.
    """
    by_date: dict[dt.date, int] = {}
    for date, region_id, cumulative in rows:
        if region_id != region:
            continue
        cumulative = int(cumulative)
        if cumulative < 0:
            raise DataError(f"negative cumulative count on {date}")
        if date in by_date and by_date[date] != cumulative:
            raise DataError(f"ambiguous input: conflicting rows for {region} on {date}")
        by_date[date] = cumulative
    if not by_date:
        raise DataError(f"region not found: {region!r}")
    dates = sorted(by_date)
    origin = dates[0]
    n_days = (dates[-1] - origin).days + 1
    cum = np.empty(n_days, dtype=np.int64)
    level = 0
    it = iter(dates)
    next_date = next(it)
    for d in range(n_days):
        day = origin + dt.timedelta(days=d)
        if next_date is not None and day == next_date:
            level = by_date[day]
            next_date = next(it, None)
        cum[d] = level
    daily = np.diff(cum, prepend=0)
    np.clip(daily, 0, None, out=daily)
    return DailyCountSeries(origin=origin, counts=daily, region_id=region)


def slice_window(
    series: DailyCountSeries,
    event_date: dt.date,
    pre_days: int = 30,
    post_days: int = 150,
) -> tuple[DailyCountSeries, StudyWindow]:
    """Cut the event-centered analysis window out of a series.

    Returns the sub-series over [event - pre_days, event + post_days],
    truncated silently at the data boundaries (the window carries a
    ``truncated`` flag), along with the StudyWindow indices relative to the
    sub-series: t0 = 0, t_star = index of the event date, T = last index.
    """
    if pre_days < 1 or post_days < 1:
        raise DataError("pre_days and post_days must be >= 1")
    idx = series.index_of(event_date)
    if idx < 0 or idx >= len(series):
        raise DataError(f"event outside data: {event_date}")
    lo = max(0, idx - pre_days)
    hi = min(len(series) - 1, idx + post_days)
    t_star = idx - lo
    T = hi - lo
    if t_star < 1 or T - t_star < 1:
        raise DataError("window too short: need at least one day on each side of the event")
    truncated = lo != idx - pre_days or hi != idx + post_days
    sub = DailyCountSeries(
        origin=series.date_of(lo),
        counts=series.counts[lo : hi + 1],
        region_id=series.region_id,
    )
    return sub, StudyWindow(t0=0, t_star=t_star, T=T, truncated=truncated)


def aggregate_excluding(
    all_series: Sequence[DailyCountSeries],
    excluded: set[str] | frozenset[str] = frozenset(),
    label: str = "aggregate",
) -> DailyCountSeries:
    """Element-wise sum of daily counts over the non-excluded regions.

    All series must share one calendar (same origin and length); use
    ``align_series`` first when they do not.
    """
    kept = [s for s in all_series if s.region_id not in excluded]
    if not kept:
        raise DataError("empty aggregate: all regions excluded")
    origin = kept[0].origin
    n = len(kept[0])
    for s in kept[1:]:
        if s.origin != origin or len(s) != n:
            raise DataError("series do not share one calendar; align them first")
    total = np.zeros(n, dtype=np.int64)
    for s in kept:
        total += s.counts
    return DailyCountSeries(origin=origin, counts=total, region_id=label)


def align_series(
    all_series: Sequence[DailyCountSeries],
) -> list[DailyCountSeries]:
    """Pad every series with zero-count days onto the union calendar."""
    if not all_series:
        return []
    origin = min(s.origin for s in all_series)
    end = max(s.date_of(len(s) - 1) for s in all_series)
    n = (end - origin).days + 1
    out = []
    for s in all_series:
        shift = (s.origin - origin).days
        counts = np.zeros(n, dtype=np.int64)
        counts[shift : shift + len(s)] = s.counts
        out.append(DailyCountSeries(origin=origin, counts=counts, region_id=s.region_id))
    return out


# --- file formats -----------------------------------------------------------

def read_nyt_rows(path) -> list[tuple[dt.date, str, str, int]]:
    """Read a county-level cumulative case CSV with header
    date,county,state,fips,cases,deaths. Returns (date, fips, state, cases)
    rows; rows without a fips code are skipped."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        required = {"date", "county", "state", "fips", "cases", "deaths"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise DataError(
                f"expected header date,county,state,fips,cases,deaths; got {reader.fieldnames}"
            )
        for i, row in enumerate(reader, start=2):
            fips = (row["fips"] or "").strip()
            if not fips:
                continue
            try:
                date = dt.date.fromisoformat(row["date"])
                cases = int(row["cases"])
            except ValueError as exc:
                raise DataError(f"malformed row {i}: {exc}") from exc
            rows.append((date, fips, row["state"], cases))
    return rows


def series_from_nyt(path, region: str) -> DailyCountSeries:
    rows = read_nyt_rows(path)
    return ingest_cumulative(((d, f, c) for d, f, _, c in rows), region)


def state_series_from_nyt(path, state: str) -> list[DailyCountSeries]:
    """One aligned series per county of ``state``."""
    rows = read_nyt_rows(path)
    regions = sorted({f for _, f, s, _ in rows if s == state})
    if not regions:
        raise DataError(f"region not found: no counties for state {state!r}")
    per_county = [
        ingest_cumulative(((d, f, c) for d, f, s, c in rows if s == state), r)
        for r in regions
    ]
    return align_series(per_county)


def load_populations(path) -> dict[str, int]:
    """Read a population CSV with header fips,population."""
    pops: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"fips", "population"}.issubset(reader.fieldnames):
            raise DataError(f"expected header fips,population; got {reader.fieldnames}")
        for i, row in enumerate(reader, start=2):
            pop = int(row["population"])
            if pop <= 0:
                raise DataError(f"malformed row {i}: population must be positive")
            pops[row["fips"].strip()] = pop
    return pops


def write_series_csv(series: DailyCountSeries, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "count"])
        for d, count in enumerate(series.counts):
            writer.writerow([series.date_of(d).isoformat(), int(count)])


def read_series_csv(path, region_id: str = "") -> DailyCountSeries:
    dates, counts = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"date", "count"}.issubset(reader.fieldnames):
            raise DataError(f"expected header date,count; got {reader.fieldnames}")
        for i, row in enumerate(reader, start=2):
            try:
                dates.append(dt.date.fromisoformat(row["date"]))
                counts.append(int(row["count"]))
            except ValueError as exc:
                raise DataError(f"malformed row {i}: {exc}") from exc
    if not dates:
        raise DataError("empty series file")
    for a, b in zip(dates, dates[1:]):
        if (b - a).days != 1:
            raise DataError(f"dates must be consecutive; gap after {a}")
    return DailyCountSeries(origin=dates[0], counts=np.array(counts), region_id=region_id)
