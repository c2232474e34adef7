import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eventimpact.catalog import (
    DailyCountSeries,
    DataError,
    StudyWindow,
    aggregate_excluding,
    align_series,
    ingest_cumulative,
    load_populations,
    read_series_csv,
    series_from_nyt,
    slice_window,
    write_series_csv,
)
from conftest import make_series

D0 = dt.date(2020, 6, 1)


def rows_for(region, dated_values):
    return [(date, region, value) for date, value in dated_values]


class TestIngest:
    def test_differencing_identity(self):
        rows = rows_for("X", [(D0 + dt.timedelta(days=i), v)
                              for i, v in enumerate([10, 12, 12, 15])])
        series = ingest_cumulative(rows, "X")
        assert list(series.counts) == [10, 2, 0, 3]
        assert series.origin == D0

    def test_negative_corrections_clamp(self):
        rows = rows_for("X", [(D0, 5), (D0 + dt.timedelta(days=1), 3)])
        series = ingest_cumulative(rows, "X")
        assert list(series.counts) == [5, 0]

    def test_gap_fill_forward(self):
        rows = rows_for("X", [(dt.date(2020, 1, 1), 4), (dt.date(2020, 1, 3), 9)])
        series = ingest_cumulative(rows, "X")
        assert list(series.counts) == [4, 0, 5]

    def test_region_not_found(self):
        with pytest.raises(DataError, match="region not found"):
            ingest_cumulative(rows_for("X", [(D0, 1)]), "Y")

    def test_conflicting_duplicates(self):
        rows = [(D0, "X", 4), (D0, "X", 5)]
        with pytest.raises(DataError, match="ambiguous input"):
            ingest_cumulative(rows, "X")

    def test_identical_duplicates_ok(self):
        rows = [(D0, "X", 4), (D0, "X", 4), (D0 + dt.timedelta(days=1), "X", 6)]
        assert list(ingest_cumulative(rows, "X").counts) == [4, 2]

    @given(st.lists(st.integers(min_value=0, max_value=50), min_size=1, max_size=40))
    @settings(max_examples=50, deadline=None)
    def test_diff_then_cumsum_roundtrip(self, daily):
        cumulative = np.cumsum(daily)
        rows = rows_for("X", [(D0 + dt.timedelta(days=i), int(v))
                              for i, v in enumerate(cumulative)])
        series = ingest_cumulative(rows, "X")
        assert list(np.cumsum(series.counts)) == list(cumulative)


class TestSliceWindow:
    def test_default_window(self):
        series = make_series(np.ones(365, dtype=int))
        sub, window = slice_window(series, series.date_of(200))
        assert len(sub) == 181
        assert (window.t0, window.t_star, window.T) == (0, 30, 180)
        assert not window.truncated

    def test_left_truncation(self):
        series = make_series(np.ones(365, dtype=int))
        sub, window = slice_window(series, series.date_of(10), pre_days=30)
        assert window.t_star == 10
        assert window.truncated

    def test_minimal_window(self):
        series = make_series(np.ones(30, dtype=int))
        sub, window = slice_window(series, series.date_of(10), pre_days=1, post_days=1)
        assert len(sub) == 3
        assert window.t_star == 1

    def test_event_outside_data(self):
        series = make_series([1, 2, 3])
        with pytest.raises(DataError, match="event outside data"):
            slice_window(series, series.origin + dt.timedelta(days=100))

    def test_window_too_short(self):
        series = make_series(np.ones(10, dtype=int))
        with pytest.raises(DataError, match="window too short"):
            slice_window(series, series.origin)  # event on the first day

    @given(
        n=st.integers(min_value=5, max_value=400),
        event=st.integers(min_value=1, max_value=398),
        pre=st.integers(min_value=1, max_value=60),
        post=st.integers(min_value=1, max_value=200),
    )
    @settings(max_examples=80, deadline=None)
    def test_window_length_formula(self, n, event, pre, post):
        if event >= n - 1:
            event = n - 2
        series = make_series(np.ones(n, dtype=int))
        sub, window = slice_window(series, series.date_of(event), pre, post)
        expected = min(n - 1, event + post) - max(0, event - pre) + 1
        assert len(sub) == expected
        assert window.T == len(sub) - 1


class TestAggregate:
    def test_sum_all(self):
        a = make_series([1, 2], region_id="A")
        b = make_series([3, 4], region_id="B")
        assert list(aggregate_excluding([a, b]).counts) == [4, 6]

    def test_exclusion(self):
        a = make_series([1, 2], region_id="A")
        b = make_series([3, 4], region_id="B")
        assert list(aggregate_excluding([a, b], {"A"}).counts) == [3, 4]

    def test_exclude_multiple(self):
        series = [make_series([1, 2], region_id="A"),
                  make_series([3, 4], region_id="B"),
                  make_series([5, 6], region_id="C")]
        assert list(aggregate_excluding(series, {"A", "C"}).counts) == [3, 4]

    def test_empty_aggregate(self):
        a = make_series([1], region_id="A")
        with pytest.raises(DataError, match="empty aggregate"):
            aggregate_excluding([a], {"A"})

    @given(st.lists(
        st.lists(st.integers(min_value=0, max_value=20), min_size=4, max_size=4),
        min_size=1, max_size=5,
    ))
    @settings(max_examples=50, deadline=None)
    def test_daily_sums_match(self, table):
        series = [make_series(row, region_id=f"r{i}") for i, row in enumerate(table)]
        total = aggregate_excluding(series)
        for d in range(4):
            assert total.counts[d] == sum(row[d] for row in table)

    def test_align_series_pads_zeros(self):
        a = make_series([1, 2], origin=dt.date(2020, 1, 2), region_id="A")
        b = make_series([5], origin=dt.date(2020, 1, 1), region_id="B")
        aligned = align_series([a, b])
        assert all(s.origin == dt.date(2020, 1, 1) for s in aligned)
        assert list(aligned[0].counts) == [0, 1, 2]
        assert list(aligned[1].counts) == [5, 0, 0]


class TestWindowValidation:
    def test_ordering_enforced(self):
        with pytest.raises(DataError):
            StudyWindow(t0=5, t_star=3, T=10)

    def test_t_prime_strictly_after_event(self):
        with pytest.raises(DataError):
            StudyWindow(t0=0, t_star=5, T=10, t_prime=5)
        window = StudyWindow(t0=0, t_star=5, T=10, t_prime=6)
        assert window.duration == 1


class TestFiles:
    def test_series_csv_roundtrip(self, tmp_path):
        series = make_series([3, 0, 7], region_id="X")
        path = tmp_path / "series.csv"
        write_series_csv(series, path)
        back = read_series_csv(path, region_id="X")
        assert back.origin == series.origin
        assert list(back.counts) == [3, 0, 7]

    def test_nyt_roundtrip(self, tmp_path):
        path = tmp_path / "nyt.csv"
        path.write_text(
            "date,county,state,fips,cases,deaths\n"
            "2020-06-01,Alpha,Somewhere,001,10,0\n"
            "2020-06-02,Alpha,Somewhere,001,12,0\n"
            "2020-06-02,Beta,Somewhere,002,5,1\n"
        )
        series = series_from_nyt(path, "001")
        assert list(series.counts) == [10, 2]

    def test_populations(self, tmp_path):
        path = tmp_path / "pop.csv"
        path.write_text("fips,population\n001,1000\n002,250\n")
        assert load_populations(path) == {"001": 1000, "002": 250}

    def test_bad_population_rejected(self, tmp_path):
        path = tmp_path / "pop.csv"
        path.write_text("fips,population\n001,0\n")
        with pytest.raises(DataError):
            load_populations(path)

    def test_counts_immutable(self):
        series = make_series([1, 2, 3])
        with pytest.raises(ValueError):
            series.counts[0] = 9
