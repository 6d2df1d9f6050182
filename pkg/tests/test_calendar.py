from datetime import date, datetime

import numpy as np
import pytest

from invrmt.calendar import (assign_periods, bins_per_day, build_calendar, parse_horizon, period_labels,
                             session_lengths)


def test_parse_horizon_forms():
    assert parse_horizon("daily") == "daily"
    assert parse_horizon(None) == "daily"
    assert parse_horizon("15min") == 15
    assert parse_horizon("30m") == 30
    assert parse_horizon(60) == 60
    with pytest.raises(ValueError):
        parse_horizon(0)


def test_session_grid():
    assert session_lengths() == [120, 120]
    assert bins_per_day("daily") == 1
    assert bins_per_day(15) == 16
    assert bins_per_day(120) == 2
    with pytest.raises(ValueError):
        bins_per_day(7)


def test_build_calendar_sorted_unique():
    ts = [datetime(2003, 1, 3, 10), datetime(2003, 1, 2, 14), datetime(2003, 1, 3, 9, 31)]
    assert build_calendar(ts) == [date(2003, 1, 2), date(2003, 1, 3)]


def test_assign_periods_bin_edges():
    cal = [date(2003, 1, 2), date(2003, 1, 3)]
    d = "2003-01-03"
    ts = [f"{d}T09:15:00",   # call auction -> first bin
          f"{d}T09:30:00", f"{d}T09:44:59", f"{d}T09:45:00",
          f"{d}T11:29:59",   # last morning bin
          f"{d}T12:00:00",   # lunch break -> last morning bin
          f"{d}T13:00:00",   # first afternoon bin
          f"{d}T15:00:00",   # at the close -> last bin
          "2003-01-06T10:00:00"]  # off calendar
    got = assign_periods(np.array(ts, dtype="datetime64[s]"), cal, 15)
    assert list(got) == [16, 16, 16, 17, 23, 23, 24, 31, -1]
    daily = assign_periods(np.array(ts, dtype="datetime64[s]"), cal, "daily")
    assert list(daily) == [1] * 8 + [-1]


def test_period_labels():
    labels = period_labels([date(2003, 1, 2)], 15)
    assert len(labels) == 16
    assert labels[0] == "2003-01-02T09:30"
    assert labels[8] == "2003-01-02T13:00"
    assert period_labels([date(2003, 1, 2)], "daily") == ["2003-01-02"]
