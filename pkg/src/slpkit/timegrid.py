"""Quarter-hour time grid for a single civil year.

All series in slpkit live on this grid: 96 slots per day, 35040 slots in a
regular year, 35136 in a leap year. Timestamps are naive (the dataset's
fixed local zone); minute components must be one of 00/15/30/45.
"""
from __future__ import annotations

import calendar
import datetime as dt

import numpy as np

SLOTS_PER_DAY = 96
STEP_MINUTES = 15
HOURS_PER_SLOT = 0.25

_VALID_MINUTES = (0, 15, 30, 45)


def is_leap(year: int) -> bool:
    return calendar.isleap(year)


def days_in_year(year: int) -> int:
    return 366 if is_leap(year) else 365


def slots_in_year(year: int) -> int:
    return days_in_year(year) * SLOTS_PER_DAY


def day_index(date: dt.date) -> int:
    """0-based day number of `date` within its civil year."""
    return (date - dt.date(date.year, 1, 1)).days


def date_of_day(year: int, day: int) -> dt.date:
    return dt.date(year, 1, 1) + dt.timedelta(days=day)


def slot_of(ts: dt.datetime) -> int:
    """Global slot index of a timestamp within its civil year.

    Raises ValueError for timestamps off the quarter-hour grid or carrying
    a timezone offset.
    """
    if ts.tzinfo is not None:
        raise ValueError(f"timestamp {ts.isoformat()} carries a timezone offset")
    if ts.minute not in _VALID_MINUTES or ts.second or ts.microsecond:
        raise ValueError(f"timestamp {ts.isoformat()} is not on the quarter-hour grid")
    return day_index(ts.date()) * SLOTS_PER_DAY + ts.hour * 4 + ts.minute // 15


def timestamp_of(year: int, slot: int) -> dt.datetime:
    """Inverse of slot_of for slot indices in [0, slots_in_year)."""
    day, q = divmod(slot, SLOTS_PER_DAY)
    date = date_of_day(year, day)
    return dt.datetime(date.year, date.month, date.day, q // 4, (q % 4) * STEP_MINUTES)


def year_dates(year: int) -> list[dt.date]:
    return [date_of_day(year, d) for d in range(days_in_year(year))]


def normalized_day_of_year(date: dt.date) -> float:
    """Map a date onto the year-independent dynamisation domain [0, 1).

    Feb 29 shares the position of Feb 28 so the polynomial domain has 365
    points in every year.
    """
    day = day_index(date)
    if is_leap(date.year) and day >= 59:  # Feb 29 is day 59 in a leap year
        day -= 1
    return day / 365.0


def normalized_days(year: int) -> np.ndarray:
    """normalized_day_of_year for every day of `year`, as one array."""
    days = np.arange(days_in_year(year), dtype=float)
    if is_leap(year):
        days[59:] -= 1.0
    return days / 365.0
