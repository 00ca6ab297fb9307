"""Day-type and season calendar logic.

A date resolves to exactly one (Season, DayType) pair. Day types follow the
weekday with three overrides: national holidays count as Sundays, Christmas
Eve as Saturday and New Year's Eve as Sunday (the eve rules are configurable
back to the conventional all-Saturday treatment). Seasons are half-open
segments [start, next_start) over month/day switch points that wrap around
the year end, so a November switch to winter also covers January.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, replace
from enum import IntEnum
from importlib import resources
from pathlib import Path

from .errors import ConfigError
from .timegrid import days_in_year, year_dates


class DayType(IntEnum):
    WORKDAY = 0
    SATURDAY = 1
    SUNDAY = 2

    @property
    def label(self) -> str:
        return self.name.lower()


class Season(IntEnum):
    WINTER = 0
    SUMMER = 1
    TRANSITION = 2

    @property
    def label(self) -> str:
        return self.name.lower()


#: (month, day, season starting on that date); conventional segmentation:
#: winter Nov 1 - Mar 20, summer May 15 - Sep 14, transition otherwise.
DEFAULT_SEASON_BOUNDARIES: tuple[tuple[int, int, Season], ...] = (
    (3, 21, Season.TRANSITION),
    (5, 15, Season.SUMMER),
    (9, 15, Season.TRANSITION),
    (11, 1, Season.WINTER),
)


@dataclass(frozen=True)
class CalendarConfig:
    """Holiday set, season switch points and special-day rules."""

    holidays: frozenset[dt.date] = frozenset()
    season_boundaries: tuple[tuple[int, int, Season], ...] = DEFAULT_SEASON_BOUNDARIES
    christmas_eve_rule: DayType = DayType.SATURDAY
    new_years_eve_rule: DayType = DayType.SUNDAY

    def __post_init__(self):
        if not self.season_boundaries:
            raise ConfigError("season_boundaries must not be empty")
        keys = [(m, d) for m, d, _ in self.season_boundaries]
        if keys != sorted(keys) or len(set(keys)) != len(keys):
            raise ConfigError("season_boundaries must be sorted and unique")
        for m, d, _ in self.season_boundaries:
            dt.date(2001, m, d)  # validates month/day (2001: non-leap)

    def with_boundaries(self, boundaries) -> "CalendarConfig":
        return replace(self, season_boundaries=tuple(boundaries))

    def conventional(self) -> "CalendarConfig":
        """The pre-validation rule set: both eves count as Saturday."""
        return replace(
            self,
            season_boundaries=DEFAULT_SEASON_BOUNDARIES,
            christmas_eve_rule=DayType.SATURDAY,
            new_years_eve_rule=DayType.SATURDAY,
        )


def classify_day(date: dt.date, config: CalendarConfig) -> DayType:
    """Effective day type of `date` after holiday and eve overrides."""
    if date.month == 12 and date.day == 24:
        return config.christmas_eve_rule
    if date.month == 12 and date.day == 31:
        return config.new_years_eve_rule
    if date in config.holidays:
        return DayType.SUNDAY
    wd = date.weekday()
    if wd == 5:
        return DayType.SATURDAY
    if wd == 6:
        return DayType.SUNDAY
    return DayType.WORKDAY


def base_day_type(date: dt.date) -> DayType:
    """Plain weekday mapping with no holiday or eve overrides."""
    wd = date.weekday()
    if wd == 5:
        return DayType.SATURDAY
    if wd == 6:
        return DayType.SUNDAY
    return DayType.WORKDAY


def season_of(date: dt.date, config: CalendarConfig) -> Season:
    """Season of the half-open boundary segment containing `date`."""
    key = (date.month, date.day)
    season = config.season_boundaries[-1][2]  # wrap-around before first switch
    for m, d, s in config.season_boundaries:
        if (m, d) <= key:
            season = s
    return season


def is_special_day(date: dt.date, config: CalendarConfig) -> bool:
    """True for holidays and the two year-end eves."""
    return (
        date in config.holidays
        or (date.month == 12 and date.day in (24, 31))
    )


def day_types_of_year(year: int, config: CalendarConfig) -> list[DayType]:
    return [classify_day(d, config) for d in year_dates(year)]


def seasons_of_year(year: int, config: CalendarConfig) -> list[Season]:
    return [season_of(d, config) for d in year_dates(year)]


def load_holidays(path: str | Path) -> frozenset[dt.date]:
    """Read a holiday calendar file: one ISO-8601 date per line, # comments."""
    dates = set()
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            dates.add(dt.date.fromisoformat(line))
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: invalid date {line!r}") from exc
    return frozenset(dates)


def german_holidays() -> frozenset[dt.date]:
    """Packaged federal German holiday calendar, 2017-2023."""
    ref = resources.files("slpkit.data").joinpath("holidays_de.txt")
    with resources.as_file(ref) as path:
        return load_holidays(path)


def german_calendar() -> CalendarConfig:
    """Default calendar: federal holidays, conventional season boundaries,
    updated eve rules (Dec 24 Saturday, Dec 31 Sunday)."""
    return CalendarConfig(holidays=german_holidays())


def calendar_to_dict(config: CalendarConfig) -> dict:
    return {
        "holidays": sorted(h.isoformat() for h in config.holidays),
        "season_boundaries": [
            [m, d, s.label] for m, d, s in config.season_boundaries
        ],
        "christmas_eve_rule": config.christmas_eve_rule.label,
        "new_years_eve_rule": config.new_years_eve_rule.label,
    }


def calendar_from_dict(doc: dict) -> CalendarConfig:
    season_by_label = {s.label: s for s in Season}
    day_by_label = {d.label: d for d in DayType}
    try:
        return CalendarConfig(
            holidays=frozenset(dt.date.fromisoformat(h) for h in doc["holidays"]),
            season_boundaries=tuple(
                (int(m), int(d), season_by_label[s])
                for m, d, s in doc["season_boundaries"]
            ),
            christmas_eve_rule=day_by_label[doc["christmas_eve_rule"]],
            new_years_eve_rule=day_by_label[doc["new_years_eve_rule"]],
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed calendar document: {exc}") from exc


def partition_counts(year: int, config: CalendarConfig) -> dict[tuple[Season, DayType], int]:
    """Number of dates per (Season, DayType) combination; sums to year length."""
    counts: dict[tuple[Season, DayType], int] = {
        (s, d): 0 for s in Season for d in DayType
    }
    for date in year_dates(year):
        counts[(season_of(date, config), classify_day(date, config))] += 1
    assert sum(counts.values()) == days_in_year(year)
    return counts
