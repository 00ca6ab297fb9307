"""Conventional standard-load-profile construction and assembly.

Pipeline: availability-weighted aggregation of scaled series, a polynomial
dynamisation curve over the normalized day of year, per-(season, day type)
daily profiles from the detrended aggregate, and multiplicative assembly of
a full synthetic year. The multiplicative/additive mode switch exists so the
additive variant's higher error is testable; multiplicative is the default.
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .calendars import (
    CalendarConfig,
    DayType,
    Season,
    calendar_from_dict,
    calendar_to_dict,
    classify_day,
    season_of,
)
from .errors import ConfigError, DataError, NumericError
from .metrics import mae
from .series import ScaledSeries
from .timegrid import SLOTS_PER_DAY, days_in_year, normalized_days, year_dates
from .transitions import TransitionConfig, active_transition


@dataclass(frozen=True)
class AggregateSeries:
    """Per-slot availability-weighted mean over all accepted series."""

    year: int
    values: np.ndarray  # (n_days, 96) kW, NaN where no contributor
    counts: np.ndarray  # (n_days, 96) contributors per slot

    def __post_init__(self):
        shape = (days_in_year(self.year), SLOTS_PER_DAY)
        if self.values.shape != shape or self.counts.shape != shape:
            raise DataError(f"aggregate arrays must have shape {shape}")

    @property
    def n_days(self) -> int:
        return self.values.shape[0]

    def flat(self) -> np.ndarray:
        """Full-year slot series, NaN where empty."""
        return self.values.reshape(-1)

    def complete_days(self) -> np.ndarray:
        """Mask of days where every slot has at least one contributor."""
        return (self.counts > 0).all(axis=1)

    def daily_energy_kwh(self) -> np.ndarray:
        """Daily energy, NaN for days with any empty slot."""
        energy = self.values.sum(axis=1) * 0.25
        energy[~self.complete_days()] = np.nan
        return energy


def aggregate(series: Sequence[ScaledSeries]) -> AggregateSeries:
    """Slot-wise mean over series whose slot is Valid, weighted by presence."""
    if not series:
        raise DataError("aggregate requires at least one series")
    year = series[0].year
    for s in series:
        if s.year != year:
            raise DataError(
                f"series {s.meter_id!r} is for year {s.year}, expected {year}"
            )
    shape = (days_in_year(year), SLOTS_PER_DAY)
    total = np.zeros(shape)
    counts = np.zeros(shape, dtype=np.int64)
    for s in series:
        valid = s.valid.reshape(shape)
        total += np.where(valid, s.values.reshape(shape), 0.0)
        counts += valid
    with np.errstate(invalid="ignore"):
        values = np.where(counts > 0, total / np.maximum(counts, 1), np.nan)
    return AggregateSeries(year=year, values=values, counts=counts)


@dataclass(frozen=True)
class DynamisationCurve:
    """Polynomial over normalized day-of-year x in [0, 1).

    Multiplicative curves are normalized to analytic mean 1 over the year;
    additive curves to mean 0 (they carry kW offsets instead of factors).
    """

    coefficients: np.ndarray  # ascending powers
    additive: bool = False

    def __post_init__(self):
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=float)
        )
        if self.coefficients.ndim != 1 or self.coefficients.size == 0:
            raise ConfigError("curve coefficients must be a non-empty 1-d array")

    @property
    def degree(self) -> int:
        return self.coefficients.size - 1

    def __call__(self, x) -> np.ndarray | float:
        return np.polynomial.polynomial.polyval(x, self.coefficients)

    def mean(self) -> float:
        """Analytic mean over one year (the integral over [0, 1))."""
        k = np.arange(self.coefficients.size)
        return float(np.sum(self.coefficients / (k + 1)))

    def normalized(self) -> "DynamisationCurve":
        if self.additive:
            c = self.coefficients.copy()
            c[0] -= self.mean()
            return replace(self, coefficients=c)
        m = self.mean()
        if m <= 0:
            raise NumericError("dynamisation curve has non-positive mean")
        return replace(self, coefficients=self.coefficients / m)

    def is_positive(self, samples: int = 3651) -> bool:
        x = np.linspace(0.0, 1.0, samples, endpoint=False)
        return bool(np.min(self(x)) > 0.0)


def fit_dynamisation(
    agg: AggregateSeries, degree: int = 4, additive: bool = False
) -> DynamisationCurve:
    """Least-squares polynomial through the annual course of daily energy.

    Fits complete days only, then rescales to annual mean 1 (multiplicative)
    or subtracts the mean (additive, fitted on daily mean load in kW).
    """
    if additive:
        target = agg.daily_energy_kwh() / 24.0  # mean kW per day
    else:
        target = agg.daily_energy_kwh()
    x_all = normalized_days(agg.year)
    ok = np.isfinite(target)
    x, y = x_all[ok], target[ok]
    if np.unique(x).size < degree + 1:
        raise NumericError(
            f"dynamisation fit needs at least {degree + 1} distinct complete days, "
            f"got {np.unique(x).size}"
        )
    coeffs = np.polynomial.polynomial.polyfit(x, y, degree)
    curve = DynamisationCurve(coeffs, additive=additive).normalized()
    if not additive and not curve.is_positive():
        raise NumericError("fitted dynamisation curve is not strictly positive")
    return curve


def detrend_days(agg: AggregateSeries, curve: DynamisationCurve) -> AggregateSeries:
    """Remove the yearly seasonality so it is not counted twice."""
    factors = curve(normalized_days(agg.year))[:, None]
    if curve.additive:
        values = agg.values - factors
    else:
        values = agg.values / factors
    return replace(agg, values=values)


BUCKETS: tuple[tuple[Season, DayType], ...] = tuple(
    (s, d) for s in Season for d in DayType
)


def bucket_label(season: Season, day_type: DayType) -> str:
    return f"{season.label}_{day_type.label}"


@dataclass(frozen=True)
class ProfileSet:
    """The nine daily profiles, indexed [season, day type, slot]."""

    values: np.ndarray  # (3, 3, 96)
    nonneg: bool = True

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.shape != (3, 3, SLOTS_PER_DAY):
            raise ConfigError(f"profile set must have shape (3, 3, {SLOTS_PER_DAY})")
        if not np.all(np.isfinite(self.values)):
            raise DataError("profile set contains non-finite values")
        if self.nonneg and np.any(self.values < 0.0):
            raise DataError("profile set contains negative values")

    def get(self, season: Season, day_type: DayType) -> np.ndarray:
        return self.values[season, day_type]

    def map(self, fn) -> "ProfileSet":
        """Apply `fn(profile) -> profile` to each of the nine profiles."""
        out = np.stack(
            [[fn(self.values[s, d]) for d in DayType] for s in Season]
        )
        return replace(self, values=out)

    def daily_energies_kwh(self) -> np.ndarray:
        return self.values.sum(axis=2) * 0.25


def day_buckets(year: int, calendar: CalendarConfig) -> tuple[np.ndarray, np.ndarray]:
    """Arrays of season and day-type indices for every day of `year`."""
    dates = year_dates(year)
    seasons = np.array([season_of(d, calendar) for d in dates], dtype=np.int64)
    day_types = np.array([classify_day(d, calendar) for d in dates], dtype=np.int64)
    return seasons, day_types


def build_daily_profiles(
    detrended: AggregateSeries,
    calendar: CalendarConfig,
    nonneg: bool = True,
) -> ProfileSet:
    """Availability-weighted quarter-hourly average per (season, day type)."""
    seasons, day_types = day_buckets(detrended.year, calendar)
    values = np.where(detrended.counts > 0, detrended.values, 0.0)
    weighted = values * detrended.counts
    out = np.empty((3, 3, SLOTS_PER_DAY))
    for season, day_type in BUCKETS:
        rows = (seasons == season) & (day_types == day_type)
        if not rows.any():
            raise DataError(f"no days in bucket {bucket_label(season, day_type)}")
        weight = detrended.counts[rows].sum(axis=0)
        if np.any(weight == 0):
            raise DataError(
                f"bucket {bucket_label(season, day_type)} has slots with no data"
            )
        out[season, day_type] = weighted[rows].sum(axis=0) / weight
    return ProfileSet(out, nonneg=nonneg)


@dataclass(frozen=True)
class SlpModel:
    """Dynamisation curve + nine profiles + calendar, optionally blended."""

    curve: DynamisationCurve
    profiles: ProfileSet
    calendar: CalendarConfig
    transition: TransitionConfig | None = None

    @property
    def mode(self) -> str:
        return "additive" if self.curve.additive else "multiplicative"


def day_profile(model: SlpModel, date: dt.date) -> np.ndarray:
    """The 96-slot profile for `date`, blended inside transition windows."""
    day_type = classify_day(date, model.calendar)
    if model.transition is not None:
        hit = active_transition(date, model.transition)
        if hit is not None:
            t, alpha = hit
            p1 = model.profiles.get(t.from_season, day_type)
            p2 = model.profiles.get(t.to_season, day_type)
            return (1.0 - alpha) * p1 + alpha * p2
    return model.profiles.get(season_of(date, model.calendar), day_type)


def assemble(model: SlpModel, year: int) -> np.ndarray:
    """Full-year quarter-hour series X(t) = d(t) * profile(t) (or sum)."""
    if model.transition is not None:
        model.transition.validate_no_overlap(year)
    factors = model.curve(normalized_days(year))
    days = np.empty((days_in_year(year), SLOTS_PER_DAY))
    for i, date in enumerate(year_dates(year)):
        days[i] = day_profile(model, date)
    if model.curve.additive:
        days += factors[:, None]
    else:
        days *= factors[:, None]
    return days.reshape(-1)


def assemble_blended(model: SlpModel, year: int) -> np.ndarray:
    """Assembly with sliding transitions; requires model.transition."""
    if model.transition is None:
        raise ConfigError("assemble_blended requires a transition config")
    return assemble(model, year)


def build_slp_model(
    series: Sequence[ScaledSeries],
    calendar: CalendarConfig,
    degree: int = 4,
    additive: bool = False,
    transition: TransitionConfig | None = None,
) -> tuple[SlpModel, AggregateSeries]:
    """Aggregate -> dynamisation -> detrend -> profiles, as one step."""
    agg = aggregate(series)
    return build_slp_model_from_aggregate(
        agg, calendar, degree=degree, additive=additive, transition=transition
    ), agg


def build_slp_model_from_aggregate(
    agg: AggregateSeries,
    calendar: CalendarConfig,
    degree: int = 4,
    additive: bool = False,
    transition: TransitionConfig | None = None,
) -> SlpModel:
    curve = fit_dynamisation(agg, degree=degree, additive=additive)
    detrended = detrend_days(agg, curve)
    profiles = build_daily_profiles(detrended, calendar, nonneg=not additive)
    return SlpModel(
        curve=curve, profiles=profiles, calendar=calendar, transition=transition
    )


def search_duration(
    agg: AggregateSeries,
    model: SlpModel,
    candidates: Sequence[float] | None = None,
    refine: bool = True,
) -> tuple[float, list[tuple[float, float]]]:
    """Find the transition duration minimizing MAE against the aggregate.

    Evaluates a coarse grid (default 0..42 step 3), then refines +-3 around
    the coarse argmin in 1-day steps. Ties go to the smaller duration.
    Returns (best duration, full error curve sorted by duration).
    """
    if model.transition is None:
        raise ConfigError("duration search requires a transition config")
    if candidates is None:
        candidates = [float(d) for d in range(0, 43, 3)]
    else:
        candidates = [float(d) for d in candidates]
        refine = False
    if not candidates:
        raise ConfigError("duration search needs at least one candidate")
    reference = agg.flat()

    def evaluate(duration: float) -> float:
        m = replace(model, transition=replace(model.transition, duration_days=duration))
        return mae(assemble(m, agg.year), reference)

    tried: dict[float, float] = {d: evaluate(d) for d in candidates}
    best = min(tried, key=lambda d: (tried[d], d))
    if refine:
        lo, hi = max(0.0, best - 3.0), best + 3.0
        d = lo
        while d <= hi:
            if d not in tried:
                tried[d] = evaluate(d)
            d += 1.0
        best = min(tried, key=lambda d: (tried[d], d))
    curve = sorted(tried.items())
    return best, curve


# ---------------------------------------------------------------------------
# model serialization

def model_to_dict(model: SlpModel) -> dict:
    doc = {
        "mode": model.mode,
        "curve": {
            "coefficients": [float(c) for c in model.curve.coefficients],
            "additive": model.curve.additive,
        },
        "profiles": {
            bucket_label(s, d): [float(v) for v in model.profiles.get(s, d)]
            for s, d in BUCKETS
        },
        "calendar": calendar_to_dict(model.calendar),
    }
    if model.transition is not None:
        doc["transition"] = {
            "duration_days": model.transition.duration_days,
            "transitions": [
                [t.month, t.day, t.from_season.label, t.to_season.label]
                for t in model.transition.transitions
            ],
        }
    return doc


def model_from_dict(doc: dict) -> SlpModel:
    from .transitions import SeasonTransition

    season_by_label = {s.label: s for s in Season}
    try:
        curve = DynamisationCurve(
            np.array(doc["curve"]["coefficients"], dtype=float),
            additive=bool(doc["curve"]["additive"]),
        )
        values = np.stack(
            [
                [np.array(doc["profiles"][bucket_label(s, d)]) for d in DayType]
                for s in Season
            ]
        )
        profiles = ProfileSet(values, nonneg=not curve.additive)
        calendar = calendar_from_dict(doc["calendar"])
        transition = None
        if "transition" in doc:
            transition = TransitionConfig(
                transitions=tuple(
                    SeasonTransition(
                        int(m), int(d), season_by_label[f], season_by_label[t]
                    )
                    for m, d, f, t in doc["transition"]["transitions"]
                ),
                duration_days=float(doc["transition"]["duration_days"]),
            )
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"malformed model document: {exc}") from exc
    return SlpModel(
        curve=curve, profiles=profiles, calendar=calendar, transition=transition
    )


def save_model(model: SlpModel, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n"
    )


def load_model(path: str | Path) -> SlpModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read model {path}: {exc}") from exc
    return model_from_dict(doc)


def profile_table(model: SlpModel) -> str:
    """96-row delimited table of the nine profiles (slot time + 9 columns)."""
    header = "time," + ",".join(bucket_label(s, d) for s, d in BUCKETS)
    lines = [header]
    for q in range(SLOTS_PER_DAY):
        hh, mm = divmod(q * 15, 60)
        cells = [f"{hh:02d}:{mm:02d}"]
        cells += [repr(float(model.profiles.get(s, d)[q])) for s, d in BUCKETS]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"
