"""Additive Fourier-series load model.

The model sums an intercept, yearly and weekly harmonic blocks, and one
daily harmonic block per (season, day-type) combination gated by binary
indicators; coefficients come from ordinary least squares on the aggregate.
A log-domain variant realizes the multiplicative counterpart. Harmonic
blocks are periodic by construction, which pins the year end to the year
start; that mismatch with real year-end consumption is precisely what the
yearly error profile exposes.
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .calendars import CalendarConfig, DayType, Season, base_day_type, classify_day, season_of
from .errors import ConfigError, DataError, NumericError
from .slp import AggregateSeries
from .timegrid import SLOTS_PER_DAY, days_in_year, slots_in_year, year_dates


@dataclass(frozen=True)
class FourierConfig:
    yearly_harmonics: int = 4
    weekly_harmonics: int = 6
    daily_harmonics: int = 12
    day_type_mode: str = "three"  # "three" (workday/Sat/Sun) or "two" (workday/weekend)
    use_calendar_day_types: bool = True  # False: raw weekday, no holiday overrides

    def __post_init__(self):
        if self.yearly_harmonics < 1 or self.daily_harmonics < 1:
            raise ConfigError("yearly and daily blocks need at least one harmonic")
        if self.weekly_harmonics < 0:
            raise ConfigError("weekly harmonics must be >= 0")
        if self.day_type_mode not in ("three", "two"):
            raise ConfigError(f"unknown day_type_mode {self.day_type_mode!r}")

    @property
    def day_keys(self) -> tuple[int, ...]:
        return (0, 1, 2) if self.day_type_mode == "three" else (0, 1)

    def n_columns(self) -> int:
        return (
            1
            + 2 * self.yearly_harmonics
            + 2 * self.weekly_harmonics
            + len(Season) * len(self.day_keys) * 2 * self.daily_harmonics
        )


@dataclass(frozen=True)
class HarmonicBlock:
    """cos/sin pairs over one period: sum_m a_m cos(2 pi m f) + b_m sin(...)."""

    period: str  # "year" | "week" | "day"
    coefficients: np.ndarray  # (n_harmonics, 2) as [a_m, b_m]

    def __post_init__(self):
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=float)
        )
        if self.coefficients.ndim != 2 or self.coefficients.shape[1] != 2:
            raise ConfigError("harmonic coefficients must have shape (n, 2)")
        if self.coefficients.shape[0] < 1:
            raise ConfigError("a harmonic block needs at least one harmonic")
        if not np.all(np.isfinite(self.coefficients)):
            raise DataError("harmonic coefficients must be finite")

    @property
    def n_harmonics(self) -> int:
        return self.coefficients.shape[0]

    def evaluate(self, fraction) -> np.ndarray | float:
        f = np.asarray(fraction, dtype=float)
        m = np.arange(1, self.n_harmonics + 1)
        phase = 2.0 * np.pi * np.multiply.outer(f, m)
        out = np.cos(phase) @ self.coefficients[:, 0]
        out += np.sin(phase) @ self.coefficients[:, 1]
        return out if f.ndim else float(out)


def _harmonic_columns(fraction: np.ndarray, n_harmonics: int) -> np.ndarray:
    """(len, 2n) design columns ordered cos_1, sin_1, cos_2, sin_2, ..."""
    m = np.arange(1, n_harmonics + 1)
    phase = 2.0 * np.pi * np.multiply.outer(fraction, m)
    cols = np.empty((fraction.size, 2 * n_harmonics))
    cols[:, 0::2] = np.cos(phase)
    cols[:, 1::2] = np.sin(phase)
    return cols


def _day_gate(date: dt.date, config: FourierConfig, calendar: CalendarConfig) -> int:
    if config.use_calendar_day_types:
        day_type = classify_day(date, calendar)
    else:
        day_type = base_day_type(date)
    if config.day_type_mode == "three":
        return int(day_type)
    return 0 if day_type == DayType.WORKDAY else 1


def _gate_indices(year: int, config: FourierConfig, calendar: CalendarConfig) -> np.ndarray:
    """Per-day index of the active (season, day key) block."""
    n_keys = len(config.day_keys)
    out = np.empty(days_in_year(year), dtype=np.int64)
    for i, date in enumerate(year_dates(year)):
        season = season_of(date, calendar)
        out[i] = int(season) * n_keys + _day_gate(date, config, calendar)
    return out


def design_matrix(
    year: int, config: FourierConfig, calendar: CalendarConfig
) -> np.ndarray:
    """Full-year design: intercept, yearly, weekly, gated daily columns."""
    n = slots_in_year(year)
    n_days = days_in_year(year)
    slots = np.arange(n)
    year_fraction = slots / n
    day_slot = np.tile(np.arange(SLOTS_PER_DAY), n_days)
    weekdays = np.repeat(
        [d.weekday() for d in year_dates(year)], SLOTS_PER_DAY
    )
    week_fraction = (weekdays * SLOTS_PER_DAY + day_slot) / (7 * SLOTS_PER_DAY)
    day_fraction = day_slot / SLOTS_PER_DAY

    parts = [np.ones((n, 1)), _harmonic_columns(year_fraction, config.yearly_harmonics)]
    if config.weekly_harmonics:
        parts.append(_harmonic_columns(week_fraction, config.weekly_harmonics))
    daily_cols = _harmonic_columns(day_fraction, config.daily_harmonics)
    gates = np.repeat(_gate_indices(year, config, calendar), SLOTS_PER_DAY)
    n_blocks = len(Season) * len(config.day_keys)
    gated = np.zeros((n, n_blocks * 2 * config.daily_harmonics))
    width = 2 * config.daily_harmonics
    for block in range(n_blocks):
        rows = gates == block
        gated[np.ix_(rows, np.arange(block * width, (block + 1) * width))] = daily_cols[rows]
    parts.append(gated)
    return np.hstack(parts)


def design_row(
    ts: dt.datetime, config: FourierConfig, calendar: CalendarConfig
) -> np.ndarray:
    """Single-timestamp design vector (same column layout as design_matrix)."""
    date = ts.date()
    slot_of_day = ts.hour * 4 + ts.minute // 15
    n = slots_in_year(ts.year)
    day = (date - dt.date(ts.year, 1, 1)).days
    year_fraction = np.array([(day * SLOTS_PER_DAY + slot_of_day) / n])
    week_fraction = np.array([(date.weekday() * SLOTS_PER_DAY + slot_of_day) / (7 * SLOTS_PER_DAY)])
    day_fraction = np.array([slot_of_day / SLOTS_PER_DAY])

    parts = [np.ones(1), _harmonic_columns(year_fraction, config.yearly_harmonics)[0]]
    if config.weekly_harmonics:
        parts.append(_harmonic_columns(week_fraction, config.weekly_harmonics)[0])
    n_keys = len(config.day_keys)
    block = int(season_of(date, calendar)) * n_keys + _day_gate(date, config, calendar)
    n_blocks = len(Season) * n_keys
    width = 2 * config.daily_harmonics
    gated = np.zeros(n_blocks * width)
    gated[block * width : (block + 1) * width] = _harmonic_columns(
        day_fraction, config.daily_harmonics
    )[0]
    parts.append(gated)
    return np.concatenate(parts)


@dataclass(frozen=True)
class FourierModel:
    config: FourierConfig
    calendar: CalendarConfig
    intercept: float
    yearly: HarmonicBlock
    weekly: HarmonicBlock | None
    daily: Mapping[tuple[Season, int], HarmonicBlock]
    log_domain: bool = False
    year: int | None = None
    residuals: np.ndarray | None = None  # linear-domain, NaN at empty slots

    def coefficient_vector(self) -> np.ndarray:
        """Coefficients packed in design_matrix column order."""
        parts = [np.array([self.intercept]), self.yearly.coefficients.reshape(-1)]
        if self.weekly is not None:
            parts.append(self.weekly.coefficients.reshape(-1))
        for season in Season:
            for key in self.config.day_keys:
                parts.append(self.daily[(season, key)].coefficients.reshape(-1))
        return np.concatenate(parts)


def _unpack(
    coef: np.ndarray, config: FourierConfig, calendar: CalendarConfig, **kwargs
) -> FourierModel:
    pos = 0
    intercept = float(coef[pos]); pos += 1
    yearly = HarmonicBlock("year", coef[pos : pos + 2 * config.yearly_harmonics].reshape(-1, 2))
    pos += 2 * config.yearly_harmonics
    weekly = None
    if config.weekly_harmonics:
        weekly = HarmonicBlock("week", coef[pos : pos + 2 * config.weekly_harmonics].reshape(-1, 2))
        pos += 2 * config.weekly_harmonics
    daily = {}
    width = 2 * config.daily_harmonics
    for season in Season:
        for key in config.day_keys:
            daily[(season, key)] = HarmonicBlock("day", coef[pos : pos + width].reshape(-1, 2))
            pos += width
    return FourierModel(
        config=config,
        calendar=calendar,
        intercept=intercept,
        yearly=yearly,
        weekly=weekly,
        daily=daily,
        **kwargs,
    )


def fit(
    agg: AggregateSeries,
    config: FourierConfig = FourierConfig(),
    calendar: CalendarConfig | None = None,
    log_domain: bool = False,
) -> FourierModel:
    """Ordinary least squares on the aggregate's non-empty slots."""
    if calendar is None:
        raise ConfigError("fit requires a calendar for the indicator gating")
    flat = agg.flat()
    mask = (agg.counts.reshape(-1) > 0) & np.isfinite(flat)
    y = flat[mask]
    if log_domain:
        if np.any(y <= 0.0):
            raise DataError("multiplicative fit requires strictly positive values")
        y = np.log(y)
    X = design_matrix(agg.year, config, calendar)[mask]
    if y.size <= X.shape[1]:
        raise DataError(
            f"need more than {X.shape[1]} non-empty slots to fit, got {y.size}"
        )
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise NumericError(
            "rank-deficient design (a (season, day type) combination may never occur)"
        )
    fitted = X @ coef
    if log_domain:
        fitted = np.exp(fitted)
    residuals = np.full(flat.size, np.nan)
    residuals[mask] = flat[mask] - fitted
    return _unpack(
        coef, config, calendar,
        log_domain=log_domain, year=agg.year, residuals=residuals,
    )


def multiplicative_variant_fit(
    agg: AggregateSeries,
    config: FourierConfig = FourierConfig(),
    calendar: CalendarConfig | None = None,
) -> FourierModel:
    """Least squares on log values; predictions exponentiate."""
    return fit(agg, config, calendar, log_domain=True)


def predict_year(model: FourierModel, year: int) -> np.ndarray:
    X = design_matrix(year, model.config, model.calendar)
    out = X @ model.coefficient_vector()
    return np.exp(out) if model.log_domain else out


def predict(model: FourierModel, ts: dt.datetime) -> float:
    row = design_row(ts, model.config, model.calendar)
    value = float(row @ model.coefficient_vector())
    return float(np.exp(value)) if model.log_domain else value


def yearly_error_profile(model: FourierModel, agg: AggregateSeries) -> np.ndarray:
    """Per-day-of-year MAE of the model against the aggregate (NaN: no data)."""
    predicted = predict_year(model, agg.year).reshape(agg.values.shape)
    err = np.abs(predicted - agg.values)
    with np.errstate(invalid="ignore"):
        out = np.nanmean(np.where(agg.counts > 0, err, np.nan), axis=1)
    return out


def weekly_curve(model: FourierModel) -> np.ndarray:
    """The additive weekly-seasonality factor at all 672 week slots."""
    fraction = np.arange(7 * SLOTS_PER_DAY) / (7 * SLOTS_PER_DAY)
    if model.weekly is None:
        return np.zeros(fraction.size)
    return model.weekly.evaluate(fraction)


def residual_orthogonality(model: FourierModel, agg: AggregateSeries) -> float:
    """Max relative |r . column| over design columns; ~0 for a clean fit."""
    flat = agg.flat()
    mask = (agg.counts.reshape(-1) > 0) & np.isfinite(flat)
    if model.log_domain:
        r = np.log(flat[mask]) - np.log(predict_year(model, agg.year)[mask])
    else:
        r = flat[mask] - predict_year(model, agg.year)[mask]
    X = design_matrix(agg.year, model.config, model.calendar)[mask]
    r_norm = float(np.linalg.norm(r))
    y_norm = float(np.linalg.norm(flat[mask]))
    if r_norm <= 1e-9 * max(y_norm, 1e-300):
        return 0.0  # numerically exact fit: orthogonality holds trivially
    dots = np.abs(X.T @ r)
    col_norms = np.linalg.norm(X, axis=0)
    return float(np.max(dots / (r_norm * np.maximum(col_norms, 1e-300))))


# ---------------------------------------------------------------------------
# serialization

def model_to_dict(model: FourierModel) -> dict:
    doc = {
        "log_domain": model.log_domain,
        "intercept": model.intercept,
        "config": {
            "yearly_harmonics": model.config.yearly_harmonics,
            "weekly_harmonics": model.config.weekly_harmonics,
            "daily_harmonics": model.config.daily_harmonics,
            "day_type_mode": model.config.day_type_mode,
            "use_calendar_day_types": model.config.use_calendar_day_types,
        },
        "yearly": model.yearly.coefficients.tolist(),
        "weekly": None if model.weekly is None else model.weekly.coefficients.tolist(),
        "daily": {
            f"{season.label}_{key}": model.daily[(season, key)].coefficients.tolist()
            for season in Season
            for key in model.config.day_keys
        },
    }
    return doc


def save_model(model: FourierModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n")
