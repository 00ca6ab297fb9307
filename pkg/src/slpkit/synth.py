"""Seeded synthetic household generator with exportable ground truth.

Households are drawn from a planted profile model (dynamisation curve, nine
daily shapes, calendar rules, optional sliding transitions) multiplied by
lognormal noise terms: a per-household level factor, a common per-day factor
(weather-like variation that does not average out across households), and
per-slot measurement noise. Optional injections plant PV feed-in, EV
charging blocks, stuck-meter runs, spikes and gaps, all recorded in the
GroundTruth record so detector tests have complete labels.

The planted model is normalized so a level-1.0 household consumes exactly
1000 kWh over the target year, which makes pipeline round-trips exact.
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .calendars import CalendarConfig, DayType, Season, german_holidays
from .errors import ConfigError
from .series import Manifest, QualityFlag, RawSeries, write_series
from .slp import DynamisationCurve, ProfileSet, SlpModel, assemble, save_model
from .timegrid import SLOTS_PER_DAY, days_in_year, slots_in_year, year_dates
from .transitions import SeasonTransition, TransitionConfig

#: changeover centres of the data-driven season structure the generator
#: plants by default (deliberately offset from the conventional boundaries)
PLANTED_TRANSITIONS: tuple[tuple[int, int, Season, Season], ...] = (
    (3, 6, Season.WINTER, Season.TRANSITION),
    (5, 1, Season.TRANSITION, Season.SUMMER),
    (10, 1, Season.SUMMER, Season.TRANSITION),
    (11, 20, Season.TRANSITION, Season.WINTER),
)

#: hard switches aligned with the conventional boundaries, for exact
#: round-trip datasets that the default build calendar reproduces
CONVENTIONAL_TRANSITIONS: tuple[tuple[int, int, Season, Season], ...] = (
    (3, 21, Season.WINTER, Season.TRANSITION),
    (5, 15, Season.TRANSITION, Season.SUMMER),
    (9, 15, Season.SUMMER, Season.TRANSITION),
    (11, 1, Season.TRANSITION, Season.WINTER),
)

#: degree-4 polynomial peaking in winter, analytic annual mean 1
PLANTED_CURVE_COEFFICIENTS = (0.85, 0.0, 1.8, 0.0, -0.48)


def _periodic_bump(hours: np.ndarray, center: float, width: float) -> np.ndarray:
    dist = np.abs(hours - center)
    dist = np.minimum(dist, 24.0 - dist)
    return np.exp(-0.5 * (dist / width) ** 2)


# per-season bump parameters: (base, morning(t, a, w), midday(t, a, w),
# evening(t, a, w)); day types shift and rescale the season template.
# Season shapes differ in dominant-peak structure (big in min-max space)
# while day types only nudge timing and balance, so unsupervised shape
# clusters follow the seasons and still leave a learnable day-type signal.
_SEASON_SHAPES = {
    Season.WINTER: (0.25, (7.0, 0.55, 2.0), (12.5, 0.30, 2.0), (18.5, 1.20, 2.6)),
    Season.SUMMER: (0.28, (7.5, 0.50, 2.0), (13.0, 0.70, 2.4), (21.0, 0.50, 2.2)),
    Season.TRANSITION: (0.26, (6.8, 0.95, 2.0), (12.8, 0.22, 2.2), (19.5, 0.75, 2.4)),
}

# (morning shift h, morning scale, midday scale, evening shift h, evening scale)
_DAY_TYPE_MODS = {
    DayType.WORKDAY: (0.0, 1.0, 1.0, 0.0, 1.0),
    DayType.SATURDAY: (0.6, 0.92, 1.10, 0.0, 0.97),
    DayType.SUNDAY: (1.0, 0.82, 1.20, -0.3, 0.93),
}


def planted_profiles() -> ProfileSet:
    """The nine default daily shapes, each normalized to 1 kWh per day."""
    hours = (np.arange(SLOTS_PER_DAY) + 0.5) / 4.0
    values = np.empty((3, 3, SLOTS_PER_DAY))
    for season, (base, morning, midday, evening) in _SEASON_SHAPES.items():
        for day_type, (m_shift, m_scale, d_scale, e_shift, e_scale) in _DAY_TYPE_MODS.items():
            shape = np.full(SLOTS_PER_DAY, base)
            shape += morning[1] * m_scale * _periodic_bump(hours, morning[0] + m_shift, morning[2])
            shape += midday[1] * d_scale * _periodic_bump(hours, midday[0], midday[2])
            shape += evening[1] * e_scale * _periodic_bump(hours, evening[0] + e_shift, evening[2])
            values[season, day_type] = shape / (shape.sum() * 0.25)  # 1 kWh/day
    return ProfileSet(values)


def planted_curve() -> DynamisationCurve:
    return DynamisationCurve(np.array(PLANTED_CURVE_COEFFICIENTS)).normalized()


def friday_afternoon_uplift(amplitude: float = 0.15) -> tuple[float, ...]:
    """Multiplicative week-slot factors: a ramp-up on Friday from 14:00."""
    factors = np.ones(7 * SLOTS_PER_DAY)
    friday = 4 * SLOTS_PER_DAY
    for q in range(SLOTS_PER_DAY):
        hour = q / 4.0
        if hour >= 14.0:
            ramp = min(1.0, (hour - 14.0) / 4.0)  # full size from 18:00
            factors[friday + q] = 1.0 + amplitude * ramp
    return tuple(factors)


@dataclass(frozen=True)
class SynthConfig:
    year: int = 2021
    n_households: int = 100
    seed: int = 0
    transition_style: str = "sliding"  # "hard" | "sliding"
    transition_days: float = 21.0
    transitions: tuple[tuple[int, int, Season, Season], ...] = PLANTED_TRANSITIONS
    noise: float = 0.75          # per-slot lognormal rel. std per household
    noise_correlation: float = 1.0  # slot-correlation scale of the noise (0: white)
    level_std: float = 0.3       # per-household lognormal level factor
    day_effect_std: float = 0.02  # common per-day lognormal factor
    weekly_uplift: tuple[float, ...] | None = None  # 672 week-slot factors
    year_end_surge: float = 0.0  # relative uplift ramped over the last days
    surge_days: int = 14
    holiday_behavior: str = "sunday"      # "sunday" | "weekday"
    christmas_eve_behavior: DayType = DayType.SATURDAY
    new_years_eve_behavior: DayType = DayType.SUNDAY
    pv_rate: float = 0.0
    ev_rate: float = 0.0
    defect_rate: float = 0.0
    gap_rate: float = 0.0
    gap_days: int = 10

    def __post_init__(self):
        if self.n_households < 1:
            raise ConfigError("need at least one household")
        if self.transition_style not in ("hard", "sliding"):
            raise ConfigError(f"unknown transition style {self.transition_style!r}")
        if min(self.noise, self.level_std, self.day_effect_std) < 0:
            raise ConfigError("noise levels must be >= 0")
        if self.holiday_behavior not in ("sunday", "weekday"):
            raise ConfigError(f"unknown holiday behavior {self.holiday_behavior!r}")
        if self.weekly_uplift is not None and len(self.weekly_uplift) != 7 * SLOTS_PER_DAY:
            raise ConfigError("weekly_uplift needs 672 week-slot factors")

    @property
    def duration_days(self) -> float:
        return 0.0 if self.transition_style == "hard" else self.transition_days

    @classmethod
    def noiseless(cls, n_households: int = 100, year: int = 2021, seed: int = 0, **kw) -> "SynthConfig":
        """Exact round-trip dataset: no noise, hard conventional switches."""
        kw.setdefault("transitions", CONVENTIONAL_TRANSITIONS)
        return cls(
            year=year,
            n_households=n_households,
            seed=seed,
            transition_style="hard",
            noise=0.0,
            level_std=0.0,
            day_effect_std=0.0,
            **kw,
        )

    @classmethod
    def paper_like(cls, n_households: int = 150, year: int = 2021, seed: int = 0, **kw) -> "SynthConfig":
        """Realistic defaults: sliding 21-day transitions, full noise stack."""
        return cls(year=year, n_households=n_households, seed=seed, **kw)

    def to_dict(self) -> dict:
        return {
            "year": self.year,
            "n_households": self.n_households,
            "seed": self.seed,
            "transition_style": self.transition_style,
            "transition_days": self.transition_days,
            "transitions": [[m, d, int(a), int(b)] for m, d, a, b in self.transitions],
            "noise": self.noise,
            "noise_correlation": self.noise_correlation,
            "level_std": self.level_std,
            "day_effect_std": self.day_effect_std,
            "weekly_uplift": list(self.weekly_uplift) if self.weekly_uplift else None,
            "year_end_surge": self.year_end_surge,
            "surge_days": self.surge_days,
            "holiday_behavior": self.holiday_behavior,
            "christmas_eve_behavior": int(self.christmas_eve_behavior),
            "new_years_eve_behavior": int(self.new_years_eve_behavior),
            "pv_rate": self.pv_rate,
            "ev_rate": self.ev_rate,
            "defect_rate": self.defect_rate,
            "gap_rate": self.gap_rate,
            "gap_days": self.gap_days,
        }


@dataclass(frozen=True)
class EvPlan:
    events: tuple[tuple[int, int], ...]  # (start slot, n slots)
    power_kw: float = 11.0


@dataclass(frozen=True)
class DefectPlan:
    stuck_start: int
    stuck_length: int
    stuck_value: float
    spike_slots: tuple[int, ...]
    spike_value: float


@dataclass(frozen=True)
class GroundTruth:
    """Everything the generator planted, for direct comparison."""

    config: SynthConfig
    model: SlpModel                 # normalized planted model, incl. transition
    transition_days: float
    base_year: np.ndarray           # noise-free planted year (1000 kWh basis)
    level_factors: np.ndarray       # per household
    day_effects: np.ndarray         # common per-day factors
    labels: dict[str, tuple[str, ...]]
    pv_households: tuple[int, ...]
    ev_households: tuple[int, ...]
    ev_plans: dict[int, EvPlan]
    defect_plans: dict[int, DefectPlan]
    gap_households: dict[int, tuple[int, int]]  # household -> (start slot, length)

    @property
    def year(self) -> int:
        return self.config.year

    def meter_id(self, i: int) -> str:
        return f"h{i:04d}"

    def household_annual_energy_kwh(self, i: int) -> float:
        """Planted (expected) annual energy: 1000 kWh times the level factor."""
        return 1000.0 * float(self.level_factors[i])

    def defect_slots(self, i: int) -> np.ndarray:
        plan = self.defect_plans.get(i)
        if plan is None:
            return np.array([], dtype=np.int64)
        slots = list(range(plan.stuck_start, plan.stuck_start + plan.stuck_length))
        slots.extend(plan.spike_slots)
        return np.unique(np.array(slots, dtype=np.int64))

    def transition_windows(self) -> list[tuple[dt.date, dt.date]]:
        """First and last blended day of each planted window (empty if hard).

        A date is blended when its integer offset from the centre lies within
        +- duration/2, so a 21-day duration affects the 21 days centre +- 10.
        """
        if self.transition_days == 0 or self.model.transition is None:
            return []
        half = int(np.floor(self.transition_days / 2.0))
        out = []
        for t in self.model.transition.transitions:
            center = t.center(self.year)
            out.append(
                (
                    center - dt.timedelta(days=half),
                    center + dt.timedelta(days=half),
                )
            )
        return out


def behavior_calendar(config: SynthConfig) -> CalendarConfig:
    """The calendar that actually drives the generator's day shapes."""
    holidays = german_holidays() if config.holiday_behavior == "sunday" else frozenset()
    return CalendarConfig(
        holidays=holidays,
        season_boundaries=tuple((m, d, to) for m, d, _, to in config.transitions),
        christmas_eve_rule=config.christmas_eve_behavior,
        new_years_eve_rule=config.new_years_eve_behavior,
    )


def ground_truth(config: SynthConfig) -> GroundTruth:
    """Planted model and all injection plans, without generating series."""
    calendar = behavior_calendar(config)
    transition = TransitionConfig(
        transitions=tuple(
            SeasonTransition(m, d, a, b) for m, d, a, b in config.transitions
        ),
        duration_days=config.duration_days,
    )
    model = SlpModel(
        curve=planted_curve(),
        profiles=planted_profiles(),
        calendar=calendar,
        transition=transition,
    )
    energy = float(assemble(model, config.year).sum()) * 0.25
    model = replace(
        model, profiles=replace(model.profiles, values=model.profiles.values * (1000.0 / energy))
    )
    base_year = assemble(model, config.year)

    streams = np.random.SeedSequence(config.seed).spawn(4)
    rng_levels = np.random.default_rng(streams[0])
    rng_days = np.random.default_rng(streams[1])
    rng_inj = np.random.default_rng(streams[2])

    n = config.n_households
    if config.level_std > 0:
        s = _lognormal_sigma(config.level_std)
        level = np.exp(rng_levels.normal(-0.5 * s * s, s, size=n))
    else:
        level = np.ones(n)
    n_days = days_in_year(config.year)
    if config.day_effect_std > 0:
        s = _lognormal_sigma(config.day_effect_std)
        day_effects = np.exp(rng_days.normal(-0.5 * s * s, s, size=n_days))
    else:
        day_effects = np.ones(n_days)

    n_slots = slots_in_year(config.year)
    pv = np.flatnonzero(rng_inj.random(n) < config.pv_rate)
    ev = np.flatnonzero(rng_inj.random(n) < config.ev_rate)
    defect = np.flatnonzero(rng_inj.random(n) < config.defect_rate)
    gap = np.flatnonzero(rng_inj.random(n) < config.gap_rate)

    ev_plans: dict[int, EvPlan] = {}
    for i in ev:
        n_events = int(rng_inj.integers(80, 140))
        days = np.sort(rng_inj.choice(n_days, size=n_events, replace=False))
        events = []
        for day in days:
            start = day * SLOTS_PER_DAY + int(rng_inj.integers(80, 88))
            length = int(rng_inj.integers(8, 13))
            events.append((int(start), int(min(length, n_slots - start))))
        ev_plans[int(i)] = EvPlan(events=tuple(events))

    defect_plans: dict[int, DefectPlan] = {}
    for i in defect:
        start = int(rng_inj.integers(0, n_slots - 400))
        length = int(rng_inj.integers(120, 240))
        spikes = tuple(
            int(s) for s in np.sort(rng_inj.choice(n_slots, size=3, replace=False))
        )
        defect_plans[int(i)] = DefectPlan(
            stuck_start=start,
            stuck_length=length,
            stuck_value=0.4,
            spike_slots=spikes,
            spike_value=30.0,
        )

    gaps: dict[int, tuple[int, int]] = {}
    for i in gap:
        length = config.gap_days * SLOTS_PER_DAY
        start = int(rng_inj.integers(0, max(1, n_slots - length)))
        gaps[int(i)] = (start, length)

    labels: dict[str, tuple[str, ...]] = {}
    for i in range(n):
        tags = []
        if i in pv:
            tags.append("pv")
        if i in ev:
            tags.append("ev")
        if i in defect:
            tags.append("defect")
        if i in gaps:
            tags.append("gap")
        if tags:
            labels[f"h{i:04d}"] = tuple(tags)

    return GroundTruth(
        config=config,
        model=model,
        transition_days=config.duration_days,
        base_year=base_year,
        level_factors=level,
        day_effects=day_effects,
        labels=labels,
        pv_households=tuple(int(i) for i in pv),
        ev_households=tuple(int(i) for i in ev),
        ev_plans=ev_plans,
        defect_plans=defect_plans,
        gap_households=gaps,
    )


def _pv_curve(year: int) -> np.ndarray:
    """Midday generation, strong enough to push consumption negative."""
    hours = (np.arange(SLOTS_PER_DAY) + 0.5) / 4.0
    bell = 2.0 * _periodic_bump(hours, 13.0, 2.5)
    return np.tile(bell, days_in_year(year))


def _lognormal_sigma(relative_std: float) -> float:
    """Log-space sigma of a mean-1 lognormal with the given relative std."""
    return float(np.sqrt(np.log1p(relative_std**2)))


def _correlated_normal(
    rng: np.random.Generator, size: int, correlation_scale: float
) -> np.ndarray:
    """Unit-variance normal noise with short-range slot correlation.

    Appliance events span several quarter-hour slots, so measurement noise
    is not white; a small Gaussian kernel (std `correlation_scale` slots)
    smooths white noise, then the variance is restored.
    """
    white = rng.standard_normal(size)
    if correlation_scale <= 0:
        return white
    half = max(1, int(np.ceil(3 * correlation_scale)))
    kernel = np.exp(-0.5 * (np.arange(-half, half + 1) / correlation_scale) ** 2)
    kernel /= np.sqrt(np.sum(kernel**2))  # unit output variance
    padded = np.concatenate([white[-half:], white, white[:half]])
    return np.correlate(padded, kernel, mode="valid")


def generate(config: SynthConfig) -> tuple[list[RawSeries], GroundTruth]:
    """Synthesize the household series described by `config`.

    Bit-reproducible per seed; all injected anomalies are recorded in the
    returned GroundTruth.
    """
    gt = ground_truth(config)
    year = config.year
    n_slots = slots_in_year(year)
    common = gt.base_year * np.repeat(gt.day_effects, SLOTS_PER_DAY)
    if config.weekly_uplift is not None:
        uplift = np.asarray(config.weekly_uplift)
        weekdays = np.repeat([d.weekday() for d in year_dates(year)], SLOTS_PER_DAY)
        slot_in_week = weekdays * SLOTS_PER_DAY + np.tile(
            np.arange(SLOTS_PER_DAY), days_in_year(year)
        )
        common = common * uplift[slot_in_week]
    if config.year_end_surge > 0:
        surge = np.ones(days_in_year(year))
        ramp = np.arange(1, config.surge_days + 1) / config.surge_days
        surge[-config.surge_days :] = 1.0 + config.year_end_surge * ramp
        common = common * np.repeat(surge, SLOTS_PER_DAY)

    household_streams = np.random.SeedSequence(config.seed).spawn(4 + config.n_households)[4:]
    pv_curve = _pv_curve(year) if gt.pv_households else None
    series = []
    for i in range(config.n_households):
        rng = np.random.default_rng(household_streams[i])
        values = common * gt.level_factors[i]
        if config.noise > 0:
            s = _lognormal_sigma(config.noise)
            z = _correlated_normal(rng, n_slots, config.noise_correlation)
            values = values * np.exp(s * z - 0.5 * s * s)
        if i in gt.pv_households:
            values = values - pv_curve
        plan = gt.ev_plans.get(i)
        if plan is not None:
            values = values.copy()
            for start, length in plan.events:
                values[start : start + length] += plan.power_kw
        dplan = gt.defect_plans.get(i)
        if dplan is not None:
            values = values.copy()
            values[dplan.stuck_start : dplan.stuck_start + dplan.stuck_length] = dplan.stuck_value
            for slot in dplan.spike_slots:
                values[slot] = dplan.spike_value
        flags = np.full(n_slots, QualityFlag.VALID, dtype=np.uint8)
        if i in gt.gap_households:
            start, length = gt.gap_households[i]
            values = values.copy()
            values[start : start + length] = np.nan
            flags[start : start + length] = QualityFlag.MISSING
        series.append(
            RawSeries(meter_id=gt.meter_id(i), year=year, values=values, flags=flags)
        )
    return series, gt


def write_dataset(
    series: Sequence[RawSeries],
    gt: GroundTruth,
    out_dir: str | Path,
) -> Path:
    """Write meter files, a manifest, the planted model and the ground truth.

    Returns the manifest path.
    """
    out = Path(out_dir)
    meters_dir = out / "meters"
    meters_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for s in series:
        filename = f"{s.meter_id}.csv"
        write_series(s, meters_dir / filename)
        entries.append((s.meter_id, Path("meters") / filename))
    manifest = Manifest(year=gt.year, meters=tuple(entries))
    manifest_path = out / "manifest.json"
    manifest.dump(manifest_path)
    save_model(gt.model, out / "planted_model.json")
    gt_doc = {
        "seed": gt.config.seed,
        "year": gt.year,
        "n_households": gt.config.n_households,
        "transition_days": gt.transition_days,
        "annual_energy_kwh_per_level": 1000.0,
        "level_factors": [float(x) for x in gt.level_factors],
        "labels": {k: list(v) for k, v in sorted(gt.labels.items())},
        "config": gt.config.to_dict(),
    }
    (out / "ground_truth.json").write_text(
        json.dumps(gt_doc, indent=2, sort_keys=True) + "\n"
    )
    return manifest_path
