"""Meter-series ingestion: parsing, quality flagging, prosumer filtering,
exclusion windows and scaling to the 1000 kWh/yr basis.

A series is materialized on the full quarter-hour grid of one civil year;
slots absent from the input file carry the Missing flag and a NaN value.
Only Valid slots enter coverage and aggregation. Quality flags interact so
that flag order is irrelevant: defect detection looks at raw values of all
non-Missing points (flagging only currently-Valid ones), and exclusion
windows override any defect flag.
"""
from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass, replace
from enum import IntEnum
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigError, CoverageError, DataError
from .timegrid import SLOTS_PER_DAY, slots_in_year


class QualityFlag(IntEnum):
    VALID = 0
    MISSING = 1
    DEFECTIVE = 2
    EXCLUDED = 3


@dataclass(frozen=True)
class RawSeries:
    """One meter's quarter-hourly load over a single civil year."""

    meter_id: str
    year: int
    values: np.ndarray  # kW, NaN where Missing
    flags: np.ndarray   # QualityFlag values, uint8

    def __post_init__(self):
        n = slots_in_year(self.year)
        if self.values.shape != (n,) or self.flags.shape != (n,):
            raise DataError(
                f"series {self.meter_id!r}: expected {n} slots for year {self.year}"
            )

    @property
    def valid(self) -> np.ndarray:
        return self.flags == QualityFlag.VALID

    @property
    def coverage(self) -> float:
        """Fraction of the civil year's slots that are Valid."""
        return float(np.count_nonzero(self.valid)) / self.values.size

    def observed_energy_kwh(self) -> float:
        return float(np.nansum(np.where(self.valid, self.values, 0.0))) * 0.25

    def flag_counts(self) -> dict[str, int]:
        return {f.name.lower(): int(np.count_nonzero(self.flags == f)) for f in QualityFlag}


@dataclass(frozen=True)
class ScaledSeries:
    """A RawSeries rescaled so its valid energy equals target x coverage."""

    meter_id: str
    year: int
    values: np.ndarray
    flags: np.ndarray
    scale_factor: float
    coverage: float

    @property
    def valid(self) -> np.ndarray:
        return self.flags == QualityFlag.VALID


@dataclass(frozen=True)
class ExclusionWindow:
    start: dt.date
    end: dt.date  # inclusive
    label: str = ""

    def __post_init__(self):
        if self.start > self.end:
            raise ConfigError(f"exclusion window {self.label!r}: start after end")


@dataclass(frozen=True)
class QualityRules:
    """Rule-based defect detection standing in for model-based methods.

    negative values; constant nonzero runs longer than `max_constant_run`
    slots; single-slot spikes above `spike_factor` times the series' 99th
    percentile (a spike counts as single-slot when both neighbours stay
    below half its height).
    """

    max_constant_run: int = 96
    spike_factor: float = 20.0
    spike_percentile: float = 99.0


def parse_series(path: str | Path, meter_id: str | None = None) -> RawSeries:
    """Parse a meter file: header line, then `timestamp,value_kw` rows.

    Timestamps are naive ISO-8601 on the quarter-hour grid, strictly
    increasing, all within one civil year. Gaps are materialized as Missing.
    Parsing is vectorized; the row-by-row path only runs to locate the
    offending line when the bulk conversion fails.
    """
    path = Path(path)
    if meter_id is None:
        meter_id = path.stem
    lines = path.read_text().splitlines()
    linenos, ts_raw, value_raw = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):  # line 1 is the header
        if not line.strip():
            continue
        cell = line.split(",")
        if len(cell) < 2:
            raise DataError(f"{path}:{lineno}: expected 'timestamp,value_kw'")
        linenos.append(lineno)
        ts_raw.append(cell[0].strip())
        value_raw.append(cell[1].strip())
    if not linenos:
        raise DataError(f"{path}: no data rows")

    try:
        stamps = np.array(ts_raw, dtype="datetime64[s]")
    except ValueError:
        for lineno, raw in zip(linenos, ts_raw):
            try:
                ts = dt.datetime.fromisoformat(raw)
            except ValueError as exc:
                raise DataError(
                    f"{path}:{lineno}: malformed timestamp {raw!r}"
                ) from exc
            if ts.tzinfo is not None:
                raise DataError(f"{path}:{lineno}: malformed timestamp {raw!r}")
        raise DataError(f"{path}: unparseable timestamps")  # pragma: no cover
    try:
        values_in = np.array(value_raw, dtype=float)
    except ValueError:
        for lineno, raw in zip(linenos, value_raw):
            try:
                float(raw)
            except ValueError as exc:
                raise DataError(
                    f"{path}:{lineno}: non-numeric value {raw!r}"
                ) from exc
        raise DataError(f"{path}: unparseable values")  # pragma: no cover
    bad = np.flatnonzero(~np.isfinite(values_in))
    if bad.size:
        i = int(bad[0])
        raise DataError(f"{path}:{linenos[i]}: non-finite value {value_raw[i]!r}")

    years = stamps.astype("datetime64[Y]")
    off_year = np.flatnonzero(years != years[0])
    if off_year.size:
        i = int(off_year[0])
        raise DataError(
            f"{path}:{linenos[i]}: timestamp year differs from "
            f"{years[0]}; one file must cover a single civil year"
        )
    year = int(str(years[0]))
    seconds = (stamps - years[0].astype("datetime64[s]")).astype(np.int64)
    slots, remainder = np.divmod(seconds, 900)
    off_grid = np.flatnonzero(remainder != 0)
    if off_grid.size:
        i = int(off_grid[0])
        raise DataError(
            f"{path}:{linenos[i]}: timestamp {ts_raw[i]!r} is not on the "
            "quarter-hour grid"
        )
    steps = np.diff(slots)
    if np.any(steps == 0):
        i = int(np.flatnonzero(steps == 0)[0]) + 1
        raise DataError(f"{path}:{linenos[i]}: duplicate timestamp {ts_raw[i]}")
    if np.any(steps < 0):
        i = int(np.flatnonzero(steps < 0)[0]) + 1
        raise DataError(f"{path}:{linenos[i]}: timestamps not increasing at {ts_raw[i]}")

    n = slots_in_year(year)
    values = np.full(n, np.nan)
    flags = np.full(n, QualityFlag.MISSING, dtype=np.uint8)
    values[slots] = values_in
    flags[slots] = QualityFlag.VALID
    return RawSeries(meter_id=meter_id, year=year, values=values, flags=flags)


def write_series(series: RawSeries, path: str | Path) -> None:
    """Write the meter-file format parse_series reads (Missing slots omitted)."""
    path = Path(path)
    present = np.flatnonzero(series.flags != QualityFlag.MISSING)
    start = np.datetime64(f"{series.year}-01-01", "s")
    stamps = np.datetime_as_string(start + present * np.timedelta64(900, "s"))
    lines = ["timestamp,value_kw"]
    lines.extend(
        f"{ts},{float(v)!r}"
        for ts, v in zip(stamps, series.values[present])
    )
    path.write_text("\n".join(lines) + "\n")


def _constant_runs(values: np.ndarray, usable: np.ndarray, min_len: int) -> np.ndarray:
    """Mask of slots inside constant nonzero runs longer than min_len."""
    mask = np.zeros(values.size, dtype=bool)
    same = np.zeros(values.size, dtype=bool)
    # a slot continues a run when it and its predecessor are usable and equal
    same[1:] = usable[1:] & usable[:-1] & (values[1:] == values[:-1])
    start = 0
    for i in range(1, values.size + 1):
        if i == values.size or not same[i]:
            run_len = i - start
            if run_len > min_len and usable[start] and values[start] != 0.0:
                mask[start:i] = True
            start = i
    return mask


def flag_defects(series: RawSeries, rules: QualityRules = QualityRules()) -> RawSeries:
    """Re-flag rule-violating points as Defective. Idempotent.

    Detection statistics are computed from the values of all non-Missing
    points so the result does not depend on previously applied flags; only
    currently-Valid points are re-flagged.
    """
    usable = series.flags != QualityFlag.MISSING
    values = np.where(usable, series.values, 0.0)
    defect = usable & (values < 0.0)
    defect |= _constant_runs(series.values, usable, rules.max_constant_run)
    base = values[usable]
    if base.size:
        p99 = float(np.percentile(np.abs(base), rules.spike_percentile))
        if p99 > 0.0:
            threshold = rules.spike_factor * p99
            spike = usable & (values > threshold)
            # single-slot: both defined neighbours stay below half the spike
            left_ok = np.ones(values.size, dtype=bool)
            right_ok = np.ones(values.size, dtype=bool)
            left_ok[1:] = ~usable[:-1] | (values[:-1] <= values[1:] / 2.0)
            right_ok[:-1] = ~usable[1:] | (values[1:] <= values[:-1] / 2.0)
            defect |= spike & left_ok & right_ok
    flags = series.flags.copy()
    flags[defect & (flags == QualityFlag.VALID)] = QualityFlag.DEFECTIVE
    return replace(series, flags=flags)


def is_prosumer(series: RawSeries, rules: QualityRules = QualityRules()) -> bool:
    """Heuristic PV / EV detection on all non-Missing values.

    Feed-in: any negative value (regardless of a Defective or Excluded flag,
    so defect flagging cannot mask generation). EV: at least 10 contiguous
    blocks of >= 2 h at >= 5 kW above the series median.
    """
    usable = series.flags != QualityFlag.MISSING
    values = np.where(usable, series.values, 0.0)
    if np.any(usable & (values < 0.0)):
        return True
    base = values[usable]
    if base.size == 0:
        return False
    median = float(np.median(base))
    high = usable & (values >= median + 5.0)
    # count runs of >= 8 slots (2 h)
    padded = np.concatenate(([False], high, [False]))
    edges = np.flatnonzero(np.diff(padded.astype(np.int8)))
    starts, ends = edges[0::2], edges[1::2]
    n_blocks = int(np.count_nonzero((ends - starts) >= 8))
    return n_blocks >= 10


def apply_exclusions(series: RawSeries, windows: Sequence[ExclusionWindow]) -> RawSeries:
    """Flag all non-Missing points inside any window as Excluded."""
    if not windows:
        return series
    flags = series.flags.copy()
    for w in windows:
        start = dt.date(series.year, 1, 1) if w.start.year < series.year else w.start
        end = dt.date(series.year, 12, 31) if w.end.year > series.year else w.end
        if start.year != series.year or end.year != series.year or start > end:
            continue
        a = (start - dt.date(series.year, 1, 1)).days * SLOTS_PER_DAY
        b = ((end - dt.date(series.year, 1, 1)).days + 1) * SLOTS_PER_DAY
        span = flags[a:b]
        span[span != QualityFlag.MISSING] = QualityFlag.EXCLUDED
    return replace(series, flags=flags)


def scale_to_annual(
    series: RawSeries,
    target_kwh: float = 1000.0,
    min_coverage: float = 0.95,
) -> ScaledSeries:
    """Scale valid values percentually so energy = target x coverage.

    Rejects series with coverage below `min_coverage` or zero observed
    energy. Accepts a ScaledSeries too (re-scaling yields factor 1).
    """
    valid_mask = series.flags == QualityFlag.VALID
    coverage = float(np.count_nonzero(valid_mask)) / series.values.size
    if coverage < min_coverage:
        raise CoverageError(series.meter_id, coverage, min_coverage)
    observed = float(np.nansum(np.where(valid_mask, series.values, 0.0))) * 0.25
    if observed <= 0.0:
        raise DataError(f"series {series.meter_id!r}: observed energy is zero")
    factor = target_kwh * coverage / observed
    values = series.values.copy()
    values[valid_mask] = values[valid_mask] * factor
    return ScaledSeries(
        meter_id=series.meter_id,
        year=series.year,
        values=values,
        flags=series.flags.copy(),
        scale_factor=factor,
        coverage=coverage,
    )


def load_exclusions(path: str | Path) -> list[ExclusionWindow]:
    """Read an exclusion-window file: header `start,end,label`, # comments."""
    windows = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line or line.lower().startswith("start,"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 2:
            raise ConfigError(f"{path}:{lineno}: expected start,end[,label]")
        try:
            start = dt.date.fromisoformat(parts[0])
            end = dt.date.fromisoformat(parts[1])
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: invalid date") from exc
        label = parts[2] if len(parts) > 2 else f"window-{lineno}"
        windows.append(ExclusionWindow(start=start, end=end, label=label))
    return windows


def default_lockdown_windows() -> list[ExclusionWindow]:
    """Packaged German lockdown exclusion windows."""
    ref = resources.files("slpkit.data").joinpath("lockdowns_de.csv")
    with resources.as_file(ref) as path:
        return load_exclusions(path)


@dataclass(frozen=True)
class Manifest:
    """Dataset manifest: profile year plus one file per meter."""

    year: int
    meters: tuple[tuple[str, Path], ...]  # (meter_id, path)

    @classmethod
    def load(cls, path: str | Path) -> "Manifest":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from exc
        if "year" not in doc or "meters" not in doc:
            raise ConfigError(f"manifest {path}: missing 'year' or 'meters'")
        meters = []
        for entry in doc["meters"]:
            meter_path = Path(entry["path"])
            if not meter_path.is_absolute():
                meter_path = path.parent / meter_path
            meters.append((str(entry["meter_id"]), meter_path))
        return cls(year=int(doc["year"]), meters=tuple(meters))

    def dump(self, path: str | Path) -> None:
        doc = {
            "year": self.year,
            "meters": [
                {"meter_id": mid, "path": str(p)} for mid, p in self.meters
            ],
        }
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class MeterReport:
    meter_id: str
    coverage: float
    n_missing: int
    n_defective: int
    n_excluded: int
    prosumer: bool
    accepted: bool
    reason: str


def ingest(
    series_list: Iterable[RawSeries],
    rules: QualityRules = QualityRules(),
    windows: Sequence[ExclusionWindow] = (),
    target_kwh: float = 1000.0,
    min_coverage: float = 0.95,
) -> tuple[list[ScaledSeries], list[MeterReport]]:
    """Full per-meter pipeline: defects, exclusions, prosumer gate, scaling."""
    accepted: list[ScaledSeries] = []
    reports: list[MeterReport] = []
    for raw in series_list:
        flagged = apply_exclusions(flag_defects(raw, rules), windows)
        counts = flagged.flag_counts()
        prosumer = is_prosumer(flagged, rules)
        reason = ""
        scaled = None
        if prosumer:
            reason = "prosumer"
        else:
            try:
                scaled = scale_to_annual(flagged, target_kwh, min_coverage)
            except CoverageError:
                reason = "coverage"
            except DataError:
                reason = "degenerate"
        reports.append(
            MeterReport(
                meter_id=raw.meter_id,
                coverage=flagged.coverage,
                n_missing=counts["missing"],
                n_defective=counts["defective"],
                n_excluded=counts["excluded"],
                prosumer=prosumer,
                accepted=scaled is not None,
                reason=reason,
            )
        )
        if scaled is not None:
            accepted.append(scaled)
    return accepted, reports
