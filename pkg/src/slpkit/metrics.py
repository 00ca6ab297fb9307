"""Error metrics and the model-comparison experiments.

Evaluation is in-sample against the training aggregate by default, mirroring
how small datasets force profile methods to be judged; pass any other
reference series for a holdout comparison.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .calendars import CalendarConfig, DayType, classify_day
from .errors import ConfigError, DataError
from .series import ExclusionWindow, ScaledSeries
from .smoothing import savgol_smooth
from .timegrid import year_dates


def mae(series: np.ndarray, reference: np.ndarray) -> float:
    """Mean absolute slot error; slots empty (NaN) on either side skipped."""
    a = np.asarray(series, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise DataError(f"series shapes differ: {a.shape} vs {b.shape}")
    mask = np.isfinite(a) & np.isfinite(b)
    if not mask.any():
        raise DataError("no overlapping slots to compare")
    return float(np.mean(np.abs(a[mask] - b[mask])))


def data_hash(*arrays: np.ndarray) -> str:
    h = hashlib.sha256()
    for arr in arrays:
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


@dataclass(frozen=True)
class EvalReport:
    model_id: str
    mae_kw: float
    residuals: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mae_kw < 0:
            raise DataError("mae must be non-negative")


def compare_models(
    reference: np.ndarray,
    models: Mapping[str, np.ndarray] | Sequence[tuple[str, np.ndarray]],
    keep_residuals: bool = False,
    metadata: dict | None = None,
) -> list[EvalReport]:
    """MAE of each model series against the reference, sorted ascending."""
    items = list(models.items()) if isinstance(models, Mapping) else list(models)
    if len(items) < 2:
        raise ConfigError("compare_models needs at least two models")
    meta = dict(metadata or {})
    meta.setdefault("data_hash", data_hash(np.nan_to_num(np.asarray(reference))))
    reports = []
    for name, series in items:
        residuals = None
        if keep_residuals:
            residuals = np.asarray(series, dtype=float) - np.asarray(reference, dtype=float)
        reports.append(
            EvalReport(model_id=name, mae_kw=mae(series, reference),
                       residuals=residuals, metadata=meta)
        )
    return sorted(reports, key=lambda r: (r.mae_kw, r.model_id))


@dataclass(frozen=True)
class ShareCurve:
    """Mean MAE of subsample-built profiles vs. the full-pool profile."""

    shares: tuple[float, ...]
    mae_filtered: tuple[float, ...]
    mae_unfiltered: tuple[float, ...]
    repeats: int
    seed: int
    subsample_indices: tuple[tuple[tuple[int, ...], ...], ...]  # [share][repeat]

    def __post_init__(self):
        if not (len(self.shares) == len(self.mae_filtered) == len(self.mae_unfiltered)):
            raise ConfigError("share curve lists must have equal length")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")

    def as_table(self) -> str:
        lines = ["share,mae_filtered_kw,mae_unfiltered_kw"]
        for s, f, u in zip(self.shares, self.mae_filtered, self.mae_unfiltered):
            lines.append(f"{s!r},{f!r},{u!r}")
        return "\n".join(lines) + "\n"


def share_experiment(
    pool: Sequence[ScaledSeries],
    shares: Sequence[float],
    calendar: CalendarConfig,
    repeats: int = 10,
    window: int = 11,
    polyorder: int = 3,
    degree: int = 4,
    transition=None,
    seed: int = 0,
) -> ShareCurve:
    """Rebuild the profile from random subsamples, with and without the
    Savitzky-Golay filter, and compare each against the full-pool profile.

    The reference is the unfiltered profile built from the whole pool (with
    the same calendar and transition settings). Subsampling is without
    replacement; `repeats` draws per share are averaged. Deterministic for a
    fixed seed; the drawn indices are recorded on the result.
    """
    from .slp import assemble, build_slp_model_from_aggregate, aggregate

    if not pool:
        raise DataError("share experiment needs a non-empty pool")
    shares = [float(s) for s in shares]
    for s in shares:
        if not 0.0 < s <= 1.0:
            raise ConfigError(f"share {s} outside (0, 1]")
    year = pool[0].year
    full_model = build_slp_model_from_aggregate(
        aggregate(pool), calendar, degree=degree, transition=transition
    )
    reference = assemble(full_model, year)
    rng = np.random.default_rng(seed)
    n = len(pool)
    mae_filtered, mae_unfiltered, all_indices = [], [], []
    for share in shares:
        size = max(1, round(share * n))
        if size > n:
            raise ConfigError(f"share {share} needs {size} of {n} series")
        maes_f, maes_u, share_indices = [], [], []
        for _ in range(repeats):
            idx = np.sort(rng.choice(n, size=size, replace=False))
            share_indices.append(tuple(int(i) for i in idx))
            subset = [pool[i] for i in idx]
            model = build_slp_model_from_aggregate(
                aggregate(subset), calendar, degree=degree, transition=transition
            )
            maes_u.append(mae(assemble(model, year), reference))
            filtered = model.profiles.map(
                lambda p: savgol_smooth(p, window=window, polyorder=polyorder)
            )
            maes_f.append(mae(assemble(replace(model, profiles=filtered), year), reference))
        mae_filtered.append(float(np.mean(maes_f)))
        mae_unfiltered.append(float(np.mean(maes_u)))
        all_indices.append(tuple(share_indices))
    return ShareCurve(
        shares=tuple(shares),
        mae_filtered=tuple(mae_filtered),
        mae_unfiltered=tuple(mae_unfiltered),
        repeats=repeats,
        seed=seed,
        subsample_indices=tuple(all_indices),
    )


def kink_report(
    curve: ShareCurve,
    which: str = "unfiltered",
    threshold: float | None = None,
    threshold_ratio: float = 2.0,
) -> list[float]:
    """Shares where the error curve bends: interior points whose change of
    slope exceeds the threshold (default: 2x the median slope change)."""
    values = {
        "unfiltered": curve.mae_unfiltered,
        "filtered": curve.mae_filtered,
    }.get(which)
    if values is None:
        raise ConfigError(f"unknown curve {which!r}")
    if len(curve.shares) < 4:
        raise ConfigError("kink detection needs at least 4 share points")
    s = np.asarray(curve.shares)
    m = np.asarray(values)
    slopes = np.diff(m) / np.diff(s)
    bend = np.abs(np.diff(slopes))
    if threshold is None:
        threshold = threshold_ratio * float(np.median(bend))
    return [float(x) for x in s[1:-1][bend > threshold]]


def window_compare(
    series: Sequence[ScaledSeries],
    window_a: ExclusionWindow,
    window_b: ExclusionWindow,
    calendar: CalendarConfig,
) -> dict[DayType, tuple[np.ndarray, np.ndarray]]:
    """Availability-weighted mean daily profile per day type, per window."""
    from .slp import aggregate

    agg = aggregate(series)
    dates = year_dates(agg.year)
    day_types = np.array([classify_day(d, calendar) for d in dates], dtype=np.int64)

    def window_mask(w: ExclusionWindow) -> np.ndarray:
        return np.array([w.start <= d <= w.end for d in dates])

    def mean_profile(day_mask: np.ndarray) -> np.ndarray:
        if not day_mask.any():
            raise DataError("window contains no matching days")
        counts = agg.counts[day_mask]
        values = np.where(counts > 0, agg.values[day_mask], 0.0)
        weight = counts.sum(axis=0)
        if np.any(weight == 0):
            raise DataError("window has slots with no data")
        return (values * counts).sum(axis=0) / weight

    mask_a, mask_b = window_mask(window_a), window_mask(window_b)
    out = {}
    for day_type in DayType:
        rows = day_types == day_type
        out[day_type] = (
            mean_profile(mask_a & rows),
            mean_profile(mask_b & rows),
        )
    return out
