"""Data-driven validation of the season structure.

Each complete day of the aggregate becomes a min-max-scaled 96-value shape
vector; k-means over those vectors, with the cluster count picked by mean
silhouette, shows whether the data supports the three-season assumption.
The weekly occupancy of the clusters exposes sliding changeovers, and the
transition detector turns the weekly majority sequence into concrete
changeover dates.
"""
from __future__ import annotations

import datetime as dt
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .calendars import CalendarConfig, Season, season_of
from .errors import DataError, NumericError
from .slp import AggregateSeries
from .timegrid import year_dates
from .transitions import SeasonTransition, TransitionConfig


@dataclass(frozen=True)
class DayShapeMatrix:
    """One min-max-scaled row per complete day."""

    rows: np.ndarray  # (n_days, 96), each row in [0, 1]
    dates: tuple[dt.date, ...]

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[0] != len(self.dates):
            raise DataError("day matrix rows and dates disagree")


@dataclass(frozen=True)
class ClusterResult:
    k: int
    assignments: np.ndarray  # (n_days,) cluster ids
    centroids: np.ndarray    # (k, 96)
    silhouette: float
    seed: int
    inertia: float
    dates: tuple[dt.date, ...]

    @property
    def weak(self) -> bool:
        """Clustering too weak to trust (silhouette below 0.25)."""
        return self.silhouette < 0.25


def build_day_matrix(agg: AggregateSeries) -> DayShapeMatrix:
    """Min-max scale every complete day; constant days map to all-0.5."""
    complete = agg.complete_days()
    if not complete.any():
        raise DataError("no complete days for shape clustering")
    days = agg.values[complete]
    lo = days.min(axis=1, keepdims=True)
    hi = days.max(axis=1, keepdims=True)
    span = hi - lo
    flat = span[:, 0] == 0.0
    span[flat] = 1.0
    rows = (days - lo) / span
    rows[flat] = 0.5
    dates = tuple(d for d, c in zip(year_dates(agg.year), complete) if c)
    return DayShapeMatrix(rows=rows, dates=dates)


def _squared_distances(rows: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = rows[:, None, :] - centroids[None, :, :]
    return np.einsum("nkd,nkd->nk", diff, diff)


def _kmeans_pp_init(rows: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = rows.shape[0]
    centroids = np.empty((k, rows.shape[1]))
    centroids[0] = rows[rng.integers(n)]
    d2 = np.sum((rows - centroids[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total == 0.0:
            centroids[j:] = rows[rng.integers(n, size=k - j)]
            break
        centroids[j] = rows[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((rows - centroids[j]) ** 2, axis=1))
    return centroids


def kmeans(
    matrix: DayShapeMatrix, k: int, seed: int = 0, max_iter: int = 300
) -> ClusterResult:
    """Lloyd's iterations with k-means++ init, Euclidean distance.

    Runs to an assignment fixpoint (or max_iter); deterministic for a fixed
    seed. Emptied clusters are re-seeded with the point farthest from its
    assigned centroid.
    """
    rows = matrix.rows
    n = rows.shape[0]
    if k < 2:
        raise DataError("k must be >= 2")
    if k > n:
        raise DataError(f"k = {k} exceeds the {n} available days")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(rows, k, rng)
    assignments = np.full(n, -1, dtype=np.int64)
    for _ in range(max_iter):
        d2 = _squared_distances(rows, centroids)
        new_assignments = d2.argmin(axis=1)
        for cluster in range(k):
            if (new_assignments == cluster).any():
                continue
            assigned = d2[np.arange(n), new_assignments]
            farthest = int(assigned.argmax())
            new_assignments[farthest] = cluster
            centroids[cluster] = rows[farthest]
        if np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        for cluster in range(k):
            members = rows[assignments == cluster]
            if members.size:
                centroids[cluster] = members.mean(axis=0)
    inertia = float(
        np.sum((rows - centroids[assignments]) ** 2)
    )
    result = ClusterResult(
        k=k,
        assignments=assignments,
        centroids=centroids,
        silhouette=0.0,
        seed=seed,
        inertia=inertia,
        dates=matrix.dates,
    )
    return replace(result, silhouette=silhouette(matrix, result))


def silhouette(matrix: DayShapeMatrix, result: ClusterResult) -> float:
    """Mean silhouette over all rows (standard a/b form, Euclidean).

    Points in single-member clusters score 0, as do points where both the
    cohesion and separation terms vanish.
    """
    rows = matrix.rows
    labels = result.assignments
    n = rows.shape[0]
    sq = np.sum(rows**2, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * rows @ rows.T, 0.0)
    dist = np.sqrt(d2)
    scores = np.zeros(n)
    cluster_ids = np.unique(labels)
    if cluster_ids.size < 2:
        raise DataError("silhouette requires at least two clusters")
    masks = {c: labels == c for c in cluster_ids}
    sizes = {c: int(np.count_nonzero(masks[c])) for c in cluster_ids}
    for i in range(n):
        own = labels[i]
        if sizes[own] <= 1:
            scores[i] = 0.0
            continue
        a = dist[i, masks[own]].sum() / (sizes[own] - 1)
        b = min(
            dist[i, masks[c]].mean() for c in cluster_ids if c != own
        )
        denom = max(a, b)
        scores[i] = 0.0 if denom == 0.0 else (b - a) / denom
    return float(scores.mean())


def choose_k(
    matrix: DayShapeMatrix,
    k_range: Sequence[int] = range(2, 9),
    n_seeds: int = 10,
    base_seed: int = 0,
    seeds: Sequence[int] | None = None,
) -> ClusterResult:
    """Best clustering over k and seeds by mean silhouette.

    Ties break toward smaller k. A winning silhouette below 0.25 raises a
    warning (the result's `weak` flag is set too).
    """
    if seeds is None:
        seeds = [base_seed + i for i in range(n_seeds)]
    best: ClusterResult | None = None
    for k in k_range:
        for seed in seeds:
            result = kmeans(matrix, k, seed=seed)
            if (
                best is None
                or result.silhouette > best.silhouette + 1e-12
                or (abs(result.silhouette - best.silhouette) <= 1e-12 and result.k < best.k)
            ):
                best = result
    if best is None:
        raise DataError("empty k_range")
    if best.weak:
        warnings.warn(
            f"weak season structure: best silhouette {best.silhouette:.3f} < 0.25",
            stacklevel=2,
        )
    return best


@dataclass(frozen=True)
class WeeklyOccupancy:
    """Share of each cluster per ISO week; rows sum to 1."""

    weeks: tuple[tuple[int, int], ...]  # (iso year, iso week)
    first_days: tuple[dt.date, ...]
    shares: np.ndarray  # (n_weeks, k)

    def as_table(self) -> str:
        k = self.shares.shape[1]
        lines = ["iso_year,iso_week," + ",".join(f"cluster_{c}" for c in range(k))]
        for (yr, wk), row in zip(self.weeks, self.shares):
            lines.append(f"{yr},{wk}," + ",".join(repr(float(v)) for v in row))
        return "\n".join(lines) + "\n"

    def mixed_weeks(self, tolerance: float = 0.0) -> list[tuple[int, int]]:
        """Weeks where no cluster holds a share of at least 1 - tolerance."""
        out = []
        for (yr, wk), row in zip(self.weeks, self.shares):
            if row.max() < 1.0 - tolerance:
                out.append((yr, wk))
        return out


def weekly_occupancy(result: ClusterResult) -> WeeklyOccupancy:
    """Fig.-5-style table: normalized cluster assignment per ISO week."""
    buckets: dict[tuple[int, int], list[int]] = {}
    firsts: dict[tuple[int, int], dt.date] = {}
    for date, cluster in zip(result.dates, result.assignments):
        iso = date.isocalendar()
        key = (iso[0], iso[1])
        buckets.setdefault(key, []).append(int(cluster))
        firsts[key] = min(firsts.get(key, date), date)
    keys = sorted(buckets, key=lambda key: firsts[key])
    shares = np.zeros((len(keys), result.k))
    for i, key in enumerate(keys):
        members = buckets[key]
        for c in members:
            shares[i, c] += 1.0
        shares[i] /= len(members)
    return WeeklyOccupancy(
        weeks=tuple(keys),
        first_days=tuple(firsts[key] for key in keys),
        shares=shares,
    )


def cluster_season_map(
    result: ClusterResult, calendar: CalendarConfig
) -> dict[int, Season]:
    """Majority calendar season of each cluster's member days."""
    votes: dict[int, np.ndarray] = {
        c: np.zeros(len(Season)) for c in range(result.k)
    }
    for date, cluster in zip(result.dates, result.assignments):
        votes[int(cluster)][season_of(date, calendar)] += 1
    return {c: Season(int(v.argmax())) for c, v in votes.items()}


def detect_transitions(
    result: ClusterResult,
    calendar: CalendarConfig,
    min_stable_weeks: int = 2,
) -> list[tuple[dt.date, Season, Season]]:
    """Changeover dates from the weekly majority-season sequence.

    A changeover is the midpoint of the span between two consecutive stable
    majority runs (at least `min_stable_weeks` weeks each) of different
    seasons; alternating weeks in between fall inside that span.
    """
    occupancy = weekly_occupancy(result)
    season_by_cluster = cluster_season_map(result, calendar)
    majorities: list[Season] = []
    for row in occupancy.shares:
        votes = np.zeros(len(Season))
        for c, share in enumerate(row):
            votes[season_by_cluster[c]] += share
        majorities.append(Season(int(votes.argmax())))

    runs: list[tuple[Season, int, int]] = []  # (season, first week, last week)
    start = 0
    for i in range(1, len(majorities) + 1):
        if i == len(majorities) or majorities[i] != majorities[start]:
            runs.append((majorities[start], start, i - 1))
            start = i
    stable = [r for r in runs if r[2] - r[1] + 1 >= min_stable_weeks]
    merged: list[tuple[Season, int, int]] = []
    for r in stable:
        if merged and merged[-1][0] == r[0]:
            merged[-1] = (r[0], merged[-1][1], r[2])
        else:
            merged.append(r)
    if len(merged) < 2:
        raise NumericError(
            "no stable season changeover found; set season boundaries manually"
        )
    transitions = []
    for (s1, _, last1), (s2, first2, _) in zip(merged, merged[1:]):
        if last1 + 1 < len(occupancy.first_days):
            window_start = occupancy.first_days[last1 + 1]
        else:
            window_start = occupancy.first_days[last1] + dt.timedelta(days=7)
        window_end = occupancy.first_days[first2]
        center = window_start + (window_end - window_start) / 2
        transitions.append((center, s1, s2))
    return transitions


def transitions_to_config(
    transitions: Sequence[tuple[dt.date, Season, Season]],
    duration_days: float = 21.0,
) -> TransitionConfig:
    return TransitionConfig(
        transitions=tuple(
            SeasonTransition(t.month, t.day, s1, s2) for t, s1, s2 in transitions
        ),
        duration_days=duration_days,
    )


def calendar_with_transitions(
    calendar: CalendarConfig,
    transitions: Sequence[tuple[dt.date, Season, Season]],
) -> CalendarConfig:
    """Replace the season boundaries with the detected changeover dates."""
    boundaries = tuple(
        (t.month, t.day, s2) for t, _, s2 in transitions
    )
    return calendar.with_boundaries(boundaries)
