"""Supervised day-type validation with a from-scratch random forest.

Each complete day of the aggregate becomes a 100-value feature vector (96
min-max-scaled slots plus daily energy, morning/evening peak ratio,
night/day ratio and peak slot). A forest of Gini-split trees learns the
workday/Saturday/Sunday distinction from ordinary days; applying it to
holidays and the year-end eves checks the calendar's special-day rules.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calendars import (
    CalendarConfig,
    DayType,
    base_day_type,
    classify_day,
    is_special_day,
)
from .errors import DataError
from .slp import AggregateSeries
from .timegrid import year_dates

N_FEATURES = 100
_EPS = 1e-12


def day_feature(day_values: np.ndarray) -> np.ndarray:
    """100-value feature vector for one complete day of slot loads (kW)."""
    v = np.asarray(day_values, dtype=float)
    if v.shape != (96,):
        raise DataError("day feature needs exactly 96 slot values")
    lo, hi = v.min(), v.max()
    scaled = np.full(96, 0.5) if hi == lo else (v - lo) / (hi - lo)
    energy = v.sum() * 0.25
    morning_peak = v[24:48].max()   # 06:00 - 12:00
    evening_peak = v[68:92].max()   # 17:00 - 23:00
    night = v[0:24].mean()          # 00:00 - 06:00
    day = v[32:88].mean()           # 08:00 - 22:00
    extras = np.array(
        [
            energy,
            morning_peak / (evening_peak + _EPS),
            night / (day + _EPS),
            float(v.argmax()),
        ]
    )
    return np.concatenate([scaled, extras])


@dataclass(frozen=True)
class LabeledDays:
    features: np.ndarray  # (n, 100)
    labels: np.ndarray    # (n,) DayType values
    dates: tuple[dt.date, ...]


def training_days(agg: AggregateSeries, calendar: CalendarConfig) -> LabeledDays:
    """Features and base-weekday labels for complete, non-special days."""
    complete = agg.complete_days()
    rows, labels, dates = [], [], []
    for i, date in enumerate(year_dates(agg.year)):
        if not complete[i] or is_special_day(date, calendar):
            continue
        rows.append(day_feature(agg.values[i]))
        labels.append(int(base_day_type(date)))
        dates.append(date)
    if not rows:
        raise DataError("no complete ordinary days for training")
    return LabeledDays(
        features=np.array(rows), labels=np.array(labels), dates=tuple(dates)
    )


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int = 12
    min_samples_split: int = 2
    n_feature_candidates: int | None = None  # default: round(sqrt(F))
    bootstrap: bool = True
    seed: int = 0


@dataclass
class _Tree:
    """Axis-aligned decision tree stored as parallel arrays."""

    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    dist: list[np.ndarray] = field(default_factory=list)  # leaf class shares

    def add_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.dist.append(None)
        return len(self.feature) - 1

    def leaf_dist(self, x: np.ndarray) -> np.ndarray:
        node = 0
        while self.feature[node] >= 0:
            if x[self.feature[node]] < self.threshold[node]:
                node = self.left[node]
            else:
                node = self.right[node]
        return self.dist[node]


def _gini_best_split(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    features: np.ndarray,
    n_classes: int,
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, impurity) over the candidate features."""
    n = idx.size
    best = None
    for f in features:
        order = np.argsort(X[idx, f], kind="stable")
        values = X[idx[order], f]
        labels = y[idx[order]]
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), labels] = 1.0
        left_counts = np.cumsum(onehot, axis=0)
        total = left_counts[-1]
        splittable = np.flatnonzero(values[1:] != values[:-1])  # split after i
        if splittable.size == 0:
            continue
        nl = (splittable + 1).astype(float)
        nr = n - nl
        lc = left_counts[splittable]
        rc = total[None, :] - lc
        gini_l = 1.0 - np.sum((lc / nl[:, None]) ** 2, axis=1)
        gini_r = 1.0 - np.sum((rc / nr[:, None]) ** 2, axis=1)
        impurity = (nl * gini_l + nr * gini_r) / n
        j = int(impurity.argmin())
        if best is None or impurity[j] < best[2]:
            pos = splittable[j]
            threshold = (values[pos] + values[pos + 1]) / 2.0
            best = (int(f), float(threshold), float(impurity[j]))
    return best


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    idx: np.ndarray,
    params: ForestParams,
    rng: np.random.Generator,
    n_classes: int,
) -> _Tree:
    n_candidates = params.n_feature_candidates or round(np.sqrt(X.shape[1]))
    tree = _Tree()

    def build(node_idx: np.ndarray, depth: int) -> int:
        node = tree.add_node()
        counts = np.bincount(y[node_idx], minlength=n_classes).astype(float)
        tree.dist[node] = counts / counts.sum()
        if (
            depth >= params.max_depth
            or node_idx.size < params.min_samples_split
            or np.count_nonzero(counts) == 1
        ):
            return node
        features = rng.choice(X.shape[1], size=min(n_candidates, X.shape[1]), replace=False)
        split = _gini_best_split(X, y, node_idx, features, n_classes)
        if split is None:
            return node
        f, threshold, _ = split
        goes_left = X[node_idx, f] < threshold
        if not goes_left.any() or goes_left.all():
            return node
        tree.feature[node] = f
        tree.threshold[node] = threshold
        tree.left[node] = build(node_idx[goes_left], depth + 1)
        tree.right[node] = build(node_idx[~goes_left], depth + 1)
        return node

    build(idx, 0)
    return tree


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[_Tree, ...]
    params: ForestParams
    classes: tuple[int, ...]

    @property
    def n_trees(self) -> int:
        return len(self.trees)


def train(
    features: np.ndarray,
    labels: Sequence[int],
    params: ForestParams = ForestParams(),
    classes: Sequence[int] | None = None,
) -> ForestModel:
    """Bootstrap-sampled Gini forest, deterministic for a fixed seed.

    `classes` defaults to all three day types; every listed class must be
    present in the training labels.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.size:
        raise DataError("features and labels disagree")
    expected = [int(c) for c in (classes if classes is not None else DayType)]
    present = set(int(c) for c in np.unique(y))
    missing = [str(c) for c in expected if c not in present]
    if missing:
        raise DataError(f"classes absent from training data: {', '.join(missing)}")
    n_classes = max(expected) + 1
    seeds = np.random.SeedSequence(params.seed).spawn(params.n_trees)
    trees = []
    for tree_seed in seeds:
        rng = np.random.default_rng(tree_seed)
        if params.bootstrap:
            idx = rng.integers(X.shape[0], size=X.shape[0])
        else:
            idx = np.arange(X.shape[0])
        trees.append(_grow_tree(X, y, idx, params, rng, n_classes))
    return ForestModel(trees=tuple(trees), params=params, classes=tuple(range(n_classes)))


def predict(model: ForestModel, feature: np.ndarray) -> tuple[DayType, np.ndarray]:
    """Majority vote over trees; probabilities are the vote shares."""
    x = np.asarray(feature, dtype=float)
    votes = np.zeros(len(model.classes))
    for tree in model.trees:
        votes[int(tree.leaf_dist(x).argmax())] += 1.0
    probs = votes / votes.sum()
    return DayType(int(probs.argmax())), probs


def predict_many(model: ForestModel, features: np.ndarray) -> np.ndarray:
    return np.array([int(predict(model, x)[0]) for x in np.asarray(features, dtype=float)])


def cross_val_accuracy(
    features: np.ndarray,
    labels: Sequence[int],
    params: ForestParams = ForestParams(),
    folds: int = 5,
    classes: Sequence[int] | None = None,
) -> float:
    """Stratified k-fold mean accuracy, deterministic for a fixed seed."""
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(np.random.SeedSequence((params.seed, 0xF01D)))
    fold_of = np.full(y.size, -1, dtype=np.int64)
    for c in np.unique(y):
        members = np.flatnonzero(y == c)
        if members.size < folds:
            raise DataError(
                f"class {int(c)} has {members.size} examples, "
                f"cannot build {folds} folds"
            )
        members = rng.permutation(members)
        fold_of[members] = np.arange(members.size) % folds
    accuracies = []
    for fold in range(folds):
        test = fold_of == fold
        model = train(X[~test], y[~test], params, classes=classes)
        predictions = predict_many(model, X[test])
        accuracies.append(float(np.mean(predictions == y[test])))
    return float(np.mean(accuracies))


@dataclass(frozen=True)
class AuditRow:
    date: dt.date
    category: str  # holiday | christmas_eve | new_years_eve
    calendar_label: DayType
    predicted: DayType
    probabilities: np.ndarray


@dataclass(frozen=True)
class AuditReport:
    rows: tuple[AuditRow, ...]

    def majority(self, category: str) -> DayType | None:
        votes = np.zeros(len(DayType))
        for row in self.rows:
            if row.category == category:
                votes[row.predicted] += 1
        return DayType(int(votes.argmax())) if votes.sum() else None

    def share(self, category: str, day_type: DayType) -> float:
        hits = [r for r in self.rows if r.category == category]
        if not hits:
            return float("nan")
        return sum(1 for r in hits if r.predicted == day_type) / len(hits)

    def as_table(self) -> str:
        lines = ["date,category,calendar_label,predicted,p_workday,p_saturday,p_sunday"]
        for r in self.rows:
            probs = ",".join(repr(float(p)) for p in r.probabilities)
            lines.append(
                f"{r.date.isoformat()},{r.category},{r.calendar_label.label},"
                f"{r.predicted.label},{probs}"
            )
        return "\n".join(lines) + "\n"


def audit_special_days(
    model: ForestModel, agg: AggregateSeries, calendar: CalendarConfig
) -> AuditReport:
    """Predict the day type of every holiday, Dec 24 and Dec 31."""
    complete = agg.complete_days()
    rows = []
    for i, date in enumerate(year_dates(agg.year)):
        if not complete[i]:
            continue
        if date.month == 12 and date.day == 24:
            category = "christmas_eve"
        elif date.month == 12 and date.day == 31:
            category = "new_years_eve"
        elif date in calendar.holidays:
            category = "holiday"
        else:
            continue
        predicted, probs = predict(model, day_feature(agg.values[i]))
        rows.append(
            AuditRow(
                date=date,
                category=category,
                calendar_label=classify_day(date, calendar),
                predicted=predicted,
                probabilities=probs,
            )
        )
    return AuditReport(rows=tuple(rows))
