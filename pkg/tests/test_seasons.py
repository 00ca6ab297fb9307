import datetime as dt

import numpy as np
import pytest

from slpkit.calendars import Season, german_calendar
from slpkit.errors import DataError, NumericError
from slpkit.seasons import (
    ClusterResult,
    DayShapeMatrix,
    build_day_matrix,
    calendar_with_transitions,
    choose_k,
    cluster_season_map,
    detect_transitions,
    kmeans,
    silhouette,
    transitions_to_config,
    weekly_occupancy,
)
from slpkit.slp import AggregateSeries
from slpkit.timegrid import days_in_year, year_dates

YEAR = 2021
N_DAYS = days_in_year(YEAR)


def matrix_from_rows(rows, year=YEAR) -> DayShapeMatrix:
    rows = np.asarray(rows, dtype=float)
    return DayShapeMatrix(rows=rows, dates=tuple(year_dates(year)[: rows.shape[0]]))


def planted_matrix(n_shapes=3, days_per_shape=40, noise=0.02, seed=0):
    """Blocks of `days_per_shape` days drawn from well-separated shapes."""
    rng = np.random.default_rng(seed)
    h = np.arange(96) / 96.0
    shapes = [
        0.5 + 0.45 * np.sin(2 * np.pi * (h - 0.1 * i)) ** (2 * (i + 1))
        for i in range(n_shapes)
    ]
    rows, truth = [], []
    for i, shape in enumerate(shapes):
        for _ in range(days_per_shape):
            rows.append(shape + noise * rng.standard_normal(96))
            truth.append(i)
    rows = np.asarray(rows)
    lo = rows.min(axis=1, keepdims=True)
    hi = rows.max(axis=1, keepdims=True)
    return matrix_from_rows((rows - lo) / (hi - lo)), np.array(truth)


def brute_force_silhouette(rows, labels):
    """Independent textbook silhouette for oracle comparison."""
    n = rows.shape[0]
    scores = []
    for i in range(n):
        own = labels[i]
        same = [j for j in range(n) if labels[j] == own and j != i]
        if not same:
            scores.append(0.0)
            continue
        a = np.mean([np.linalg.norm(rows[i] - rows[j]) for j in same])
        b = min(
            np.mean([np.linalg.norm(rows[i] - rows[j]) for j in range(n) if labels[j] == c])
            for c in set(labels) - {own}
        )
        scores.append(0.0 if max(a, b) == 0 else (b - a) / max(a, b))
    return float(np.mean(scores))


class TestDayMatrix:
    def agg_with_days(self, days):
        days = np.asarray(days, dtype=float)
        values = np.full((N_DAYS, 96), 0.2)
        values[: days.shape[0]] = days
        return AggregateSeries(
            year=YEAR, values=values, counts=np.ones((N_DAYS, 96), dtype=np.int64)
        )

    def test_rows_span_unit_interval(self):
        day = np.linspace(0.1, 0.3, 96)
        matrix = build_day_matrix(self.agg_with_days([day]))
        assert matrix.rows[0].min() == 0.0
        assert matrix.rows[0].max() == 1.0

    def test_constant_day_maps_to_half(self):
        matrix = build_day_matrix(self.agg_with_days([np.full(96, 0.2)]))
        assert np.all(matrix.rows == 0.5)

    def test_affine_invariance(self):
        rng = np.random.default_rng(5)
        day = 0.1 + 0.2 * rng.random(96)
        matrix = build_day_matrix(self.agg_with_days([day, 3.0 * day + 1.5]))
        assert np.allclose(matrix.rows[0], matrix.rows[1])

    def test_incomplete_days_dropped(self):
        values = np.full((N_DAYS, 96), 0.2)
        counts = np.ones((N_DAYS, 96), dtype=np.int64)
        counts[10, 40] = 0
        matrix = build_day_matrix(
            AggregateSeries(year=YEAR, values=values, counts=counts)
        )
        assert len(matrix.dates) == N_DAYS - 1
        assert dt.date(2021, 1, 11) not in matrix.dates

    def test_no_complete_days_rejected(self):
        values = np.full((N_DAYS, 96), 0.2)
        counts = np.zeros((N_DAYS, 96), dtype=np.int64)
        with pytest.raises(DataError):
            build_day_matrix(AggregateSeries(year=YEAR, values=values, counts=counts))


class TestKmeans:
    def test_two_planted_shapes_recovered_exactly(self):
        matrix, truth = planted_matrix(n_shapes=2, noise=0.01)
        result = kmeans(matrix, 2, seed=0)
        # assignments match truth up to label permutation
        flips = {}
        for t, a in zip(truth, result.assignments):
            flips.setdefault(t, set()).add(int(a))
        assert all(len(v) == 1 for v in flips.values())
        assert flips[0] != flips[1]

    def test_k_equals_rows_gives_zero_inertia(self):
        rng = np.random.default_rng(1)
        matrix = matrix_from_rows(rng.random((8, 96)))
        result = kmeans(matrix, 8, seed=0)
        assert result.inertia == pytest.approx(0.0, abs=1e-20)

    def test_duplicate_rows_share_cluster(self):
        rng = np.random.default_rng(2)
        base = rng.random(96)
        rows = np.vstack([base, base, rng.random(96) + 2.0, base])
        result = kmeans(matrix_from_rows(rows), 2, seed=0)
        assert result.assignments[0] == result.assignments[1] == result.assignments[3]

    def test_k_larger_than_rows_rejected(self):
        matrix = matrix_from_rows(np.random.default_rng(0).random((4, 96)))
        with pytest.raises(DataError):
            kmeans(matrix, 5, seed=0)

    def test_fixed_seed_bit_identical(self):
        matrix, _ = planted_matrix(noise=0.1)
        a = kmeans(matrix, 3, seed=7)
        b = kmeans(matrix, 3, seed=7)
        assert np.array_equal(a.assignments, b.assignments)
        assert np.array_equal(a.centroids, b.centroids)
        assert a.silhouette == b.silhouette


class TestSilhouette:
    def test_tight_far_blobs_score_high(self):
        matrix, truth = planted_matrix(n_shapes=2, days_per_shape=5, noise=0.005)
        result = kmeans(matrix, 2, seed=0)
        assert result.silhouette > 0.9

    def test_matches_brute_force_oracle(self):
        rng = np.random.default_rng(9)
        rows = np.vstack([rng.random((5, 96)), rng.random((5, 96)) + 1.0])
        labels = np.array([0] * 5 + [1] * 5)
        matrix = matrix_from_rows(rows)
        result = ClusterResult(
            k=2, assignments=labels, centroids=np.zeros((2, 96)),
            silhouette=0.0, seed=0, inertia=0.0, dates=matrix.dates,
        )
        ours = silhouette(matrix, result)
        oracle = brute_force_silhouette(rows, labels)
        assert ours == pytest.approx(oracle, abs=1e-12)

    def test_random_split_of_one_blob_scores_near_zero(self):
        rng = np.random.default_rng(3)
        rows = rng.standard_normal((30, 96)) * 0.05 + 0.5
        labels = rng.integers(0, 2, size=30)
        matrix = matrix_from_rows(rows)
        result = ClusterResult(
            k=2, assignments=labels, centroids=np.zeros((2, 96)),
            silhouette=0.0, seed=0, inertia=0.0, dates=matrix.dates,
        )
        assert abs(silhouette(matrix, result)) < 0.2

    def test_identical_points_no_nan(self):
        rows = np.vstack([np.full((4, 96), 0.5), np.full((4, 96), 0.9)])
        labels = np.array([0] * 4 + [1] * 4)
        matrix = matrix_from_rows(rows)
        result = ClusterResult(
            k=2, assignments=labels, centroids=np.zeros((2, 96)),
            silhouette=0.0, seed=0, inertia=0.0, dates=matrix.dates,
        )
        score = silhouette(matrix, result)
        assert np.isfinite(score)
        assert score == pytest.approx(1.0, abs=1e-6)  # separated degenerate blobs

    def test_label_permutation_invariant(self):
        matrix, truth = planted_matrix(n_shapes=2, days_per_shape=10, noise=0.05)
        result = kmeans(matrix, 2, seed=0)
        flipped = ClusterResult(
            k=2, assignments=1 - result.assignments, centroids=result.centroids[::-1],
            silhouette=0.0, seed=0, inertia=result.inertia, dates=matrix.dates,
        )
        assert silhouette(matrix, flipped) == pytest.approx(result.silhouette, abs=1e-12)

    def test_scores_bounded(self):
        matrix, _ = planted_matrix(noise=0.3, seed=4)
        result = kmeans(matrix, 3, seed=1)
        assert -1.0 <= result.silhouette <= 1.0


class TestChooseK:
    def test_three_planted_shapes_pick_three(self):
        matrix, _ = planted_matrix(n_shapes=3, noise=0.02)
        assert choose_k(matrix, k_range=(2, 3, 4)).k == 3

    def test_two_planted_shapes_pick_two(self):
        matrix, _ = planted_matrix(n_shapes=2, noise=0.02)
        assert choose_k(matrix, k_range=(2, 3, 4)).k == 2

    def test_pure_noise_flagged_weak(self):
        rng = np.random.default_rng(11)
        rows = 0.5 + 0.05 * rng.standard_normal((60, 96))
        matrix = matrix_from_rows(rows)
        with pytest.warns(UserWarning, match="weak"):
            best = choose_k(matrix, k_range=(2, 3, 4))
        assert best.weak
        assert best.silhouette < 0.25
        assert best.k == 2  # ties and near-ties resolve to the smallest k


class TestWeeklyOccupancy:
    def result_with_assignments(self, assignments, k=3):
        assignments = np.asarray(assignments, dtype=np.int64)
        dates = tuple(year_dates(YEAR)[: assignments.size])
        return ClusterResult(
            k=k, assignments=assignments, centroids=np.zeros((k, 96)),
            silhouette=0.0, seed=0, inertia=0.0, dates=dates,
        )

    def test_pure_week_row(self):
        # 2021-01-04 .. 2021-01-10 is a full ISO week (week 1)
        assignments = np.zeros(17, dtype=np.int64)
        occupancy = weekly_occupancy(self.result_with_assignments(assignments))
        row = occupancy.shares[occupancy.weeks.index((2021, 1))]
        assert np.allclose(row, [1.0, 0.0, 0.0])

    def test_alternating_week_counts(self):
        assignments = np.array([0, 1] * 9)[:17]
        occupancy = weekly_occupancy(self.result_with_assignments(assignments))
        row = occupancy.shares[occupancy.weeks.index((2021, 1))]
        assert sorted(row, reverse=True)[0] == pytest.approx(4 / 7)
        assert sorted(row, reverse=True)[1] == pytest.approx(3 / 7)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(6)
        occupancy = weekly_occupancy(
            self.result_with_assignments(rng.integers(0, 3, size=N_DAYS))
        )
        assert np.allclose(occupancy.shares.sum(axis=1), 1.0, atol=1e-9)

    def test_table_export(self):
        occupancy = weekly_occupancy(self.result_with_assignments(np.zeros(14, dtype=np.int64)))
        table = occupancy.as_table()
        assert table.startswith("iso_year,iso_week,cluster_0")


class TestDetectTransitions:
    def two_cluster_result(self, flip_day):
        assignments = np.where(np.arange(N_DAYS) < flip_day, 0, 1).astype(np.int64)
        return ClusterResult(
            k=2, assignments=assignments, centroids=np.zeros((2, 96)),
            silhouette=0.0, seed=0, inertia=0.0, dates=tuple(year_dates(YEAR)),
        )

    def test_hard_flip_located_within_week(self):
        flip_day = 120  # 2021-05-01
        transitions = detect_transitions(self.two_cluster_result(flip_day), german_calendar())
        assert len(transitions) == 1
        t, s1, s2 = transitions[0]
        assert abs((t - dt.date(2021, 5, 1)).days) <= 7
        assert s1 != s2

    def test_sliding_blend_located_at_center(self):
        rng = np.random.default_rng(8)
        center, width = 120, 21
        assignments = np.empty(N_DAYS, dtype=np.int64)
        for i in range(N_DAYS):
            p = np.clip((i - center + width / 2) / width, 0.0, 1.0)
            assignments[i] = int(rng.random() < p)
        result = ClusterResult(
            k=2, assignments=assignments, centroids=np.zeros((2, 96)),
            silhouette=0.0, seed=0, inertia=0.0, dates=tuple(year_dates(YEAR)),
        )
        transitions = detect_transitions(result, german_calendar())
        t, _, _ = transitions[0]
        assert abs((t - dt.date(2021, 5, 1)).days) <= 7

    def test_single_cluster_rejected(self):
        result = ClusterResult(
            k=1, assignments=np.zeros(N_DAYS, dtype=np.int64),
            centroids=np.zeros((1, 96)), silhouette=0.0, seed=0, inertia=0.0,
            dates=tuple(year_dates(YEAR)),
        )
        with pytest.raises(NumericError, match="manual"):
            detect_transitions(result, german_calendar())

    def test_transitions_to_config_and_calendar(self):
        transitions = [
            (dt.date(2021, 3, 8), Season.WINTER, Season.TRANSITION),
            (dt.date(2021, 5, 3), Season.TRANSITION, Season.SUMMER),
        ]
        config = transitions_to_config(transitions, duration_days=15.0)
        assert config.duration_days == 15.0
        assert config.transitions[0].month == 3
        calendar = calendar_with_transitions(german_calendar(), transitions)
        assert calendar.season_boundaries == (
            (3, 8, Season.TRANSITION),
            (5, 3, Season.SUMMER),
        )

    def test_cluster_season_map_majority(self, paper_data):
        cfg, gt, scaled, agg = paper_data
        matrix = build_day_matrix(agg)
        result = kmeans(matrix, 3, seed=0)
        mapping = cluster_season_map(result, german_calendar())
        assert set(mapping.values()) == {Season.WINTER, Season.SUMMER, Season.TRANSITION}
