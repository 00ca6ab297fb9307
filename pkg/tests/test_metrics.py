import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slpkit.calendars import DayType, german_calendar
from slpkit.errors import ConfigError, DataError
from slpkit.metrics import (
    EvalReport,
    ShareCurve,
    compare_models,
    kink_report,
    mae,
    share_experiment,
    window_compare,
)
from slpkit.series import ExclusionWindow, QualityFlag, ScaledSeries, ingest
from slpkit.synth import SynthConfig, generate
from slpkit.timegrid import slots_in_year

YEAR = 2021


class TestMae:
    def test_identical_series_zero(self):
        x = np.random.default_rng(0).random(100)
        assert mae(x, x) == 0.0

    def test_constant_offset(self):
        x = np.full(100, 0.1)
        assert mae(x + 0.001, x) == pytest.approx(0.001)

    def test_symmetry_and_scaling(self):
        rng = np.random.default_rng(1)
        a, b = rng.random(50), rng.random(50)
        assert mae(a, b) == mae(b, a)
        assert mae(3 * a, 3 * b) == pytest.approx(3 * mae(a, b))

    def test_nan_slots_skipped(self):
        a = np.array([0.1, 0.2, 0.3])
        b = np.array([0.1, np.nan, 0.5])
        assert mae(a, b) == pytest.approx(0.1)

    def test_no_overlap_rejected(self):
        with pytest.raises(DataError):
            mae(np.array([np.nan]), np.array([1.0]))

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DataError):
            mae(np.ones(3), np.ones(4))

    @given(st.floats(min_value=0.01, max_value=10.0))
    @settings(max_examples=20, deadline=None)
    def test_common_scaling_linear(self, c):
        rng = np.random.default_rng(2)
        a, b = rng.random(64), rng.random(64)
        assert mae(c * a, c * b) == pytest.approx(c * mae(a, b), rel=1e-9)


class TestCompareModels:
    def test_sorted_and_order_invariant(self):
        rng = np.random.default_rng(3)
        reference = rng.random(200)
        models = {
            "good": reference + 0.001,
            "bad": reference + 0.01,
            "medium": reference + 0.005,
        }
        reports = compare_models(reference, models)
        assert [r.model_id for r in reports] == ["good", "medium", "bad"]
        reversed_reports = compare_models(reference, list(models.items())[::-1])
        assert [r.model_id for r in reversed_reports] == ["good", "medium", "bad"]

    def test_duplicate_models_identical(self):
        rng = np.random.default_rng(4)
        reference = rng.random(100)
        series = reference + 0.002
        reports = compare_models(reference, [("a", series), ("b", series)])
        assert reports[0].mae_kw == reports[1].mae_kw

    def test_needs_two_models(self):
        with pytest.raises(ConfigError):
            compare_models(np.ones(10), [("only", np.ones(10))])

    def test_metadata_has_data_hash(self):
        reference = np.ones(10)
        reports = compare_models(reference, [("a", reference), ("b", reference)])
        assert "data_hash" in reports[0].metadata

    def test_negative_mae_impossible(self):
        with pytest.raises(DataError):
            EvalReport(model_id="x", mae_kw=-1.0)


def small_pool(n=24, seed=0):
    cfg = SynthConfig.paper_like(n_households=n, seed=seed)
    series, gt = generate(cfg)
    scaled, _ = ingest(series)
    return gt, scaled


@pytest.fixture(scope="module")
def pool():
    return small_pool()


class TestShareExperiment:

    def test_full_share_unfiltered_is_zero(self, pool):
        gt, scaled = pool
        curve = share_experiment(
            scaled, shares=[0.5, 1.0], calendar=gt.model.calendar,
            repeats=2, transition=gt.model.transition, seed=1,
        )
        assert curve.mae_unfiltered[-1] == pytest.approx(0.0, abs=1e-12)
        assert curve.mae_unfiltered[0] > 0.0

    def test_deterministic_for_seed(self, pool):
        gt, scaled = pool
        kwargs = dict(
            shares=[0.25, 0.5], calendar=gt.model.calendar,
            repeats=3, transition=gt.model.transition, seed=9,
        )
        a = share_experiment(scaled, **kwargs)
        b = share_experiment(scaled, **kwargs)
        assert a.mae_filtered == b.mae_filtered
        assert a.mae_unfiltered == b.mae_unfiltered
        assert a.subsample_indices == b.subsample_indices

    def test_indices_logged_per_repeat(self, pool):
        gt, scaled = pool
        curve = share_experiment(
            scaled, shares=[0.25], calendar=gt.model.calendar,
            repeats=3, transition=gt.model.transition, seed=2,
        )
        assert len(curve.subsample_indices) == 1
        assert len(curve.subsample_indices[0]) == 3
        for idx in curve.subsample_indices[0]:
            assert len(idx) == round(0.25 * len(scaled))

    def test_invalid_share_rejected(self, pool):
        gt, scaled = pool
        with pytest.raises(ConfigError):
            share_experiment(
                scaled, shares=[1.5], calendar=gt.model.calendar, repeats=1,
            )

    def test_table_export(self, pool):
        gt, scaled = pool
        curve = share_experiment(
            scaled, shares=[0.5, 1.0], calendar=gt.model.calendar,
            repeats=1, transition=gt.model.transition, seed=1,
        )
        assert curve.as_table().startswith("share,mae_filtered_kw,mae_unfiltered_kw")


def curve_from_maes(shares, maes):
    return ShareCurve(
        shares=tuple(shares),
        mae_filtered=tuple(maes),
        mae_unfiltered=tuple(maes),
        repeats=1,
        seed=0,
        subsample_indices=tuple(((),) for _ in shares),
    )


class TestKinkReport:
    def test_straight_line_empty(self):
        shares = [0.2, 0.4, 0.6, 0.8, 1.0]
        maes = [1.0 - 0.5 * s for s in shares]
        assert kink_report(curve_from_maes(shares, maes)) == []

    def test_knee_detected(self):
        shares = [0.13, 0.23, 0.33, 0.43, 0.53]
        maes = [0.9 - 2.0 * min(s, 0.33) - 0.1 * max(s - 0.33, 0.0) for s in shares]
        kinks = kink_report(curve_from_maes(shares, maes))
        assert kinks == [pytest.approx(0.33)]

    def test_zero_threshold_reports_all_interior(self):
        shares = [0.2, 0.4, 0.6, 0.8]
        maes = [1.0, 0.5, 0.3, 0.25]  # generic convex curve
        kinks = kink_report(curve_from_maes(shares, maes), threshold=0.0)
        assert kinks == [pytest.approx(0.4), pytest.approx(0.6)]

    def test_too_few_points_rejected(self):
        with pytest.raises(ConfigError):
            kink_report(curve_from_maes([0.5, 1.0], [1.0, 0.0]))


class TestWindowCompare:
    def build_series(self, uplift_window=None, seed=0, n=6):
        cfg = SynthConfig.paper_like(n_households=n, seed=seed)
        series, gt = generate(cfg)
        if uplift_window is not None:
            start, end = uplift_window
            a = (start - dt.date(YEAR, 1, 1)).days * 96
            b = ((end - dt.date(YEAR, 1, 1)).days + 1) * 96
            bump = np.ones(96)
            bump[44:60] += 0.8  # midday uplift 11:00 - 15:00
            for s in series:
                span = s.values[a:b].reshape(-1, 96)
                span *= bump[None, :]
        scaled, _ = ingest(series)
        return gt, scaled

    def test_identical_windows_identical_profiles(self):
        gt, scaled = self.build_series()
        window = ExclusionWindow(dt.date(YEAR, 2, 1), dt.date(YEAR, 2, 28), "a")
        out = window_compare(scaled, window, window, gt.model.calendar)
        for day_type in DayType:
            a, b = out[day_type]
            assert np.array_equal(a, b)

    def test_planted_midday_uplift_shows_at_midday(self):
        window_b = (dt.date(YEAR, 6, 1), dt.date(YEAR, 6, 30))
        gt, scaled = self.build_series(uplift_window=window_b, n=20)
        wa = ExclusionWindow(dt.date(YEAR, 7, 1), dt.date(YEAR, 7, 31), "a")
        wb = ExclusionWindow(*window_b, "b")
        out = window_compare(scaled, wa, wb, gt.model.calendar)
        a, b = out[DayType.WORKDAY]
        peak_slot = int(np.argmax(np.abs(b - a)))
        assert 44 <= peak_slot < 60

    def test_disjoint_windows_same_generator_agree(self):
        gt, scaled = self.build_series(n=40, seed=5)
        # same season, same day types, no planted difference
        wa = ExclusionWindow(dt.date(YEAR, 1, 4), dt.date(YEAR, 1, 31), "a")
        wb = ExclusionWindow(dt.date(YEAR, 2, 1), dt.date(YEAR, 2, 26), "b")
        out = window_compare(scaled, wa, wb, gt.model.calendar)
        a, b = out[DayType.WORKDAY]
        # noise/sqrt(n): 20 workdays x 40 households each side
        tolerance = 6 * 0.75 * float(np.mean(a)) / np.sqrt(20 * 40)
        assert float(np.mean(np.abs(a - b))) < tolerance

    def test_empty_window_rejected(self):
        gt, scaled = self.build_series()
        wa = ExclusionWindow(dt.date(2020, 1, 1), dt.date(2020, 1, 31), "a")
        wb = ExclusionWindow(dt.date(YEAR, 2, 1), dt.date(YEAR, 2, 28), "b")
        with pytest.raises(DataError):
            window_compare(scaled, wa, wb, gt.model.calendar)
