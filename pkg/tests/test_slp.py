import datetime as dt

import numpy as np
import pytest

from slpkit.calendars import CalendarConfig, DayType, Season, german_calendar
from slpkit.errors import DataError, NumericError
from slpkit.metrics import mae
from slpkit.series import QualityFlag, RawSeries, ingest, scale_to_annual
from slpkit.slp import (
    AggregateSeries,
    DynamisationCurve,
    ProfileSet,
    SlpModel,
    aggregate,
    assemble,
    build_daily_profiles,
    build_slp_model_from_aggregate,
    day_buckets,
    detrend_days,
    fit_dynamisation,
    load_model,
    model_from_dict,
    model_to_dict,
    profile_table,
    save_model,
    search_duration,
)
from slpkit.synth import SynthConfig, generate, planted_curve, planted_profiles
from slpkit.timegrid import days_in_year, normalized_days, slots_in_year
from slpkit.transitions import SeasonTransition, TransitionConfig

YEAR = 2021
N_DAYS = days_in_year(YEAR)


def scaled_constant(value, meter_id="m", missing_slots=()):
    n = slots_in_year(YEAR)
    values = np.full(n, float(value))
    flags = np.full(n, QualityFlag.VALID, dtype=np.uint8)
    for slot in missing_slots:
        flags[slot] = QualityFlag.MISSING
        values[slot] = np.nan
    from slpkit.series import ScaledSeries

    return ScaledSeries(
        meter_id=meter_id, year=YEAR, values=values, flags=flags,
        scale_factor=1.0, coverage=1.0 - len(missing_slots) / n,
    )


def make_aggregate(day_values: np.ndarray, counts=None) -> AggregateSeries:
    values = np.asarray(day_values, dtype=float)
    if counts is None:
        counts = np.ones(values.shape, dtype=np.int64)
    return AggregateSeries(year=YEAR, values=values, counts=counts)


class TestAggregate:
    def test_slotwise_mean(self):
        agg = aggregate([scaled_constant(0.1, "a"), scaled_constant(0.3, "b")])
        assert agg.values[10, 10] == pytest.approx(0.2)
        assert agg.counts[10, 10] == 2

    def test_availability_weighting(self):
        a = scaled_constant(0.1, "a", missing_slots=(5,))
        b = scaled_constant(0.3, "b")
        agg = aggregate([a, b])
        assert agg.values[0, 5] == pytest.approx(0.3)
        assert agg.counts[0, 5] == 1

    def test_no_contributors_is_empty(self):
        a = scaled_constant(0.1, "a", missing_slots=(5,))
        b = scaled_constant(0.3, "b", missing_slots=(5,))
        agg = aggregate([a, b])
        assert np.isnan(agg.values[0, 5])
        assert agg.counts[0, 5] == 0

    def test_empty_input_rejected(self):
        with pytest.raises(DataError):
            aggregate([])

    def test_mixed_years_rejected(self):
        a = scaled_constant(0.1, "a")
        b = scaled_constant(0.1, "b")
        object.__setattr__(b, "year", 2020)
        with pytest.raises(DataError):
            aggregate([a, b])

    def test_permutation_invariance(self):
        series = [scaled_constant(v, str(v)) for v in (0.1, 0.2, 0.4)]
        forward = aggregate(series)
        backward = aggregate(series[::-1])
        assert np.array_equal(forward.values, backward.values)
        assert np.array_equal(forward.counts, backward.counts)


class TestDynamisation:
    def test_constant_aggregate_gives_flat_curve(self):
        agg = make_aggregate(np.full((N_DAYS, 96), 0.114))
        curve = fit_dynamisation(agg)
        assert curve.coefficients[0] == pytest.approx(1.0, abs=1e-9)
        assert np.all(np.abs(curve.coefficients[1:]) < 1e-9)

    def test_planted_cosine_recovered(self):
        x = normalized_days(YEAR)
        factors = 1.0 + 0.2 * np.cos(2 * np.pi * x)
        agg = make_aggregate(np.full((N_DAYS, 96), 0.114) * factors[:, None])
        curve = fit_dynamisation(agg, degree=4)
        grid = np.linspace(0.05, 0.95, 1001)
        target = 1.0 + 0.2 * np.cos(2 * np.pi * grid)
        assert np.max(np.abs(curve(grid) - target)) < 0.01

    def test_winter_peaking_curve_peaks_in_winter(self):
        x = normalized_days(YEAR)
        factors = 1.0 + 0.25 * np.cos(2 * np.pi * x)
        rng = np.random.default_rng(0)
        noise = 1.0 + 0.01 * rng.standard_normal(N_DAYS)
        agg = make_aggregate(np.full((N_DAYS, 96), 0.114) * (factors * noise)[:, None])
        curve = fit_dynamisation(agg)
        grid = np.linspace(0.0, 1.0, 1000, endpoint=False)
        peak_x = grid[int(np.argmax(curve(grid)))]
        assert peak_x < 0.22 or peak_x > 0.83

    def test_annual_mean_is_one(self):
        x = normalized_days(YEAR)
        agg = make_aggregate(
            np.full((N_DAYS, 96), 0.1) * (1.0 + 0.3 * np.cos(2 * np.pi * x))[:, None]
        )
        assert fit_dynamisation(agg).mean() == pytest.approx(1.0, abs=1e-9)

    def test_too_few_days_rejected(self):
        values = np.full((N_DAYS, 96), 0.1)
        counts = np.zeros((N_DAYS, 96), dtype=np.int64)
        counts[:3] = 1  # only 3 complete days for a degree-4 fit
        with pytest.raises(NumericError):
            fit_dynamisation(make_aggregate(values, counts))


class TestDetrend:
    def test_unit_curve_is_identity(self):
        agg = make_aggregate(np.random.default_rng(0).random((N_DAYS, 96)) + 0.1)
        curve = DynamisationCurve(np.array([1.0]))
        out = detrend_days(agg, curve)
        assert np.allclose(out.values, agg.values)

    def test_division_by_day_factor(self):
        agg = make_aggregate(np.full((N_DAYS, 96), 0.4))
        curve = DynamisationCurve(np.array([2.0]))
        assert detrend_days(agg, curve).values[0, 0] == pytest.approx(0.2)

    def test_detrend_retrend_roundtrip(self):
        agg = make_aggregate(np.random.default_rng(1).random((N_DAYS, 96)) + 0.1)
        curve = planted_curve()
        detrended = detrend_days(agg, curve)
        back = detrended.values * curve(normalized_days(YEAR))[:, None]
        assert np.max(np.abs(back - agg.values)) < 1e-12


class TestProfiles:
    def test_single_day_per_bucket_is_copied(self):
        calendar = german_calendar()
        seasons, day_types = day_buckets(YEAR, calendar)
        values = np.zeros((N_DAYS, 96))
        counts = np.zeros((N_DAYS, 96), dtype=np.int64)
        chosen = {}
        for i in range(N_DAYS):
            key = (seasons[i], day_types[i])
            if key not in chosen:
                chosen[key] = i
                counts[i] = 1
                values[i] = 0.1 * (len(chosen))  # distinct constant per bucket
        profiles = build_daily_profiles(make_aggregate(values, counts), calendar)
        for (season, day_type), i in chosen.items():
            assert np.allclose(
                profiles.get(Season(season), DayType(day_type)), values[i]
            )

    def test_two_identical_days_average_to_same(self):
        calendar = german_calendar()
        base = np.random.default_rng(2).random((N_DAYS, 96)) + 0.1
        seasons, day_types = day_buckets(YEAR, calendar)
        for s in Season:
            for d in DayType:
                rows = np.flatnonzero((seasons == s) & (day_types == d))
                base[rows] = base[rows[0]]
        profiles = build_daily_profiles(make_aggregate(base), calendar)
        for s in Season:
            for d in DayType:
                rows = np.flatnonzero((seasons == s) & (day_types == d))
                assert np.allclose(profiles.get(s, d), base[rows[0]])

    def test_noisy_planted_shapes_recovered(self):
        calendar = german_calendar()
        seasons, day_types = day_buckets(YEAR, calendar)
        planted = planted_profiles()
        sigma = 0.02
        rng = np.random.default_rng(3)
        values = planted.values[seasons, day_types] + sigma * rng.standard_normal(
            (N_DAYS, 96)
        )
        profiles = build_daily_profiles(
            make_aggregate(np.abs(values)), calendar
        )
        for s in Season:
            for d in DayType:
                n = int(np.count_nonzero((seasons == s) & (day_types == d)))
                dev = np.abs(profiles.get(s, d) - planted.get(s, d))
                assert np.max(dev) < 6 * sigma / np.sqrt(n)

    def test_empty_bucket_error_names_bucket(self):
        calendar = CalendarConfig(season_boundaries=((1, 1, Season.WINTER),))
        agg = make_aggregate(np.full((N_DAYS, 96), 0.1))
        with pytest.raises(DataError, match="summer_workday"):
            build_daily_profiles(agg, calendar)

    def test_weighting_by_contributors(self):
        calendar = german_calendar()
        seasons, day_types = day_buckets(YEAR, calendar)
        rows = np.flatnonzero((seasons == Season.WINTER) & (day_types == DayType.WORKDAY))
        values = np.full((N_DAYS, 96), 0.1)
        counts = np.ones((N_DAYS, 96), dtype=np.int64)
        values[rows[0]] = 0.4
        counts[rows[0]] = 3  # triple weight on the 0.4 day
        profiles = build_daily_profiles(make_aggregate(values, counts), calendar)
        n = len(rows)
        expected = (0.4 * 3 + 0.1 * (n - 1)) / (3 + n - 1)
        assert profiles.get(Season.WINTER, DayType.WORKDAY)[0] == pytest.approx(expected)


class TestAssemble:
    def test_unit_curve_identical_profiles_tiles(self):
        profile = planted_profiles().get(Season.WINTER, DayType.WORKDAY)
        values = np.tile(profile, (3, 3, 1))
        model = SlpModel(
            curve=DynamisationCurve(np.array([1.0])),
            profiles=ProfileSet(values),
            calendar=german_calendar(),
        )
        out = assemble(model, YEAR)
        assert np.allclose(out.reshape(N_DAYS, 96), profile[None, :])

    def test_annual_energy_near_target(self, noiseless_data):
        cfg, gt, scaled, agg = noiseless_data
        model = build_slp_model_from_aggregate(agg, gt.model.calendar)
        energy = assemble(model, YEAR).sum() * 0.25
        assert abs(energy - 1000.0) / 1000.0 < 0.02

    def test_hard_boundary_discontinuity_exists(self):
        gt_model = SlpModel(
            curve=planted_curve(),
            profiles=planted_profiles(),
            calendar=german_calendar(),
        )
        out = assemble(gt_model, YEAR).reshape(N_DAYS, 96)
        factors = planted_curve()(normalized_days(YEAR))
        detrended = out / factors[:, None]

        def jump(date_a, date_b):
            a = (date_a - dt.date(2021, 1, 1)).days
            b = (date_b - dt.date(2021, 1, 1)).days
            return np.max(np.abs(detrended[b] - detrended[a]))

        # Mar 20 (winter Saturday) vs Mar 27 (transition Saturday)
        across = jump(dt.date(2021, 3, 20), dt.date(2021, 3, 27))
        within = jump(dt.date(2021, 2, 6), dt.date(2021, 2, 13))
        assert within == pytest.approx(0.0, abs=1e-12)
        assert across > 0.01

    def test_multiplicative_structure_invariance(self):
        model = SlpModel(
            curve=planted_curve(),
            profiles=planted_profiles(),
            calendar=german_calendar(),
        )
        doubled = DynamisationCurve(model.curve.coefficients * 2.0)
        halved = ProfileSet(model.profiles.values / 2.0)
        other = SlpModel(curve=doubled, profiles=halved, calendar=model.calendar)
        assert np.allclose(assemble(model, YEAR), assemble(other, YEAR), atol=1e-12)

    def test_input_scaling_invariance(self):
        cfg = SynthConfig.noiseless(n_households=3)
        series, _ = generate(cfg)
        scaled_a, _ = ingest(series)
        for s in series:
            s.values[:] *= 7.5
        scaled_b, _ = ingest(series)
        agg_a, agg_b = aggregate(scaled_a), aggregate(scaled_b)
        assert np.allclose(agg_a.values, agg_b.values, rtol=1e-9)


class TestAdditiveVariant:
    def test_additive_worse_on_multiplicative_data(self, paper_data):
        cfg, gt, scaled, agg = paper_data
        mult = build_slp_model_from_aggregate(agg, gt.model.calendar)
        add = build_slp_model_from_aggregate(agg, gt.model.calendar, additive=True)
        ref = agg.flat()
        assert mae(assemble(add, YEAR), ref) > mae(assemble(mult, YEAR), ref)

    def test_additive_curve_mean_zero(self, paper_data):
        cfg, gt, scaled, agg = paper_data
        curve = fit_dynamisation(agg, additive=True)
        assert curve.mean() == pytest.approx(0.0, abs=1e-9)
        assert curve.additive


class TestSearchDuration:
    def test_recovers_planted_width_coarsely(self):
        cfg = SynthConfig.noiseless(n_households=2)
        cfg = SynthConfig(
            year=YEAR, n_households=2, seed=0, transition_style="sliding",
            transition_days=14.0, noise=0.0, level_std=0.0, day_effect_std=0.0,
        )
        series, gt = generate(cfg)
        scaled, _ = ingest(series)
        agg = aggregate(scaled)
        model = build_slp_model_from_aggregate(
            agg, gt.model.calendar, transition=gt.model.transition
        )
        best, curve = search_duration(agg, model, candidates=[0, 7, 14, 21, 28])
        assert best == 14.0
        assert [d for d, _ in curve] == [0.0, 7.0, 14.0, 21.0, 28.0]

    def test_tie_breaks_to_smaller_duration(self):
        agg = make_aggregate(np.full((N_DAYS, 96), 0.114))
        profiles = ProfileSet(np.full((3, 3, 96), 0.114))
        transition = TransitionConfig(
            transitions=(SeasonTransition(5, 1, Season.WINTER, Season.SUMMER),),
            duration_days=0.0,
        )
        model = SlpModel(
            curve=DynamisationCurve(np.array([1.0])),
            profiles=profiles,
            calendar=german_calendar(),
            transition=transition,
        )
        best, curve = search_duration(agg, model, candidates=[21, 7, 0])
        assert best == 0.0  # all durations tie at mae 0


class TestSerialization:
    def test_model_roundtrip(self, tmp_path, noiseless_data):
        cfg, gt, scaled, agg = noiseless_data
        model = build_slp_model_from_aggregate(
            agg, gt.model.calendar, transition=gt.model.transition
        )
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        assert np.allclose(back.curve.coefficients, model.curve.coefficients)
        assert np.allclose(back.profiles.values, model.profiles.values)
        assert back.calendar == model.calendar
        assert back.transition == model.transition

    def test_profile_table_shape(self, noiseless_data):
        cfg, gt, scaled, agg = noiseless_data
        model = build_slp_model_from_aggregate(agg, gt.model.calendar)
        lines = profile_table(model).strip().split("\n")
        assert len(lines) == 97
        assert lines[0].count(",") == 9
        assert lines[1].startswith("00:00,")
