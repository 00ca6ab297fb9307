"""slpkit: standard load profiles from quarter-hourly smart-meter data.

Build the conventional multiplicative profile on new data, validate its
weekday and season assumptions with clustering and classification, enhance
it with sliding season transitions and Savitzky-Golay smoothing, and compare
it against an additive Fourier-series alternative.
"""

from .calendars import (
    CalendarConfig,
    DayType,
    Season,
    classify_day,
    german_calendar,
    load_holidays,
    season_of,
)
from .errors import ConfigError, CoverageError, DataError, NumericError, SlpkitError
from .fourier import FourierConfig, FourierModel
from .metrics import EvalReport, ShareCurve, compare_models, kink_report, mae, share_experiment, window_compare
from .series import (
    ExclusionWindow,
    Manifest,
    QualityFlag,
    QualityRules,
    RawSeries,
    ScaledSeries,
    apply_exclusions,
    flag_defects,
    ingest,
    is_prosumer,
    parse_series,
    scale_to_annual,
)
from .slp import (
    AggregateSeries,
    DynamisationCurve,
    ProfileSet,
    SlpModel,
    aggregate,
    assemble,
    assemble_blended,
    build_daily_profiles,
    build_slp_model,
    build_slp_model_from_aggregate,
    detrend_days,
    fit_dynamisation,
    load_model,
    save_model,
    search_duration,
)
from .seasons import (
    ClusterResult,
    DayShapeMatrix,
    build_day_matrix,
    choose_k,
    detect_transitions,
    kmeans,
    silhouette,
    weekly_occupancy,
)
from .smoothing import savgol_coeffs, savgol_smooth
from .synth import GroundTruth, SynthConfig, generate, ground_truth, write_dataset
from .transitions import SeasonTransition, TransitionConfig, alpha_at, blend

__version__ = "0.1.0"
