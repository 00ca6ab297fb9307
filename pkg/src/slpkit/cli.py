"""Command-line front door for the profile pipeline.

Commands: synth, validate, build-slp, seasons, daytypes, enhance, fourier,
evaluate, export. Artifacts are deterministic: every file embeds the
effective-config hash and seed, floats use shortest round-trip formatting,
and files are written atomically; re-running with identical inputs yields
byte-identical artifacts. Wall-clock timestamps go only to the run.log
sidecar.

Exit codes: 0 ok, 2 config error, 3 data rejection, 4 numeric failure.
"""
from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import fourier as fourier_mod
from .calendars import (
    CalendarConfig,
    DayType,
    calendar_from_dict,
    calendar_to_dict,
    german_calendar,
    load_holidays,
)
from .errors import ConfigError, DataError, NumericError, SlpkitError
from .metrics import compare_models, kink_report, mae, share_experiment
from .seasons import (
    build_day_matrix,
    calendar_with_transitions,
    choose_k,
    detect_transitions,
    transitions_to_config,
    weekly_occupancy,
)
from .series import (
    Manifest,
    QualityRules,
    default_lockdown_windows,
    ingest,
    load_exclusions,
    parse_series,
)
from .slp import (
    aggregate,
    assemble,
    build_slp_model_from_aggregate,
    load_model,
    model_to_dict,
    profile_table,
    save_model,
    search_duration,
)
from .smoothing import savgol_smooth
from .synth import SynthConfig, generate, write_dataset
from .daytypes import ForestParams, audit_special_days, cross_val_accuracy, train, training_days


def _config_hash(doc: dict) -> str:
    canonical = json.dumps(doc, sort_keys=True, default=str)
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


class Workspace:
    """Output directory with atomic, hash-stamped writers."""

    def __init__(self, out_dir: Path, config_doc: dict):
        self.out = out_dir
        self.out.mkdir(parents=True, exist_ok=True)
        self.config_doc = config_doc
        self.hash = _config_hash(config_doc)

    def _atomic(self, name: str, text: str) -> Path:
        path = self.out / name
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text)
        os.replace(tmp, path)
        return path

    def write_table(self, name: str, text: str) -> Path:
        header = f"# config_hash={self.hash}\n"
        return self._atomic(name, header + text)

    def write_json(self, name: str, doc: dict) -> Path:
        doc = {"config_hash": self.hash, **doc}
        return self._atomic(name, json.dumps(doc, indent=2, sort_keys=True) + "\n")

    def log(self, message: str) -> None:
        stamp = dt.datetime.now().isoformat(timespec="seconds")
        with (self.out / "run.log").open("a") as fh:
            fh.write(f"{stamp} {message}\n")


def _load_calendar(args) -> CalendarConfig:
    calendar = german_calendar()
    if getattr(args, "calendar_json", None):
        doc = json.loads(Path(args.calendar_json).read_text())
        doc.pop("config_hash", None)
        calendar = calendar_from_dict(doc)
    if getattr(args, "holidays", None):
        calendar = replace(calendar, holidays=load_holidays(args.holidays))
    if getattr(args, "eve_rules", None) == "conventional":
        calendar = replace(
            calendar,
            christmas_eve_rule=DayType.SATURDAY,
            new_years_eve_rule=DayType.SATURDAY,
        )
    return calendar


def _load_pool(args, calendar):
    manifest = Manifest.load(args.manifest)
    rules = QualityRules()
    windows = []
    if getattr(args, "exclusions", None):
        if args.exclusions == "german-lockdowns":
            windows = default_lockdown_windows()
        else:
            windows = load_exclusions(args.exclusions)
    raw = [parse_series(path, meter_id=mid) for mid, path in manifest.meters]
    scaled, reports = ingest(raw, rules=rules, windows=windows)
    return manifest, scaled, reports


def _reports_table(reports) -> str:
    lines = ["meter_id,coverage,n_missing,n_defective,n_excluded,prosumer,accepted,reason"]
    for r in reports:
        lines.append(
            f"{r.meter_id},{r.coverage!r},{r.n_missing},{r.n_defective},"
            f"{r.n_excluded},{int(r.prosumer)},{int(r.accepted)},{r.reason}"
        )
    return "\n".join(lines) + "\n"


def _require_accepted(scaled) -> None:
    if not scaled:
        raise DataError("no series passed the quality gates")


def _curve_table(model: SlpModel) -> str:
    lines = ["x,factor"]
    xs = np.linspace(0.0, 1.0, 366, endpoint=False)
    for x, v in zip(xs, model.curve(xs)):
        lines.append(f"{float(x)!r},{float(v)!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# commands

def cmd_synth(args) -> int:
    preset = {
        "paper": SynthConfig.paper_like,
        "noiseless": SynthConfig.noiseless,
    }[args.preset]
    kwargs = {}
    if args.noise is not None:
        kwargs["noise"] = args.noise
    if args.transition_days is not None:
        kwargs["transition_style"] = "sliding" if args.transition_days > 0 else "hard"
        kwargs["transition_days"] = max(args.transition_days, 0.0)
    for name in ("pv_rate", "ev_rate", "defect_rate", "gap_rate"):
        value = getattr(args, name)
        if value is not None:
            kwargs[name] = value
    config = preset(
        n_households=args.households, year=args.year, seed=args.seed, **kwargs
    )
    series, gt = generate(config)
    out = Path(args.out)
    manifest_path = write_dataset(series, gt, out)
    ws = Workspace(out, {"command": "synth", **config.to_dict()})
    ws.write_json(
        "synth_report.json",
        {
            "seed": config.seed,
            "n_households": config.n_households,
            "manifest": str(manifest_path),
            "labelled_households": {k: list(v) for k, v in sorted(gt.labels.items())},
        },
    )
    ws.log(f"synth: wrote {len(series)} meters to {out}")
    print(f"wrote {len(series)} meter files and manifest to {out}")
    return 0


def cmd_validate(args) -> int:
    calendar = _load_calendar(args)
    _, scaled, reports = _load_pool(args, calendar)
    ws = Workspace(
        Path(args.out),
        {"command": "validate", "manifest": str(args.manifest), "seed": args.seed},
    )
    ws.write_table("validate_report.csv", _reports_table(reports))
    accepted = sum(1 for r in reports if r.accepted)
    ws.write_json(
        "validate_summary.json",
        {
            "n_meters": len(reports),
            "n_accepted": accepted,
            "n_prosumer": sum(1 for r in reports if r.prosumer),
            "n_coverage_rejected": sum(1 for r in reports if r.reason == "coverage"),
        },
    )
    ws.log(f"validate: {accepted}/{len(reports)} accepted")
    print(f"accepted {accepted} of {len(reports)} meters")
    return 0


def cmd_build_slp(args) -> int:
    calendar = _load_calendar(args)
    _, scaled, reports = _load_pool(args, calendar)
    _require_accepted(scaled)
    agg = aggregate(scaled)
    model = build_slp_model_from_aggregate(
        agg, calendar, degree=args.degree, additive=args.additive
    )
    ws = Workspace(
        Path(args.out),
        {
            "command": "build-slp",
            "manifest": str(args.manifest),
            "degree": args.degree,
            "additive": args.additive,
            "seed": args.seed,
        },
    )
    ws.write_table("validate_report.csv", _reports_table(reports))
    save_model(model, ws.out / "model.json")
    ws.write_table("profiles.csv", profile_table(model))
    ws.write_table("curve.csv", _curve_table(model))
    model_mae = mae(assemble(model, agg.year), agg.flat())
    ws.write_json(
        "build_report.json",
        {
            "mae_kw": model_mae,
            "n_series": len(scaled),
            "year": agg.year,
            "mode": model.mode,
        },
    )
    ws.log(f"build-slp: mae={model_mae}")
    print(f"built {model.mode} SLP from {len(scaled)} series, mae {model_mae:.6f} kW")
    return 0


def cmd_seasons(args) -> int:
    calendar = _load_calendar(args)
    _, scaled, _ = _load_pool(args, calendar)
    _require_accepted(scaled)
    agg = aggregate(scaled)
    matrix = build_day_matrix(agg)
    k_range = range(args.k_min, args.k_max + 1)
    best = choose_k(matrix, k_range=k_range, base_seed=args.seed)
    occupancy = weekly_occupancy(best)
    transitions = detect_transitions(best, calendar)
    updated = calendar_with_transitions(calendar, transitions)
    ws = Workspace(
        Path(args.out),
        {
            "command": "seasons",
            "manifest": str(args.manifest),
            "seed": args.seed,
            "k_range": [args.k_min, args.k_max],
        },
    )
    ws.write_table("occupancy.csv", occupancy.as_table())
    assignments = "date,cluster\n" + "\n".join(
        f"{d.isoformat()},{int(c)}" for d, c in zip(best.dates, best.assignments)
    ) + "\n"
    ws.write_table("clusters.csv", assignments)
    ws.write_json(
        "seasons_report.json",
        {
            "k": best.k,
            "silhouette": best.silhouette,
            "weak": best.weak,
            "seed": best.seed,
            "transitions": [
                {"date": t.isoformat(), "from": s1.label, "to": s2.label}
                for t, s1, s2 in transitions
            ],
        },
    )
    ws.write_json("calendar.json", calendar_to_dict(updated))
    ws.log(f"seasons: k={best.k} silhouette={best.silhouette}")
    print(
        f"k = {best.k} (silhouette {best.silhouette:.3f}); "
        f"{len(transitions)} transitions detected"
    )
    return 0


def cmd_daytypes(args) -> int:
    calendar = _load_calendar(args)
    _, scaled, _ = _load_pool(args, calendar)
    _require_accepted(scaled)
    agg = aggregate(scaled)
    data = training_days(agg, calendar)
    params = ForestParams(seed=args.seed, n_trees=args.trees)
    accuracy = cross_val_accuracy(data.features, data.labels, params, folds=args.folds)
    model = train(data.features, data.labels, params)
    audit = audit_special_days(model, agg, calendar)
    ws = Workspace(
        Path(args.out),
        {
            "command": "daytypes",
            "manifest": str(args.manifest),
            "seed": args.seed,
            "trees": args.trees,
            "folds": args.folds,
        },
    )
    ws.write_table("daytype_audit.csv", audit.as_table())
    summary = {
        "cross_val_accuracy": accuracy,
        "n_training_days": int(data.features.shape[0]),
        "majorities": {
            category: (m.label if m is not None else None)
            for category, m in (
                (c, audit.majority(c))
                for c in ("holiday", "christmas_eve", "new_years_eve")
            )
        },
    }
    ws.write_json("daytypes_report.json", summary)
    ws.log(f"daytypes: accuracy={accuracy}")
    print(f"cross-val accuracy {accuracy:.3f}; majorities {summary['majorities']}")
    return 0


def _discover_and_blend(agg, calendar, seed, durations=None):
    """Season discovery + duration search shared by enhance and evaluate."""
    matrix = build_day_matrix(agg)
    best = choose_k(matrix, k_range=range(2, 5), base_seed=seed)
    transitions = detect_transitions(best, calendar)
    adapted_calendar = calendar_with_transitions(calendar, transitions)
    adapted = build_slp_model_from_aggregate(agg, adapted_calendar)
    transition = transitions_to_config(transitions, duration_days=21.0)
    blended_base = replace(adapted, transition=transition)
    best_duration, error_curve = search_duration(agg, blended_base, candidates=durations)
    blended = replace(
        adapted, transition=replace(transition, duration_days=best_duration)
    )
    return best, transitions, adapted, blended, best_duration, error_curve


def cmd_enhance(args) -> int:
    calendar = _load_calendar(args)
    _, scaled, _ = _load_pool(args, calendar)
    _require_accepted(scaled)
    agg = aggregate(scaled)
    durations = (
        [float(d) for d in args.durations.split(",")] if args.durations else None
    )
    best, transitions, adapted, blended, best_duration, error_curve = _discover_and_blend(
        agg, calendar, args.seed, durations
    )
    filtered = blended.profiles.map(
        lambda p: savgol_smooth(p, window=args.filter_window, polyorder=args.filter_polyorder)
    )
    final = replace(blended, profiles=filtered)
    ws = Workspace(
        Path(args.out),
        {
            "command": "enhance",
            "manifest": str(args.manifest),
            "seed": args.seed,
            "filter_window": args.filter_window,
            "filter_polyorder": args.filter_polyorder,
            "durations": args.durations,
        },
    )
    save_model(final, ws.out / "model_final.json")
    ws.write_table("profiles_final.csv", profile_table(final))
    duration_table = "duration_days,mae_kw\n" + "\n".join(
        f"{d!r},{m!r}" for d, m in error_curve
    ) + "\n"
    ws.write_table("fig6_duration_mae.csv", duration_table)
    final_mae = mae(assemble(final, agg.year), agg.flat())
    ws.write_json(
        "enhance_report.json",
        {
            "best_duration_days": best_duration,
            "k": best.k,
            "silhouette": best.silhouette,
            "transitions": [
                {"date": t.isoformat(), "from": s1.label, "to": s2.label}
                for t, s1, s2 in transitions
            ],
            "mae_final_kw": final_mae,
        },
    )
    ws.log(f"enhance: best_duration={best_duration} mae={final_mae}")
    print(f"best transition duration {best_duration:g} days; final mae {final_mae:.6f} kW")
    return 0


def cmd_fourier(args) -> int:
    calendar = _load_calendar(args)
    _, scaled, _ = _load_pool(args, calendar)
    _require_accepted(scaled)
    agg = aggregate(scaled)
    config = fourier_mod.FourierConfig(
        yearly_harmonics=args.yearly,
        weekly_harmonics=args.weekly,
        daily_harmonics=args.daily,
        day_type_mode="two" if args.two_day_types else "three",
    )
    model = fourier_mod.fit(agg, config, calendar, log_domain=args.multiplicative)
    model_mae = mae(fourier_mod.predict_year(model, agg.year), agg.flat())
    orth = fourier_mod.residual_orthogonality(model, agg)
    ws = Workspace(
        Path(args.out),
        {
            "command": "fourier",
            "manifest": str(args.manifest),
            "seed": args.seed,
            "yearly": args.yearly,
            "weekly": args.weekly,
            "daily": args.daily,
            "two_day_types": args.two_day_types,
            "multiplicative": args.multiplicative,
        },
    )
    ws.write_json("fourier_model.json", fourier_mod.model_to_dict(model))
    curve = fourier_mod.weekly_curve(model)
    weekly_table = "week_slot,additive_factor_kw\n" + "\n".join(
        f"{i},{float(v)!r}" for i, v in enumerate(curve)
    ) + "\n"
    ws.write_table("fig10_weekly.csv", weekly_table)
    ws.write_json(
        "fourier_report.json",
        {"mae_kw": model_mae, "residual_orthogonality": orth, "log_domain": model.log_domain},
    )
    ws.log(f"fourier: mae={model_mae}")
    print(f"fourier mae {model_mae:.6f} kW (orthogonality {orth:.2e})")
    return 0


def cmd_evaluate(args) -> int:
    calendar = _load_calendar(args)
    _, scaled, _ = _load_pool(args, calendar)
    _require_accepted(scaled)
    agg = aggregate(scaled)
    year = agg.year
    reference = agg.flat()

    baseline = build_slp_model_from_aggregate(agg, calendar.conventional())
    best, transitions, adapted, blended, best_duration, error_curve = _discover_and_blend(
        agg, calendar, args.seed
    )
    fourier_model = fourier_mod.fit(agg, fourier_mod.FourierConfig(), calendar)
    models = [
        ("slp_baseline", assemble(baseline, year)),
        ("slp_adapted_calendar", assemble(adapted, year)),
        ("slp_blended", assemble(blended, year)),
        ("fourier_additive", fourier_mod.predict_year(fourier_model, year)),
    ]
    reports = compare_models(reference, models, metadata={"seed": args.seed})

    ws = Workspace(
        Path(args.out),
        {
            "command": "evaluate",
            "manifest": str(args.manifest),
            "seed": args.seed,
            "shares": args.shares,
            "repeats": args.repeats,
            "skip_share": args.skip_share,
        },
    )
    table_i = "model,mae_kw\n" + "\n".join(
        f"{r.model_id},{r.mae_kw!r}" for r in reports
    ) + "\n"
    ws.write_table("table_i.csv", table_i)
    duration_table = "duration_days,mae_kw\n" + "\n".join(
        f"{d!r},{m!r}" for d, m in error_curve
    ) + "\n"
    ws.write_table("fig6_duration_mae.csv", duration_table)
    weekly_table = "week_slot,additive_factor_kw\n" + "\n".join(
        f"{i},{float(v)!r}" for i, v in enumerate(fourier_mod.weekly_curve(fourier_model))
    ) + "\n"
    ws.write_table("fig10_weekly.csv", weekly_table)

    report_doc = {
        "seed": args.seed,
        "best_duration_days": best_duration,
        "k": best.k,
        "mae_kw": {r.model_id: r.mae_kw for r in reports},
    }
    if not args.skip_share:
        shares = [float(s) for s in args.shares.split(",")]
        curve = share_experiment(
            scaled,
            shares=shares,
            calendar=blended.calendar,
            repeats=args.repeats,
            transition=blended.transition,
            seed=args.seed,
        )
        ws.write_table("fig8_share.csv", curve.as_table())
        if len(curve.shares) >= 4:
            report_doc["share_kinks"] = kink_report(curve)
    ws.write_json("evaluate_report.json", report_doc)
    ws.log(f"evaluate: {report_doc['mae_kw']}")
    for r in reports:
        print(f"{r.model_id}: {r.mae_kw:.6f} kW")
    return 0


def cmd_export(args) -> int:
    model = load_model(args.model)
    ws = Workspace(Path(args.out), {"command": "export", "model": str(args.model)})
    ws.write_table("profiles.csv", profile_table(model))
    ws.write_table("curve.csv", _curve_table(model))
    ws.write_json("calendar.json", model_to_dict(model)["calendar"])
    ws.log("export: done")
    print(f"exported profile tables to {ws.out}")
    return 0


# ---------------------------------------------------------------------------

def _add_common(p: argparse.ArgumentParser, manifest: bool = True) -> None:
    if manifest:
        p.add_argument("--manifest", required=True, help="dataset manifest JSON")
        p.add_argument(
            "--exclusions",
            default=None,
            help="exclusion-window file, or 'german-lockdowns' for the packaged defaults",
        )
        p.add_argument("--holidays", default=None, help="holiday calendar file")
        p.add_argument(
            "--calendar-json", default=None, help="calendar JSON (e.g. from `seasons`)"
        )
        p.add_argument(
            "--eve-rules",
            choices=["updated", "conventional"],
            default="updated",
            help="Dec 24/31 day-type rules",
        )
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slpkit",
        description="Standard load profiles from quarter-hourly smart-meter data",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset with ground truth")
    _add_common(p, manifest=False)
    p.add_argument("--households", type=int, default=100)
    p.add_argument("--year", type=int, default=2021)
    p.add_argument("--preset", choices=["paper", "noiseless"], default="paper")
    p.add_argument("--noise", type=float, default=None)
    p.add_argument("--transition-days", type=float, default=None)
    p.add_argument("--pv-rate", type=float, default=None)
    p.add_argument("--ev-rate", type=float, default=None)
    p.add_argument("--defect-rate", type=float, default=None)
    p.add_argument("--gap-rate", type=float, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="quality report for a dataset")
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("build-slp", help="conventional-method SLP build")
    _add_common(p)
    p.add_argument("--degree", type=int, default=4, help="dynamisation polynomial degree")
    p.add_argument("--additive", action="store_true", help="additive-variant build")
    p.set_defaults(func=cmd_build_slp)

    p = sub.add_parser("seasons", help="season discovery: clustering + transitions")
    _add_common(p)
    p.add_argument("--k-min", type=int, default=2)
    p.add_argument("--k-max", type=int, default=8)
    p.set_defaults(func=cmd_seasons)

    p = sub.add_parser("daytypes", help="day-type classifier validation + audit")
    _add_common(p)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--folds", type=int, default=5)
    p.set_defaults(func=cmd_daytypes)

    p = sub.add_parser("enhance", help="sliding transitions + profile smoothing")
    _add_common(p)
    p.add_argument("--filter-window", type=int, default=11)
    p.add_argument("--filter-polyorder", type=int, default=3)
    p.add_argument("--durations", default=None, help="comma-separated candidate days")
    p.set_defaults(func=cmd_enhance)

    p = sub.add_parser("fourier", help="fit the Fourier-series model")
    _add_common(p)
    p.add_argument("--yearly", type=int, default=4)
    p.add_argument("--weekly", type=int, default=6)
    p.add_argument("--daily", type=int, default=12)
    p.add_argument("--two-day-types", action="store_true")
    p.add_argument("--multiplicative", action="store_true")
    p.set_defaults(func=cmd_fourier)

    p = sub.add_parser("evaluate", help="model comparison and figure tables")
    _add_common(p)
    p.add_argument("--shares", default="0.1,0.2,0.3,0.4,0.5,0.6,0.8,1.0")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--skip-share", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export", help="export profile tables from a model file")
    p.add_argument("--model", required=True)
    _add_common(p, manifest=False)
    p.set_defaults(func=cmd_export)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data rejected ({args.command}): {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric failure ({args.command}): {exc}", file=sys.stderr)
        return 4
    except SlpkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
