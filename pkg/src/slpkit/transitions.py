"""Sliding season transitions: time-varying linear blending of daily profiles.

A transition is a window of `duration_days` centred on the changeover date.
Inside the window the daily profile is a convex combination of the two
adjacent season profiles; the blend weight ramps linearly from 0 at the
window start to 1 at the window end (0.5 on the changeover date itself).
Duration 0 degenerates to the conventional hard switch.
"""
from __future__ import annotations

import datetime as dt
from dataclasses import dataclass

import numpy as np

from .calendars import Season
from .errors import ConfigError


@dataclass(frozen=True)
class SeasonTransition:
    """One changeover: (month, day) of the centre plus the two seasons."""

    month: int
    day: int
    from_season: Season
    to_season: Season

    def center(self, year: int) -> dt.date:
        try:
            return dt.date(year, self.month, self.day)
        except ValueError:  # Feb 29 centre in a non-leap year
            return dt.date(year, self.month, 28)


@dataclass(frozen=True)
class TransitionConfig:
    transitions: tuple[SeasonTransition, ...]
    duration_days: float = 21.0

    def __post_init__(self):
        if self.duration_days < 0:
            raise ConfigError("transition duration must be >= 0")
        keys = [(t.month, t.day) for t in self.transitions]
        if keys != sorted(keys):
            raise ConfigError("transitions must be in calendar order")

    def validate_no_overlap(self, year: int) -> None:
        """Raise if any two blend windows overlap in `year`."""
        half = self.duration_days / 2.0
        spans = []
        for t in self.transitions:
            c = (t.center(year) - dt.date(year, 1, 1)).days
            spans.append((c - half, c + half))
        for (a0, a1), (b0, b1) in zip(spans, spans[1:]):
            if b0 < a1:
                raise ConfigError(
                    f"transition windows overlap for duration {self.duration_days}"
                )


def alpha_at(date: dt.date, center: dt.date, duration_days: float) -> float:
    """Blend weight of the incoming season at `date`.

    Linear ramp over [center - d/2, center + d/2], clamped to [0, 1].
    Duration 0 is the hard-switch limit: 0 before the centre, 1 from it on.
    """
    offset = (date - center).days
    if duration_days == 0:
        return 0.0 if offset < 0 else 1.0
    return float(np.clip((offset + duration_days / 2.0) / duration_days, 0.0, 1.0))


def blend(p1: np.ndarray, p2: np.ndarray, alpha: float) -> np.ndarray:
    """Slot-wise convex combination (1 - alpha) * p1 + alpha * p2."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha {alpha} outside [0, 1]")
    return (1.0 - alpha) * np.asarray(p1, dtype=float) + alpha * np.asarray(p2, dtype=float)


def active_transition(
    date: dt.date, config: TransitionConfig
) -> tuple[SeasonTransition, float] | None:
    """The transition whose blend window contains `date`, with its alpha.

    Returns None outside every window (including the degenerate d=0 case,
    where no date needs blending).
    """
    if config.duration_days == 0:
        return None
    half = config.duration_days / 2.0
    for t in config.transitions:
        offset = (date - t.center(date.year)).days
        if -half <= offset <= half:
            return t, alpha_at(date, t.center(date.year), config.duration_days)
    return None
