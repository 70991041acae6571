"""Window scoring against the calibrated threshold and event grouping."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .model import Autoencoder
from .pipeline import SeriesFrame, WindowSet
from .training import ThresholdSpec

CATEGORY_HIGH_SPIKE = "high-spike"
CATEGORY_NEGATIVE_GLITCH = "negative-glitch"
CATEGORY_OTHER = "other"


@dataclass(frozen=True)
class ScoredWindow:
    """One window's reconstruction error and its strict-threshold label."""

    origin: int
    error: float
    is_anomalous: bool


@dataclass
class AnomalyEvent:
    """Maximal run of anomalous windows, indexed by window origin rows."""

    start: int
    end: int
    duration: int
    peak_error: float
    category: str = CATEGORY_OTHER
    start_time: datetime | None = None
    end_time: datetime | None = None


@dataclass(frozen=True)
class CategoryRules:
    """Closed rule set replacing expert judgment with auditable checks."""

    conductivity_feature: str = "conductivity"
    alarm_level: float = 1.0


def score(windows: WindowSet, model: Autoencoder, threshold: ThresholdSpec) -> list[ScoredWindow]:
    """Score every window; anomalous means error strictly above the threshold."""
    errors = model.window_errors(windows.windows)
    return [
        ScoredWindow(origin=int(origin), error=float(err), is_anomalous=bool(err > threshold.value))
        for origin, err in zip(windows.origins, errors)
    ]


def group_events(scored: list[ScoredWindow], merge_gap: int = 0) -> list[AnomalyEvent]:
    """Merge anomalous windows whose origin gaps are at most ``merge_gap``.

    The gap between two anomalous windows is the number of origin positions
    strictly between them, so consecutive origins have gap zero. Events come
    out disjoint and ordered by start.
    """
    if merge_gap < 0:
        raise ValueError("merge_gap must be >= 0")
    events: list[AnomalyEvent] = []
    run: list[ScoredWindow] = []
    for window in scored:
        if not window.is_anomalous:
            continue
        if run and (window.origin - run[-1].origin - 1) > merge_gap:
            events.append(_close_run(run))
            run = []
        run.append(window)
    if run:
        events.append(_close_run(run))
    return events


def _close_run(run: list[ScoredWindow]) -> AnomalyEvent:
    start, end = run[0].origin, run[-1].origin
    return AnomalyEvent(
        start=start,
        end=end,
        duration=end - start + 1,
        peak_error=max(w.error for w in run),
    )


def categorize(event: AnomalyEvent, frame: SeriesFrame, rules: CategoryRules) -> str:
    """Rule-based category from the raw (unstandardized) source rows.

    High-spike wins when the raw conductivity peak exceeds the alarm level;
    otherwise any negative raw value marks a sensor-disturbance glitch.
    """
    rows = slice(event.start, event.end + 1)
    conductivity = frame.columns[rules.conductivity_feature][rows]
    if conductivity.size and conductivity.max() > rules.alarm_level:
        return CATEGORY_HIGH_SPIKE
    for name in frame.feature_names:
        if np.any(frame.columns[name][rows] < 0.0):
            return CATEGORY_NEGATIVE_GLITCH
    return CATEGORY_OTHER


def attach_context(event: AnomalyEvent, frame: SeriesFrame, rules: CategoryRules) -> AnomalyEvent:
    """Fill in category and start/end timestamps from the raw frame."""
    event.category = categorize(event, frame, rules)
    event.start_time = frame.timestamps[event.start]
    event.end_time = frame.timestamps[event.end]
    return event
