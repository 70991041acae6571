"""Risk priority ranking of confirmed events and maintenance recommendations.

Severity, probability and detection grades remain human-supplied inputs on
a 1..5 scale; the event statistics only provide supporting evidence for
that judgment and are never turned into grades automatically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .detector import (
    CATEGORY_HIGH_SPIKE,
    CATEGORY_NEGATIVE_GLITCH,
    CATEGORY_OTHER,
    AnomalyEvent,
)
from .errors import ConfigError

GRADE_MIN = 1
GRADE_MAX = 5
RPR_MAX = GRADE_MAX**3

BAND_LOW = "low"
BAND_MEDIUM = "medium"
BAND_HIGH = "high"

DEFAULT_RECOMMENDATIONS = {
    BAND_LOW: "defer replacement; continue condition monitoring",
    BAND_MEDIUM: "replace at next planned shutdown",
    BAND_HIGH: "replace immediately / trigger alarm response",
}


@dataclass(frozen=True)
class FmecaScore:
    """Severity, probability and detection grades, each in 1..5."""

    severity: int
    probability: int
    detection: int

    def __post_init__(self):
        for name, grade in [
            ("severity", self.severity),
            ("probability", self.probability),
            ("detection", self.detection),
        ]:
            if not isinstance(grade, int) or not (GRADE_MIN <= grade <= GRADE_MAX):
                raise ConfigError(
                    f"{name} grade must be an integer in "
                    f"[{GRADE_MIN}, {GRADE_MAX}]; got {grade!r}"
                )


def rpr(score: FmecaScore) -> int:
    """Risk priority rank: the product of the three grades."""
    return score.severity * score.probability * score.detection


@dataclass(frozen=True)
class BandTable:
    """Contiguous rank bands: each name covers ranks up to its bound."""

    bounds: tuple[int, ...]
    names: tuple[str, ...]

    def __post_init__(self):
        if len(self.bounds) != len(self.names) or not self.bounds:
            raise ConfigError("band table needs one name per upper bound")
        if list(self.bounds) != sorted(set(self.bounds)):
            raise ConfigError("band bounds must be strictly increasing (no overlaps)")
        if self.bounds[-1] != RPR_MAX:
            raise ConfigError(
                f"band bounds leave a gap: last bound must be {RPR_MAX}, "
                f"got {self.bounds[-1]}"
            )
        if any(not name for name in self.names):
            raise ConfigError("band names must be non-empty")

    def band_of(self, rank: int) -> str:
        if not (GRADE_MIN <= rank <= RPR_MAX):
            raise ConfigError(f"rank {rank} outside [{GRADE_MIN}, {RPR_MAX}]")
        for bound, name in zip(self.bounds, self.names):
            if rank <= bound:
                return name
        raise ConfigError(f"rank {rank} not covered by the band table")  # unreachable


# the 51..65 range has no published assignment, so the default table closes
# the partition by treating everything above 50 as high
DEFAULT_BAND_TABLE = BandTable(bounds=(25, 50, RPR_MAX), names=(BAND_LOW, BAND_MEDIUM, BAND_HIGH))


def band(rank: int, table: BandTable = DEFAULT_BAND_TABLE) -> str:
    return table.band_of(rank)


def load_band_config(path: str | Path) -> tuple[BandTable, dict[str, str]]:
    """Band table plus recommendation policy from a JSON document."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: not valid JSON: {err}") from err
    bands = raw.get("bands")
    if not isinstance(bands, list) or not bands:
        raise ConfigError(f"{path}: 'bands' must be a non-empty list")
    try:
        table = BandTable(
            bounds=tuple(int(b["max"]) for b in bands),
            names=tuple(str(b["name"]) for b in bands),
        )
    except (KeyError, TypeError, ValueError) as err:
        raise ConfigError(f"{path}: each band needs 'max' and 'name': {err}") from err
    policy = dict(DEFAULT_RECOMMENDATIONS)
    policy.update({str(k): str(v) for k, v in raw.get("recommendations", {}).items()})
    missing = [name for name in table.names if name not in policy]
    if missing:
        raise ConfigError(f"{path}: no recommendation for band(s): {', '.join(missing)}")
    return table, policy


@dataclass(frozen=True)
class FmecaAssessment:
    score: FmecaScore
    rpr: int
    band: str
    recommendation: str


@dataclass
class EventStats:
    """Per-category event counts over the analyzed span."""

    high_spike: int = 0
    negative_glitch: int = 0
    other: int = 0
    span: str = ""

    @property
    def total(self) -> int:
        return self.high_spike + self.negative_glitch + self.other

    @property
    def high_alarm_events(self) -> int:
        return self.high_spike


def aggregate_events(events: list[AnomalyEvent], span: str) -> EventStats:
    stats = EventStats(span=span)
    for event in events:
        if event.category == CATEGORY_HIGH_SPIKE:
            stats.high_spike += 1
        elif event.category == CATEGORY_NEGATIVE_GLITCH:
            stats.negative_glitch += 1
        else:
            stats.other += 1
    return stats


def recommend(
    assessment_band: str,
    rank: int,
    stats: EventStats,
    policy: dict[str, str] | None = None,
) -> str:
    """Policy text for the band, annotated with the rank and evidence counts."""
    policy = policy if policy is not None else DEFAULT_RECOMMENDATIONS
    if assessment_band not in policy:
        raise ConfigError(f"no recommendation policy for band '{assessment_band}'")
    return (
        f"{policy[assessment_band]} "
        f"(RPR {rank}; events over {stats.span or 'analyzed span'}: "
        f"{stats.high_spike} high-spike, {stats.negative_glitch} negative-glitch, "
        f"{stats.other} other)"
    )


def assess(
    score: FmecaScore,
    stats: EventStats,
    table: BandTable = DEFAULT_BAND_TABLE,
    policy: dict[str, str] | None = None,
) -> FmecaAssessment:
    """Full assessment: rank, band and recommendation for one grade triple."""
    rank = rpr(score)
    name = table.band_of(rank)
    return FmecaAssessment(
        score=score,
        rpr=rank,
        band=name,
        recommendation=recommend(name, rank, stats, policy),
    )
