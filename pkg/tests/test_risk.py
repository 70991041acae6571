"""Tests for risk priority ranking, bands, aggregation and recommendations."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from coolwatch.detector import (
    CATEGORY_HIGH_SPIKE,
    CATEGORY_NEGATIVE_GLITCH,
    CATEGORY_OTHER,
    AnomalyEvent,
)
from coolwatch.errors import ConfigError
from coolwatch.risk import (
    DEFAULT_BAND_TABLE,
    BandTable,
    EventStats,
    FmecaScore,
    aggregate_events,
    assess,
    band,
    load_band_config,
    recommend,
    rpr,
)


def event(category: str) -> AnomalyEvent:
    return AnomalyEvent(start=0, end=1, duration=2, peak_error=1.0, category=category)


# ---------------------------------------------------------------------------
# Rank
# ---------------------------------------------------------------------------

def test_rpr_published_cases():
    assert rpr(FmecaScore(5, 4, 2)) == 40
    assert rpr(FmecaScore(5, 4, 1)) == 20


def test_rpr_minimum():
    assert rpr(FmecaScore(1, 1, 1)) == 1


def test_grades_out_of_range_rejected():
    with pytest.raises(ConfigError):
        FmecaScore(0, 4, 2)
    with pytest.raises(ConfigError):
        FmecaScore(5, 6, 2)
    with pytest.raises(ConfigError):
        FmecaScore(5, 4, -1)


def test_rpr_monotone_in_each_grade():
    for s, p, d in itertools.product(range(1, 6), repeat=3):
        base = rpr(FmecaScore(s, p, d))
        if s < 5:
            assert rpr(FmecaScore(s + 1, p, d)) >= base
        if p < 5:
            assert rpr(FmecaScore(s, p + 1, d)) >= base
        if d < 5:
            assert rpr(FmecaScore(s, p, d + 1)) >= base


# ---------------------------------------------------------------------------
# Bands
# ---------------------------------------------------------------------------

def test_band_published_values():
    assert band(20) == "low"
    assert band(40) == "medium"
    assert band(125) == "high"


def test_band_partitions_whole_range():
    seen = set()
    for rank in range(1, 126):
        seen.add(band(rank))
    assert seen == {"low", "medium", "high"}
    assert band(25) == "low" and band(26) == "medium"
    assert band(50) == "medium" and band(51) == "high"


def test_every_grade_triple_yields_valid_assessment():
    stats = EventStats(span="test")
    for s, p, d in itertools.product(range(1, 6), repeat=3):
        a = assess(FmecaScore(s, p, d), stats)
        assert 1 <= a.rpr <= 125
        assert a.band in ("low", "medium", "high")
        assert a.recommendation


def test_band_table_rejects_gaps_and_overlaps():
    with pytest.raises(ConfigError):
        BandTable(bounds=(25, 50, 60), names=("low", "medium", "high"))  # gap to 125
    with pytest.raises(ConfigError):
        BandTable(bounds=(50, 25, 125), names=("low", "medium", "high"))  # not increasing
    with pytest.raises(ConfigError):
        BandTable(bounds=(25, 25, 125), names=("low", "medium", "high"))  # overlap


def test_band_rank_out_of_range():
    with pytest.raises(ConfigError):
        band(0)
    with pytest.raises(ConfigError):
        band(126)


def test_load_band_config_round_trip(tmp_path):
    path = tmp_path / "bands.json"
    path.write_text(
        '{"bands": [{"max": 10, "name": "low"}, {"max": 125, "name": "high"}],'
        ' "recommendations": {"low": "keep watching", "high": "act now"}}'
    )
    table, policy = load_band_config(path)
    assert table.band_of(10) == "low"
    assert table.band_of(11) == "high"
    assert policy["high"] == "act now"


def test_load_band_config_rejects_malformed(tmp_path):
    path = tmp_path / "bands.json"
    path.write_text('{"bands": [{"max": 25, "name": "low"}]}')
    with pytest.raises(ConfigError):
        load_band_config(path)  # gap: 26..125 unassigned


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def test_aggregate_empty_event_list():
    stats = aggregate_events([], span="empty")
    assert stats.total == 0
    assert (stats.high_spike, stats.negative_glitch, stats.other) == (0, 0, 0)


def test_aggregate_published_shape_one_spike_three_glitches():
    events = [event(CATEGORY_HIGH_SPIKE)] + [event(CATEGORY_NEGATIVE_GLITCH)] * 3
    stats = aggregate_events(events, span="3.5 yrs")
    assert (stats.high_spike, stats.negative_glitch, stats.other) == (1, 3, 0)
    assert stats.high_alarm_events == 1


def test_aggregate_matches_enumeration_for_random_lists():
    rng = np.random.default_rng(43)
    categories = [CATEGORY_HIGH_SPIKE, CATEGORY_NEGATIVE_GLITCH, CATEGORY_OTHER]
    for _ in range(50):
        picks = [categories[i] for i in rng.integers(0, 3, size=rng.integers(0, 20))]
        stats = aggregate_events([event(c) for c in picks], span="x")
        assert stats.high_spike == picks.count(CATEGORY_HIGH_SPIKE)
        assert stats.negative_glitch == picks.count(CATEGORY_NEGATIVE_GLITCH)
        assert stats.other == picks.count(CATEGORY_OTHER)
        assert stats.total == len(picks)


# ---------------------------------------------------------------------------
# Recommendations
# ---------------------------------------------------------------------------

def test_low_band_defers_replacement():
    stats = EventStats(span="3.5 yrs")
    text = recommend("low", 20, stats)
    assert "defer replacement" in text
    assert "RPR 20" in text


def test_high_band_demands_immediate_action():
    text = recommend("high", 100, EventStats(span="1 yr"))
    assert "immediately" in text


def test_recommendation_is_pure():
    stats = EventStats(high_spike=1, negative_glitch=3, span="3.5 yrs")
    assert recommend("medium", 40, stats) == recommend("medium", 40, stats)


def test_assess_published_pair_reports_both_bands():
    stats = EventStats(high_spike=1, negative_glitch=3, span="3.5 yrs")
    monitored = assess(FmecaScore(5, 4, 2), stats)
    quick = assess(FmecaScore(5, 4, 1), stats)
    assert (monitored.rpr, monitored.band) == (40, "medium")
    assert (quick.rpr, quick.band) == (20, "low")
    assert "1 high-spike" in monitored.recommendation
