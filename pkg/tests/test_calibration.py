"""Tests for the probability mapping, calibration error and reliability data."""

from __future__ import annotations

import math

import numpy as np
import pytest

from coolwatch.calibration import (
    CalibrationReport,
    ProbabilisticPrediction,
    ece,
    error_to_probability,
    reliability_points,
)
from coolwatch.errors import NumericError
from coolwatch.training import ThresholdSpec


def threshold(value=0.5, std=0.1) -> ThresholdSpec:
    return ThresholdSpec(mean_error=value - std, std_error=std, value=value, count=10)


def preds(probabilities, labels) -> list[ProbabilisticPrediction]:
    return [ProbabilisticPrediction(p, y) for p, y in zip(probabilities, labels)]


def brute_force_ece(probabilities, labels, num_bins) -> float:
    """Independent enumeration oracle: explicit interval membership."""
    total = len(probabilities)
    value = 0.0
    for b in range(num_bins):
        lo, hi = b / num_bins, (b + 1) / num_bins
        if b == num_bins - 1:
            members = [i for i, p in enumerate(probabilities) if lo <= p <= hi]
        else:
            members = [i for i, p in enumerate(probabilities) if lo <= p < hi]
        if not members:
            continue
        conf = sum(probabilities[i] for i in members) / len(members)
        acc = sum(labels[i] for i in members) / len(members)
        value += len(members) / total * abs(acc - conf)
    return value


# ---------------------------------------------------------------------------
# error_to_probability
# ---------------------------------------------------------------------------

def test_error_at_threshold_maps_to_half():
    assert error_to_probability(0.5, threshold(0.5)) == 0.5


def test_probability_is_strictly_monotone_in_error():
    spec = threshold(0.5, 0.05)
    errors = np.linspace(0.0, 2.0, 50)
    probs = [error_to_probability(float(e), spec) for e in errors]
    assert all(b > a for a, b in zip(probs, probs[1:]))
    assert probs[0] < 0.5
    assert probs[-1] > 0.5


def test_extreme_errors_saturate_without_overflow():
    spec = threshold(0.5, 1e-12)
    assert error_to_probability(1e6, spec) == 1.0
    assert error_to_probability(0.0, spec) == 0.0


def test_one_scale_above_threshold_is_logistic_of_one():
    spec = threshold(0.5, 0.1)
    expected = 1.0 / (1.0 + math.exp(-1.0))
    assert abs(error_to_probability(0.6, spec) - expected) < 1e-12


def test_non_finite_error_rejected():
    with pytest.raises(NumericError):
        error_to_probability(float("nan"), threshold())


def test_prediction_validation():
    with pytest.raises(ValueError):
        ProbabilisticPrediction(1.2, 1)
    with pytest.raises(ValueError):
        ProbabilisticPrediction(0.5, 2)


# ---------------------------------------------------------------------------
# ECE
# ---------------------------------------------------------------------------

def test_perfectly_calibrated_half_case_is_exactly_zero():
    p = preds([0.5] * 10, [1, 0, 1, 0, 1, 0, 1, 0, 1, 0])
    report = ece(p, num_bins=10)
    assert report.ece == 0.0
    assert report.total == 10


def test_two_bin_hand_case():
    report = ece(preds([0.1, 0.2, 0.8, 0.9], [0, 1, 1, 1]), num_bins=2)
    assert abs(report.ece - 0.25) < 1e-15
    low, high = report.bins
    assert low.count == 2 and high.count == 2
    assert abs(low.mean_confidence - 0.15) < 1e-15
    assert low.observed_frequency == 0.5
    assert abs(high.mean_confidence - 0.85) < 1e-15
    assert high.observed_frequency == 1.0


def test_ece_matches_enumeration_oracle():
    rng = np.random.default_rng(47)
    for _ in range(100):
        n = int(rng.integers(1, 51))
        probabilities = rng.random(n).tolist()
        labels = rng.integers(0, 2, size=n).tolist()
        for num_bins in (1, 2, 5, 10):
            ours = ece(preds(probabilities, labels), num_bins).ece
            oracle = brute_force_ece(probabilities, labels, num_bins)
            assert abs(ours - oracle) < 1e-12


def test_ece_bounds_and_counts():
    rng = np.random.default_rng(53)
    for _ in range(25):
        n = int(rng.integers(1, 80))
        report = ece(preds(rng.random(n).tolist(), rng.integers(0, 2, size=n).tolist()), 10)
        assert 0.0 <= report.ece <= 1.0
        assert sum(b.count for b in report.bins) == report.total == n
        for b in report.bins:
            if b.count:
                assert b.lower - 1e-15 <= b.mean_confidence <= b.upper + 1e-15


def test_ece_is_permutation_invariant():
    rng = np.random.default_rng(59)
    probabilities = rng.random(30).tolist()
    labels = rng.integers(0, 2, size=30).tolist()
    base = ece(preds(probabilities, labels), 10).ece
    order = rng.permutation(30)
    shuffled = ece(
        preds([probabilities[i] for i in order], [labels[i] for i in order]), 10
    ).ece
    assert abs(base - shuffled) < 1e-15


def test_ece_zero_iff_every_bin_matches():
    # construct a case where each non-empty bin has frequency == confidence
    p = preds([0.25, 0.25, 0.25, 0.25, 0.75, 0.75, 0.75, 0.75], [0, 0, 0, 1, 1, 1, 1, 0])
    report = ece(p, num_bins=2)
    assert report.ece == 0.0
    # and breaking one label makes it strictly positive
    p_bad = preds([0.25, 0.25, 0.25, 0.25, 0.75, 0.75, 0.75, 0.75], [0, 0, 1, 1, 1, 1, 1, 1])
    assert ece(p_bad, num_bins=2).ece > 0.0


def test_probability_one_lands_in_last_bin():
    report = ece(preds([1.0, 0.95], [1, 1]), num_bins=10)
    assert report.bins[-1].count == 2


def test_ece_empty_and_bad_bins_rejected():
    with pytest.raises(ValueError):
        ece([], 10)
    with pytest.raises(ValueError):
        ece(preds([0.5], [1]), 0)


# ---------------------------------------------------------------------------
# Reliability points
# ---------------------------------------------------------------------------

def test_reliability_points_hand_case():
    report = ece(preds([0.1, 0.2, 0.8, 0.9], [0, 1, 1, 1]), num_bins=2)
    points = reliability_points(report)
    assert len(points) == 2
    assert abs(points[0][0] - 0.15) < 1e-15 and points[0][1] == 0.5
    assert abs(points[1][0] - 0.85) < 1e-15 and points[1][1] == 1.0


def test_reliability_points_omit_empty_bins():
    report = ece(preds([0.05, 0.95], [0, 1]), num_bins=10)
    points = reliability_points(report)
    assert len(points) == 2
    assert all(count == 1 for _, _, count in points)


def test_calibrated_synthetic_data_hugs_the_diagonal():
    rng = np.random.default_rng(61)
    probabilities = rng.random(5000)
    labels = (rng.random(5000) < probabilities).astype(int)
    report = ece(preds(probabilities.tolist(), labels.tolist()), 10)
    for conf, freq, count in reliability_points(report):
        if count >= 200:
            assert abs(conf - freq) < 0.08  # sampling noise bound
    assert report.ece < 0.05
