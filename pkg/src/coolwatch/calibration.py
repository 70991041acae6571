"""Anomaly probabilities from reconstruction errors, and calibration error.

The error-to-probability mapping is a logistic curve centered at the
detection threshold with the training-error spread as its scale. It is an
artifact of this implementation, chosen as the minimal monotone map that
sends the threshold to probability 0.5; the calibration metric itself does
not depend on that choice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .training import ThresholdSpec

SCALE_FLOOR = 1e-12


def error_to_probability(mae: float, threshold: ThresholdSpec, scale: float | None = None) -> float:
    """Logistic map of a reconstruction error to an anomaly probability.

    Strictly increasing in the error; an error equal to the threshold maps
    to exactly 0.5. ``scale`` defaults to the threshold's training-error
    std, floored to stay positive for degenerate error sets.
    """
    if not math.isfinite(mae):
        raise NumericError(f"reconstruction error must be finite, got {mae!r}")
    if scale is None:
        scale = max(threshold.std_error, SCALE_FLOOR)
    if scale <= 0:
        raise ValueError("scale must be positive")
    t = (mae - threshold.value) / scale
    e = math.exp(-abs(t))
    return 1.0 / (1.0 + e) if t >= 0 else e / (1.0 + e)


@dataclass(frozen=True)
class ProbabilisticPrediction:
    """A predicted anomaly probability paired with its binary outcome."""

    probability: float
    label: int

    def __post_init__(self):
        if not (0.0 <= self.probability <= 1.0):
            raise ValueError(f"probability must lie in [0, 1], got {self.probability}")
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class CalibrationBin:
    """One probability interval with its count, confidence and frequency.

    The interval is half-open [lower, upper) except the last bin, which
    also includes 1.0. Confidence and frequency are None for empty bins.
    """

    lower: float
    upper: float
    count: int
    mean_confidence: float | None
    observed_frequency: float | None


@dataclass(frozen=True)
class CalibrationReport:
    bins: tuple[CalibrationBin, ...]
    ece: float
    total: int


def ece(predictions: list[ProbabilisticPrediction], num_bins: int = 10) -> CalibrationReport:
    """Expected calibration error over equal-width probability bins.

    Per non-empty bin b, the gap |observed_frequency(b) - mean_confidence(b)|
    is weighted by its share of the predictions; the weighted sum is the
    calibration error. The observed frequency is the positive-label rate.
    """
    if not predictions:
        raise ValueError("ece requires at least one prediction")
    if num_bins < 1:
        raise ValueError("num_bins must be >= 1")
    counts = np.zeros(num_bins, dtype=np.int64)
    prob_sums = np.zeros(num_bins)
    label_sums = np.zeros(num_bins)
    for pred in predictions:
        index = min(int(pred.probability * num_bins), num_bins - 1)
        counts[index] += 1
        prob_sums[index] += pred.probability
        label_sums[index] += pred.label

    total = len(predictions)
    bins = []
    weighted_gap = 0.0
    for b in range(num_bins):
        if counts[b]:
            confidence = prob_sums[b] / counts[b]
            frequency = label_sums[b] / counts[b]
            weighted_gap += counts[b] / total * abs(frequency - confidence)
        else:
            confidence = None
            frequency = None
        bins.append(
            CalibrationBin(
                lower=b / num_bins,
                upper=(b + 1) / num_bins,
                count=int(counts[b]),
                mean_confidence=confidence,
                observed_frequency=frequency,
            )
        )
    return CalibrationReport(bins=tuple(bins), ece=float(weighted_gap), total=total)


def reliability_points(report: CalibrationReport) -> list[tuple[float, float, int]]:
    """(confidence, frequency, count) per non-empty bin, in bin order.

    Plotting these against the diagonal gives the calibration curve.
    """
    return [
        (b.mean_confidence, b.observed_frequency, b.count)
        for b in report.bins
        if b.count > 0
    ]
