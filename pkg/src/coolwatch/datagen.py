"""Synthetic cooling-system series with ground-truth-labeled injections.

The normal regime is a level plus a diurnal sinusoid plus seeded Gaussian
noise per channel. Injection magnitudes are expressed in multiples of the
channel noise sigma so detection margins stay scale-free.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataFormatError
from .pipeline import SeriesFrame

KIND_CORRELATED_SPIKE = "correlated-spike"
KIND_UNCORRELATED_SPIKE = "uncorrelated-spike"
KIND_NEGATIVE_GLITCH = "negative-glitch"
INJECTION_KINDS = (KIND_CORRELATED_SPIKE, KIND_UNCORRELATED_SPIKE, KIND_NEGATIVE_GLITCH)

CONDUCTIVITY = "conductivity"
TEMPERATURE = "supply_temperature"
METER_RANGE = (0.0, 2.0)  # analog conductivity meter display range


@dataclass(frozen=True)
class Injection:
    kind: str
    start: int
    length: int
    magnitude: float

    def __post_init__(self):
        if self.kind not in INJECTION_KINDS:
            raise ConfigError(
                f"unknown injection kind '{self.kind}'; expected one of {INJECTION_KINDS}"
            )
        if self.length < 1:
            raise ConfigError("injection length must be >= 1")
        if self.start < 0:
            raise ConfigError("injection start must be >= 0")

    @property
    def stop(self) -> int:
        return self.start + self.length


@dataclass
class ScenarioConfig:
    n_samples: int = 2000
    seed: int = 0
    conductivity_level: float = 0.5
    conductivity_noise: float = 0.02
    temperature_level: float = 30.0
    temperature_noise: float = 0.5
    diurnal_amplitude: float = 3.0  # in multiples of each channel's noise sigma
    diurnal_period: int = 24
    injections: list[Injection] = field(default_factory=list)

    def __post_init__(self):
        if self.n_samples < 1:
            raise ConfigError("n_samples must be positive")
        lo, hi = METER_RANGE
        if not (lo <= self.conductivity_level <= hi):
            raise ConfigError(
                f"conductivity_level must lie in the meter range [{lo}, {hi}]"
            )
        if self.conductivity_noise < 0 or self.temperature_noise < 0:
            raise ConfigError("noise sigmas must be non-negative")
        if self.diurnal_period < 1:
            raise ConfigError("diurnal_period must be positive")
        spans = sorted((inj.start, inj.stop) for inj in self.injections)
        for (a_start, a_stop), (b_start, b_stop) in zip(spans, spans[1:]):
            if b_start < a_stop:
                raise ConfigError(
                    f"overlapping injections: [{a_start}, {a_stop}) and "
                    f"[{b_start}, {b_stop})"
                )
        for inj in self.injections:
            if inj.stop > self.n_samples:
                raise ConfigError(
                    f"injection [{inj.start}, {inj.stop}) runs past the series "
                    f"end ({self.n_samples})"
                )


def generate(config: ScenarioConfig) -> tuple[SeriesFrame, np.ndarray]:
    """Deterministic series plus per-sample boolean ground-truth labels.

    Labels are true exactly on injected samples. Correlated spikes raise
    both channels, uncorrelated spikes only conductivity, and negative
    glitches force both channels to negative values the way a disturbed
    sensor reads.
    """
    rng = np.random.default_rng(config.seed)
    t = np.arange(config.n_samples)
    wave = np.sin(2.0 * np.pi * t / config.diurnal_period)
    conductivity = (
        config.conductivity_level
        + config.diurnal_amplitude * config.conductivity_noise * wave
        + rng.normal(0.0, config.conductivity_noise, config.n_samples)
    )
    temperature = (
        config.temperature_level
        + config.diurnal_amplitude * config.temperature_noise * wave
        + rng.normal(0.0, config.temperature_noise, config.n_samples)
    )

    labels = np.zeros(config.n_samples, dtype=bool)
    for inj in config.injections:
        span = slice(inj.start, inj.stop)
        if inj.kind == KIND_CORRELATED_SPIKE:
            conductivity[span] += inj.magnitude * config.conductivity_noise
            temperature[span] += inj.magnitude * config.temperature_noise
        elif inj.kind == KIND_UNCORRELATED_SPIKE:
            conductivity[span] += inj.magnitude * config.conductivity_noise
        else:  # negative glitch: both sensors read negative
            conductivity[span] = -inj.magnitude * config.conductivity_noise
            temperature[span] = -inj.magnitude * config.temperature_noise
        labels[span] = True

    start = datetime(2020, 1, 1)
    frame = SeriesFrame(
        timestamps=[start + timedelta(hours=int(i)) for i in t],
        columns={CONDUCTIVITY: conductivity, TEMPERATURE: temperature},
    )
    return frame, labels


def write_labels_csv(labels: np.ndarray, path: str | Path) -> None:
    """Sibling ground-truth file: one (sample index, 0/1) row per sample."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "is_anomaly"])
        for i, flag in enumerate(labels):
            writer.writerow([i, int(flag)])


def read_labels_csv(path: str | Path) -> np.ndarray:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["index", "is_anomaly"]:
            raise DataFormatError(f"{path}: expected header 'index,is_anomaly'")
        flags = []
        for line_no, row in enumerate(reader, start=2):
            try:
                index, flag = int(row[0]), int(row[1])
            except (ValueError, IndexError):
                raise DataFormatError(f"{path}: malformed row at line {line_no}") from None
            if index != len(flags):
                raise DataFormatError(
                    f"{path}: line {line_no}: expected index {len(flags)}, got {index}"
                )
            flags.append(bool(flag))
    return np.array(flags, dtype=bool)
