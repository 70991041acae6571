"""CSV ingestion, per-feature standardization, windowing and chronological splits."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import DataFormatError, InsufficientDataError

STD_EPSILON = 1e-12


@dataclass
class SeriesFrame:
    """Timestamped multivariate series with equal-length named columns."""

    timestamps: list[datetime]
    columns: dict[str, np.ndarray]

    def __post_init__(self):
        for name, col in self.columns.items():
            self.columns[name] = np.asarray(col, dtype=np.float64)
            if len(self.columns[name]) != len(self.timestamps):
                raise DataFormatError(
                    f"column '{name}' has {len(col)} rows, expected {len(self.timestamps)}"
                )

    @property
    def n_rows(self) -> int:
        return len(self.timestamps)

    @property
    def feature_names(self) -> list[str]:
        return list(self.columns)

    def values(self, features: list[str] | None = None) -> np.ndarray:
        """Stack the named columns into an (n_rows, n_features) matrix."""
        names = features if features is not None else self.feature_names
        return np.column_stack([self.columns[name] for name in names])

    def slice(self, start: int, stop: int) -> "SeriesFrame":
        return SeriesFrame(
            timestamps=self.timestamps[start:stop],
            columns={name: col[start:stop].copy() for name, col in self.columns.items()},
        )


def ingest_csv(path: str | Path, schema: list[str]) -> SeriesFrame:
    """Parse a `timestamp,<features...>` CSV into a SeriesFrame.

    Rows with missing or unparsable cells are rejected together, each named
    by its line number; a non-increasing timestamp raises an ordering error
    naming both instants.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(f"{path}: file is empty") from None
        if not header or header[0] != "timestamp":
            raise DataFormatError(f"{path}: first header column must be 'timestamp'")
        missing = [name for name in schema if name not in header[1:]]
        if missing:
            raise DataFormatError(
                f"{path}: missing feature column(s): {', '.join(missing)}"
            )
        positions = [header.index(name) for name in schema]

        timestamps: list[datetime] = []
        data: list[list[float]] = [[] for _ in schema]
        bad: list[str] = []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                bad.append(f"line {line_no}: expected {len(header)} cells, got {len(row)}")
                continue
            try:
                stamp = datetime.fromisoformat(row[0])
            except ValueError:
                bad.append(f"line {line_no}: bad timestamp '{row[0]}'")
                continue
            parsed = []
            for name, pos in zip(schema, positions):
                cell = row[pos].strip()
                if not cell:
                    bad.append(f"line {line_no}: empty value for '{name}'")
                    parsed = None
                    break
                try:
                    parsed.append(float(cell))
                except ValueError:
                    bad.append(f"line {line_no}: bad number '{cell}' for '{name}'")
                    parsed = None
                    break
            if parsed is None:
                continue
            timestamps.append(stamp)
            for values, v in zip(data, parsed):
                values.append(v)
        if bad:
            raise DataFormatError(f"{path}: malformed rows: " + "; ".join(bad))

    for prev, cur in zip(timestamps, timestamps[1:]):
        if cur <= prev:
            raise DataFormatError(
                f"{path}: timestamps out of order: {prev.isoformat()} followed by "
                f"{cur.isoformat()}"
            )
    return SeriesFrame(
        timestamps=timestamps,
        columns={name: np.array(values) for name, values in zip(schema, data)},
    )


def write_series_csv(frame: SeriesFrame, path: str | Path) -> None:
    """Write a frame in the ingestion format; floats keep full precision."""
    path = Path(path)
    names = frame.feature_names
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", *names])
        for i, stamp in enumerate(frame.timestamps):
            writer.writerow(
                [stamp.isoformat(), *(repr(float(frame.columns[n][i])) for n in names)]
            )


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

@dataclass
class StandardizationParams:
    """Training-set means and population stds; stds are floored at epsilon."""

    features: list[str]
    means: np.ndarray
    stds: np.ndarray
    epsilon: float = STD_EPSILON

    def transform_values(self, values: np.ndarray) -> np.ndarray:
        return (values - self.means) / self.stds

    def inverse_values(self, values: np.ndarray) -> np.ndarray:
        return values * self.stds + self.means

    def transform_frame(self, frame: SeriesFrame) -> SeriesFrame:
        cols = {
            name: (frame.columns[name] - self.means[i]) / self.stds[i]
            for i, name in enumerate(self.features)
        }
        return SeriesFrame(timestamps=list(frame.timestamps), columns=cols)

    def inverse_frame(self, frame: SeriesFrame) -> SeriesFrame:
        cols = {
            name: frame.columns[name] * self.stds[i] + self.means[i]
            for i, name in enumerate(self.features)
        }
        return SeriesFrame(timestamps=list(frame.timestamps), columns=cols)


def fit_standardizer(frame: SeriesFrame, features: list[str] | None = None) -> StandardizationParams:
    """Per-feature population mean/std over the frame's rows.

    Constant columns get a std floored at epsilon so they standardize to
    zeros instead of erroring (stuck sensors are a fact of life).
    """
    if frame.n_rows == 0:
        raise InsufficientDataError("cannot fit a standardizer on an empty frame")
    names = features if features is not None else frame.feature_names
    unknown = [n for n in names if n not in frame.columns]
    if unknown:
        raise DataFormatError(f"unknown feature name(s): {', '.join(unknown)}")
    values = frame.values(names)
    means = values.mean(axis=0)
    stds = np.maximum(values.std(axis=0), STD_EPSILON)  # population std, ddof=0
    return StandardizationParams(features=list(names), means=means, stds=stds)


# ---------------------------------------------------------------------------
# Windowing
# ---------------------------------------------------------------------------

@dataclass
class WindowSet:
    """Fixed-length windows cut from a frame, with their source row origins."""

    windows: np.ndarray  # (count, length, channels)
    origins: np.ndarray  # (count,) first source row of each window
    length: int
    stride: int

    def __len__(self) -> int:
        return self.windows.shape[0]

    def take(self, selector) -> "WindowSet":
        return WindowSet(
            windows=self.windows[selector],
            origins=self.origins[selector],
            length=self.length,
            stride=self.stride,
        )


def window_count(n_rows: int, length: int, stride: int) -> int:
    if n_rows < length:
        return 0
    return (n_rows - length) // stride + 1


def make_windows(frame: SeriesFrame, length: int, stride: int = 1) -> WindowSet:
    """Slide a length-sized window over the frame; partial tails are dropped."""
    if length < 1 or stride < 1:
        raise ValueError("window length and stride must be >= 1")
    count = window_count(frame.n_rows, length, stride)
    if count == 0:
        raise InsufficientDataError(
            f"frame has {frame.n_rows} rows, need at least {length} for one window"
        )
    values = frame.values()
    view = np.lib.stride_tricks.sliding_window_view(values, length, axis=0)
    windows = view[::stride].transpose(0, 2, 1).copy()  # (count, length, channels)
    origins = np.arange(count, dtype=np.int64) * stride
    return WindowSet(windows=windows, origins=origins, length=length, stride=stride)


# ---------------------------------------------------------------------------
# Chronological split
# ---------------------------------------------------------------------------

def split_sizes(n_windows: int, train_fraction: float, val_fraction: float) -> tuple[int, int, int]:
    """(train, validation, test) window counts.

    Test takes floor(n * (1 - train_fraction)); validation takes the floored
    tail of the remaining train block, bumped to one window when the floor
    is zero so every part stays usable; train keeps the remainder.
    """
    if not (0.0 < train_fraction < 1.0) or not (0.0 < val_fraction < 1.0):
        raise ValueError("split fractions must lie strictly between 0 and 1")
    # guard against float fuzz like 100 * 0.8 == 80.00000000000001
    train_total = int(np.floor(n_windows * train_fraction + 1e-9))
    n_test = n_windows - train_total
    n_val = int(np.floor(train_total * val_fraction + 1e-9))
    if n_val == 0:
        n_val = 1
    n_train = train_total - n_val
    if n_train < 1 or n_val < 1 or n_test < 1:
        raise InsufficientDataError(
            f"{n_windows} windows cannot fill train/validation/test parts "
            f"(got {n_train}/{n_val}/{n_test})"
        )
    return n_train, n_val, n_test


def chrono_split(
    window_set: WindowSet, train_fraction: float = 0.8, val_fraction: float = 0.1
) -> tuple[WindowSet, WindowSet, WindowSet]:
    """Order-preserving split: oldest windows train, newest test.

    Validation is the most recent tail of the train block, never shuffled.
    """
    n_train, n_val, n_test = split_sizes(len(window_set), train_fraction, val_fraction)
    train = window_set.take(slice(0, n_train))
    val = window_set.take(slice(n_train, n_train + n_val))
    test = window_set.take(slice(n_train + n_val, len(window_set)))
    return train, val, test


def train_row_span(n_rows: int, length: int, stride: int, train_fraction: float) -> int:
    """Rows covered by the train-plus-validation windows.

    Used to fit the standardizer on training-period rows only, keeping the
    held-out test rows out of the statistics.
    """
    n_windows = window_count(n_rows, length, stride)
    if n_windows == 0:
        raise InsufficientDataError(
            f"frame has {n_rows} rows, need at least {length} for one window"
        )
    train_total = int(np.floor(n_windows * train_fraction + 1e-9))
    if train_total < 1:
        raise InsufficientDataError("train fraction leaves no training windows")
    return (train_total - 1) * stride + length
