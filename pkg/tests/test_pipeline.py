"""Tests for ingestion, standardization, windowing and the chrono split."""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np
import pytest

from coolwatch.errors import DataFormatError, InsufficientDataError
from coolwatch.pipeline import (
    SeriesFrame,
    chrono_split,
    fit_standardizer,
    ingest_csv,
    make_windows,
    split_sizes,
    train_row_span,
    window_count,
    write_series_csv,
)


def make_frame(n_rows: int, seed: int = 0) -> SeriesFrame:
    rng = np.random.default_rng(seed)
    start = datetime(2020, 1, 1)
    return SeriesFrame(
        timestamps=[start + timedelta(hours=i) for i in range(n_rows)],
        columns={
            "conductivity": rng.normal(0.5, 0.1, n_rows),
            "supply_temperature": rng.normal(30.0, 2.0, n_rows),
        },
    )


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def test_ingest_well_formed_file(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text(
        "timestamp,conductivity,supply_temperature\n"
        "2020-01-01T00:00:00,0.5,30.0\n"
        "2020-01-01T01:00:00,0.6,30.5\n"
        "2020-01-01T02:00:00,0.4,29.5\n"
    )
    frame = ingest_csv(path, ["conductivity", "supply_temperature"])
    assert frame.n_rows == 3
    assert np.allclose(frame.columns["conductivity"], [0.5, 0.6, 0.4])


def test_ingest_rejects_empty_cell_naming_line(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text(
        "timestamp,conductivity,supply_temperature\n"
        "2020-01-01T00:00:00,0.5,30.0\n"
        "2020-01-01T01:00:00,,30.5\n"
    )
    with pytest.raises(DataFormatError, match="line 3.*conductivity"):
        ingest_csv(path, ["conductivity", "supply_temperature"])


def test_ingest_out_of_order_timestamps_names_both_instants(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text(
        "timestamp,conductivity\n"
        "2020-01-01T02:00:00,0.5\n"
        "2020-01-01T01:00:00,0.6\n"
    )
    with pytest.raises(DataFormatError, match="2020-01-01T02:00:00.*2020-01-01T01:00:00"):
        ingest_csv(path, ["conductivity"])


def test_ingest_missing_feature_column_named(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("timestamp,supply_temperature\n2020-01-01T00:00:00,30.0\n")
    with pytest.raises(DataFormatError, match="conductivity"):
        ingest_csv(path, ["conductivity", "supply_temperature"])


def test_csv_round_trip_preserves_values(tmp_path):
    frame = make_frame(10, seed=1)
    path = tmp_path / "series.csv"
    write_series_csv(frame, path)
    back = ingest_csv(path, frame.feature_names)
    assert back.timestamps == frame.timestamps
    for name in frame.feature_names:
        assert np.array_equal(back.columns[name], frame.columns[name])


# ---------------------------------------------------------------------------
# Standardization
# ---------------------------------------------------------------------------

def test_standardizer_hand_case():
    frame = SeriesFrame(
        timestamps=[datetime(2020, 1, 1), datetime(2020, 1, 2)],
        columns={"a": np.array([1.0, 3.0])},
    )
    params = fit_standardizer(frame)
    assert params.means[0] == 2.0
    assert params.stds[0] == 1.0  # population std
    out = params.transform_frame(frame)
    assert np.array_equal(out.columns["a"], [-1.0, 1.0])


def test_standardizer_constant_column_maps_to_zero():
    frame = SeriesFrame(
        timestamps=[datetime(2020, 1, 1), datetime(2020, 1, 2)],
        columns={"a": np.array([4.5, 4.5])},
    )
    params = fit_standardizer(frame)
    assert params.means[0] == 4.5
    assert params.stds[0] == 1e-12
    assert not params.transform_frame(frame).columns["a"].any()


def test_standardize_then_invert_is_identity():
    frame = make_frame(50, seed=2)
    params = fit_standardizer(frame)
    back = params.inverse_frame(params.transform_frame(frame))
    for name in frame.feature_names:
        assert np.abs(back.columns[name] - frame.columns[name]).max() < 1e-12


def test_standardized_training_features_have_unit_stats():
    frame = make_frame(200, seed=3)
    params = fit_standardizer(frame)
    out = params.transform_frame(frame)
    for name in frame.feature_names:
        assert abs(out.columns[name].mean()) < 1e-9
        assert abs(out.columns[name].std() - 1.0) < 1e-9


def test_standardizer_unknown_feature_errors():
    with pytest.raises(DataFormatError, match="pressure"):
        fit_standardizer(make_frame(5), ["pressure"])


def test_standardizer_empty_frame_errors():
    empty = SeriesFrame(timestamps=[], columns={"a": np.array([])})
    with pytest.raises(InsufficientDataError):
        fit_standardizer(empty)


# ---------------------------------------------------------------------------
# Windowing
# ---------------------------------------------------------------------------

def test_make_windows_exact_fit():
    ws = make_windows(make_frame(24), length=24)
    assert len(ws) == 1
    assert ws.origins[0] == 0


def test_make_windows_stride_one():
    ws = make_windows(make_frame(30), length=24, stride=1)
    assert len(ws) == 7
    assert list(ws.origins) == list(range(7))


def test_make_windows_drops_partial_tail():
    ws = make_windows(make_frame(30), length=24, stride=24)
    assert len(ws) == 1


def test_make_windows_insufficient_rows():
    with pytest.raises(InsufficientDataError):
        make_windows(make_frame(10), length=24)


def test_windows_map_back_to_source_rows():
    frame = make_frame(40, seed=4)
    ws = make_windows(frame, length=8, stride=3)
    values = frame.values()
    for i, origin in enumerate(ws.origins):
        assert np.array_equal(ws.windows[i], values[origin : origin + 8])


def test_window_count_matches_brute_force_enumeration():
    for rows in range(0, 201, 7):
        for length in (1, 5, 24):
            for stride in (1, 2, 5, 24):
                expected = len(
                    [s for s in range(0, max(rows - length + 1, 0), stride)]
                ) if rows >= length else 0
                assert window_count(rows, length, stride) == expected


# ---------------------------------------------------------------------------
# Chronological split
# ---------------------------------------------------------------------------

def test_split_sizes_hundred_windows():
    assert split_sizes(100, 0.8, 0.1) == (72, 8, 20)


def test_split_sizes_ten_windows_minimum_viability():
    assert split_sizes(10, 0.8, 0.1) == (7, 1, 2)


def test_split_sizes_match_enumeration():
    for n in range(5, 200):
        train, val, test = split_sizes(n, 0.8, 0.1)
        assert train + val + test == n
        assert min(train, val, test) >= 1


def test_split_too_few_windows_errors():
    with pytest.raises(InsufficientDataError):
        split_sizes(2, 0.8, 0.1)


def test_chrono_split_preserves_order_and_origins():
    ws = make_windows(make_frame(123, seed=5), length=24, stride=1)
    train, val, test = chrono_split(ws)
    joined = np.concatenate([train.origins, val.origins, test.origins])
    assert np.array_equal(joined, ws.origins)
    assert train.origins[-1] < val.origins[0] < test.origins[0]
    assert np.array_equal(test.windows[0], ws.windows[len(train) + len(val)])


def test_train_row_span_covers_train_and_val_windows():
    n_rows, length, stride = 123, 24, 1
    span = train_row_span(n_rows, length, stride, 0.8)
    ws = make_windows(make_frame(n_rows), length, stride)
    train, val, test = chrono_split(ws)
    last_train_row = val.origins[-1] + length - 1
    assert span == last_train_row + 1
    assert test.origins[0] + length - 1 >= span  # test windows reach beyond it
