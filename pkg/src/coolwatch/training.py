"""Training loop with early stopping, threshold calibration and ablation."""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .errors import InsufficientDataError, NumericError
from .layers import AdamState, adam_update
from .model import Autoencoder, NetworkSpec
from .pipeline import WindowSet


@dataclass
class TrainConfig:
    batch_size: int = 32
    learning_rate: float = 1e-3
    max_epochs: int = 100
    patience: int = 5
    seed: int = 0
    attention_enabled: bool = True

    def __post_init__(self):
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch_size and max_epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience < 1:
            raise ValueError("patience must be >= 1")


@dataclass
class TrainReport:
    train_mae: list[float]
    val_mae: list[float]
    stopped_epoch: int
    best_epoch: int
    threshold: float | None
    wall_time_s: float


@dataclass(frozen=True)
class ThresholdSpec:
    """Anomaly decision boundary: mean plus one population std of the
    per-window training reconstruction errors."""

    mean_error: float
    std_error: float
    value: float
    count: int


def threshold_from_errors(errors: np.ndarray) -> ThresholdSpec:
    errors = np.asarray(errors, dtype=np.float64)
    if errors.size < 2:
        raise InsufficientDataError(
            "need at least two reconstruction errors to calibrate a threshold"
        )
    mean = float(errors.mean())
    std = float(errors.std())  # population std, matching the standardizer
    return ThresholdSpec(mean_error=mean, std_error=std, value=mean + std, count=errors.size)


def calibrate_threshold(model: Autoencoder, train_set: WindowSet) -> ThresholdSpec:
    """Threshold from the trained model's errors on the training windows."""
    if len(train_set) < 2:
        raise InsufficientDataError("need at least two training windows")
    return threshold_from_errors(model.window_errors(train_set.windows))


def train(
    model: Autoencoder,
    train_set: WindowSet,
    val_set: WindowSet,
    config: TrainConfig,
) -> TrainReport:
    """Mini-batch Adam descent on batch MAE with patience-based early stopping.

    Batches are drawn from a once-per-epoch seeded shuffle; the last partial
    batch is kept. Training stops once validation MAE fails to improve for
    ``patience`` consecutive epochs, and the parameters are restored to the
    best-validation epoch. Runs with the same seed are bit-identical.
    """
    if len(train_set) == 0 or len(val_set) == 0:
        raise InsufficientDataError("train and validation sets must be non-empty")
    started = time.perf_counter()
    rng = np.random.default_rng(config.seed)
    state = AdamState(learning_rate=config.learning_rate)

    train_curve: list[float] = []
    val_curve: list[float] = []
    best_val = np.inf
    best_epoch = 0
    best_params = model.params.snapshot()
    epochs_without_improvement = 0
    stopped_epoch = 0
    n = len(train_set)

    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        error_sum = 0.0
        for batch_index, start in enumerate(range(0, n, config.batch_size)):
            batch = train_set.windows[order[start : start + config.batch_size]]
            loss, per_window = model.forward_backward(batch)
            if not np.isfinite(loss):
                raise NumericError(
                    f"training diverged at epoch {epoch}, batch {batch_index}"
                )
            error_sum += float(per_window.sum())
            adam_update(model.params, state)
        train_curve.append(error_sum / n)
        val_mae = float(model.window_errors(val_set.windows).mean())
        val_curve.append(val_mae)
        stopped_epoch = epoch

        if val_mae < best_val:
            best_val = val_mae
            best_epoch = epoch
            best_params = model.params.snapshot()
            epochs_without_improvement = 0
        else:
            epochs_without_improvement += 1
            if epochs_without_improvement >= config.patience:
                break

    model.params.restore(best_params)
    return TrainReport(
        train_mae=train_curve,
        val_mae=val_curve,
        stopped_epoch=stopped_epoch,
        best_epoch=best_epoch,
        threshold=None,
        wall_time_s=time.perf_counter() - started,
    )


# ---------------------------------------------------------------------------
# Ablation
# ---------------------------------------------------------------------------

def relative_improvement(baseline: float, improved: float) -> float:
    """(baseline - improved) / baseline as a percentage."""
    if baseline == 0:
        raise ValueError("baseline must be non-zero")
    return (baseline - improved) / baseline * 100.0


@dataclass
class AblationReport:
    """Side-by-side result of the attention-gated and plain variants."""

    mae_attention: float
    mae_baseline: float
    improvement_percent: float
    anomalies_attention: int
    anomalies_baseline: int
    threshold_attention: float
    threshold_baseline: float


def _run_variant(
    spec: NetworkSpec,
    train_set: WindowSet,
    val_set: WindowSet,
    test_set: WindowSet,
    config: TrainConfig,
) -> tuple[float, int, float]:
    model = Autoencoder(spec, seed=config.seed)
    train(model, train_set, val_set, config)
    threshold = calibrate_threshold(model, train_set)
    errors = model.window_errors(test_set.windows)
    return float(errors.mean()), int((errors > threshold.value).sum()), threshold.value


def ablation_run(
    spec: NetworkSpec,
    train_set: WindowSet,
    val_set: WindowSet,
    test_set: WindowSet,
    config: TrainConfig,
    attention_pair: tuple[bool, bool] = (True, False),
) -> AblationReport:
    """Train two variants differing only in the attention flag.

    Both arms share the data, seed and hyperparameters; test-set MAE,
    anomalous-window counts and the relative improvement of the first arm
    over the second are reported.
    """
    mae_a, count_a, thr_a = _run_variant(
        replace(spec, attention_enabled=attention_pair[0]),
        train_set, val_set, test_set, config,
    )
    mae_b, count_b, thr_b = _run_variant(
        replace(spec, attention_enabled=attention_pair[1]),
        train_set, val_set, test_set, config,
    )
    return AblationReport(
        mae_attention=mae_a,
        mae_baseline=mae_b,
        improvement_percent=relative_improvement(mae_b, mae_a),
        anomalies_attention=count_a,
        anomalies_baseline=count_b,
        threshold_attention=thr_a,
        threshold_baseline=thr_b,
    )


def write_ablation_report(report: AblationReport, path: str | Path) -> None:
    """Comparison report as JSON with stable key names."""
    document = {"format_version": 1, **asdict(report)}
    Path(path).write_text(json.dumps(document, indent=1) + "\n")
