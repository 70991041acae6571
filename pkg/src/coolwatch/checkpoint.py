"""One-document checkpoint: network spec, parameters, seed, standardizer,
threshold.

Floats are serialized through ``repr``, the shortest form that parses back
to the identical double, so save/load round-trips are bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError
from .layers import ParamStore
from .model import Autoencoder, NetworkSpec
from .pipeline import StandardizationParams
from .training import ThresholdSpec

CHECKPOINT_FORMAT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    model: Autoencoder,
    standardizer: StandardizationParams | None = None,
    threshold: ThresholdSpec | None = None,
) -> None:
    document = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "seed": model.seed,
        "network": asdict(model.spec),
        "params": {
            name: {"shape": list(param.shape), "data": param.ravel().tolist()}
            for name, param, _ in model.params.items()
        },
        "standardizer": _standardizer_dict(standardizer),
        "threshold": _threshold_dict(threshold),
    }
    Path(path).write_text(json.dumps(document, indent=1) + "\n")


def load_checkpoint(
    path: str | Path,
) -> tuple[Autoencoder, StandardizationParams | None, ThresholdSpec | None]:
    path = Path(path)
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: not a valid checkpoint document: {err}") from err
    version = document.get("format_version")
    if version != CHECKPOINT_FORMAT_VERSION:
        raise ConfigError(
            f"{path}: unsupported checkpoint format version {version!r}"
        )
    try:
        network = dict(document["network"])
        network["encoder_filters"] = tuple(network["encoder_filters"])
        spec = NetworkSpec(**network)
        store = ParamStore()
        for name, block in document["params"].items():
            values = np.array(block["data"], dtype=np.float64).reshape(block["shape"])
            store.add(name, values)
        model = Autoencoder(spec, seed=int(document["seed"]), params=store)
    except (KeyError, TypeError, ValueError, DimensionError) as err:
        raise ConfigError(f"{path}: malformed checkpoint: {err}") from err
    standardizer = _standardizer_from(document.get("standardizer"))
    threshold = _threshold_from(document.get("threshold"))
    return model, standardizer, threshold


def _standardizer_dict(params: StandardizationParams | None):
    if params is None:
        return None
    return {
        "features": params.features,
        "means": params.means.tolist(),
        "stds": params.stds.tolist(),
        "epsilon": params.epsilon,
    }


def _standardizer_from(raw) -> StandardizationParams | None:
    if raw is None:
        return None
    return StandardizationParams(
        features=list(raw["features"]),
        means=np.array(raw["means"], dtype=np.float64),
        stds=np.array(raw["stds"], dtype=np.float64),
        epsilon=float(raw["epsilon"]),
    )


def _threshold_dict(threshold: ThresholdSpec | None):
    if threshold is None:
        return None
    return {
        "mean_error": threshold.mean_error,
        "std_error": threshold.std_error,
        "value": threshold.value,
        "count": threshold.count,
    }


def _threshold_from(raw) -> ThresholdSpec | None:
    if raw is None:
        return None
    return ThresholdSpec(
        mean_error=float(raw["mean_error"]),
        std_error=float(raw["std_error"]),
        value=float(raw["value"]),
        count=int(raw["count"]),
    )
