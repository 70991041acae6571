"""Command-line pipeline: gen, train, detect, risk, calibrate.

Each subcommand reads file inputs, writes file outputs and exits zero only
when every requested artifact was fully written. All reports are JSON with
a format_version key; identical inputs and seeds give byte-identical
outputs.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import calibration, datagen, detector, risk
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import CoolwatchError, ConfigError
from .model import Autoencoder, NetworkSpec
from .pipeline import (
    chrono_split,
    fit_standardizer,
    ingest_csv,
    make_windows,
    train_row_span,
    write_series_csv,
)
from .training import ThresholdSpec, TrainConfig, calibrate_threshold, train

REPORT_FORMAT_VERSION = 1


# ---------------------------------------------------------------------------
# Run configuration
# ---------------------------------------------------------------------------

@dataclass
class DataConfig:
    features: list[str] = field(default_factory=lambda: [datagen.CONDUCTIVITY, datagen.TEMPERATURE])
    window_stride: int = 1
    train_fraction: float = 0.8
    val_fraction: float = 0.1


@dataclass
class DetectorConfig:
    merge_gap: int = 0
    alarm_level: float = 1.0
    conductivity_feature: str = datagen.CONDUCTIVITY


@dataclass
class CalibrationConfig:
    bins: int = 10


@dataclass
class RunConfig:
    network: NetworkSpec = field(default_factory=NetworkSpec)
    training: TrainConfig = field(default_factory=TrainConfig)
    data: DataConfig = field(default_factory=DataConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    calibration: CalibrationConfig = field(default_factory=CalibrationConfig)
    datagen: datagen.ScenarioConfig = field(default_factory=datagen.ScenarioConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build_section(cls, raw: dict, section: str):
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown key(s) in '{section}': {', '.join(sorted(unknown))}")
    return cls(**raw)


def load_run_config(path: str | Path | None) -> RunConfig:
    """RunConfig from a JSON file; missing sections fall back to defaults."""
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: not valid JSON: {err}") from err
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    known = {"network", "training", "data", "detector", "calibration", "datagen"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"{path}: unknown section(s): {', '.join(sorted(unknown))}")

    network_raw = dict(raw.get("network", {}))
    if "encoder_filters" in network_raw:
        network_raw["encoder_filters"] = tuple(network_raw["encoder_filters"])
    datagen_raw = dict(raw.get("datagen", {}))
    injections = [
        datagen.Injection(**inj) for inj in datagen_raw.pop("injections", [])
    ]
    scenario = _build_section(datagen.ScenarioConfig, {**datagen_raw, "injections": injections}, "datagen")
    try:
        return RunConfig(
            network=_build_section(NetworkSpec, network_raw, "network"),
            training=_build_section(TrainConfig, dict(raw.get("training", {})), "training"),
            data=_build_section(DataConfig, dict(raw.get("data", {})), "data"),
            detector=_build_section(DetectorConfig, dict(raw.get("detector", {})), "detector"),
            calibration=_build_section(CalibrationConfig, dict(raw.get("calibration", {})), "calibration"),
            datagen=scenario,
        )
    except TypeError as err:
        raise ConfigError(f"{path}: {err}") from err


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        config.training = dataclasses.replace(config.training, seed=args.seed)
        config.datagen.seed = args.seed
    if getattr(args, "no_attention", False):
        config.network = dataclasses.replace(config.network, attention_enabled=False)
        config.training = dataclasses.replace(config.training, attention_enabled=False)
    if getattr(args, "bins", None) is not None:
        config.calibration = dataclasses.replace(config.calibration, bins=args.bins)
    if getattr(args, "merge_gap", None) is not None:
        config.detector = dataclasses.replace(config.detector, merge_gap=args.merge_gap)
    return config


def _write_json(path: str | Path, document: dict) -> None:
    Path(path).write_text(json.dumps(document, indent=1) + "\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_run_config(args.config), args)
    frame, labels = datagen.generate(config.datagen)
    write_series_csv(frame, args.out)
    datagen.write_labels_csv(labels, args.labels_out)
    print(f"wrote {frame.n_rows} samples to {args.out} ({int(labels.sum())} anomalous)")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_run_config(args.config), args)
    spec = config.network
    frame = ingest_csv(args.data, config.data.features)

    span = train_row_span(
        frame.n_rows, spec.input_timesteps, config.data.window_stride,
        config.data.train_fraction,
    )
    standardizer = fit_standardizer(frame.slice(0, span), config.data.features)
    windows = make_windows(
        standardizer.transform_frame(frame), spec.input_timesteps, config.data.window_stride
    )
    train_set, val_set, test_set = chrono_split(
        windows, config.data.train_fraction, config.data.val_fraction
    )

    model = Autoencoder(spec, seed=config.training.seed)
    report = train(model, train_set, val_set, config.training)
    threshold = calibrate_threshold(model, train_set)
    report.threshold = threshold.value

    save_checkpoint(args.checkpoint, model, standardizer, threshold)
    _write_json(
        args.report,
        {
            "format_version": REPORT_FORMAT_VERSION,
            "train_mae": report.train_mae,
            "val_mae": report.val_mae,
            "stopped_epoch": report.stopped_epoch,
            "best_epoch": report.best_epoch,
            "threshold": report.threshold,
            "wall_time_s": report.wall_time_s,
            "windows": {"train": len(train_set), "val": len(val_set), "test": len(test_set)},
            "attention_enabled": spec.attention_enabled,
        },
    )
    print(
        f"trained {report.stopped_epoch} epochs (best {report.best_epoch}), "
        f"threshold {threshold.value:.6g}; checkpoint at {args.checkpoint}"
    )
    return 0


def cmd_detect(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_run_config(args.config), args)
    model, standardizer, threshold = load_checkpoint(args.checkpoint)
    if standardizer is None or threshold is None:
        raise ConfigError(
            f"{args.checkpoint}: checkpoint lacks standardizer or threshold; "
            "run the train command first"
        )
    frame = ingest_csv(args.data, standardizer.features)
    windows = make_windows(
        standardizer.transform_frame(frame),
        model.spec.input_timesteps,
        config.data.window_stride,
    )
    scored = detector.score(windows, model, threshold)
    rules = detector.CategoryRules(
        conductivity_feature=config.detector.conductivity_feature,
        alarm_level=config.detector.alarm_level,
    )
    events = [
        detector.attach_context(event, frame, rules)
        for event in detector.group_events(scored, config.detector.merge_gap)
    ]
    _write_json(
        args.report,
        {
            "format_version": REPORT_FORMAT_VERSION,
            "threshold": {
                "mean_error": threshold.mean_error,
                "std_error": threshold.std_error,
                "value": threshold.value,
                "count": threshold.count,
            },
            "events": [
                {
                    "id": i,
                    "start": event.start,
                    "end": event.end,
                    "start_time": event.start_time.isoformat(),
                    "end_time": event.end_time.isoformat(),
                    "duration": event.duration,
                    "peak_error": event.peak_error,
                    "category": event.category,
                }
                for i, event in enumerate(events)
            ],
            "windows": [
                {"origin": s.origin, "error": s.error, "anomalous": s.is_anomalous}
                for s in scored
            ],
        },
    )
    print(f"scored {len(scored)} windows; {len(events)} event(s) written to {args.report}")
    return 0


def _load_anomaly_report(path: str | Path) -> dict:
    try:
        report = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as err:
        raise ConfigError(f"{path}: cannot read anomaly report: {err}") from err
    if report.get("format_version") != REPORT_FORMAT_VERSION:
        raise ConfigError(f"{path}: unsupported report format")
    return report


def cmd_risk(args: argparse.Namespace) -> int:
    report = _load_anomaly_report(args.report)
    events = [
        detector.AnomalyEvent(
            start=e["start"], end=e["end"], duration=e["duration"],
            peak_error=e["peak_error"], category=e["category"],
        )
        for e in report["events"]
    ]
    stats = risk.aggregate_events(events, span=args.span)
    if args.band_table:
        table, policy = risk.load_band_config(args.band_table)
    else:
        table, policy = risk.DEFAULT_BAND_TABLE, risk.DEFAULT_RECOMMENDATIONS

    assessments = []
    for d in args.detection:
        score = risk.FmecaScore(args.severity, args.probability, d)
        assessments.append(risk.assess(score, stats, table, policy))
    _write_json(
        args.out,
        {
            "format_version": REPORT_FORMAT_VERSION,
            "events": {
                "high_spike": stats.high_spike,
                "negative_glitch": stats.negative_glitch,
                "other": stats.other,
                "total": stats.total,
                "span": stats.span,
            },
            "assessments": [
                {
                    "severity": a.score.severity,
                    "probability": a.score.probability,
                    "detection": a.score.detection,
                    "rpr": a.rpr,
                    "band": a.band,
                    "recommendation": a.recommendation,
                }
                for a in assessments
            ],
        },
    )
    for a in assessments:
        print(f"S={a.score.severity} P={a.score.probability} D={a.score.detection} "
              f"-> RPR {a.rpr} ({a.band}): {a.recommendation}")
    return 0


def cmd_calibrate(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_run_config(args.config), args)
    report = _load_anomaly_report(args.report)
    labels = datagen.read_labels_csv(args.labels)
    thr = report.get("threshold")
    if not thr:
        raise ConfigError(f"{args.report}: report carries no threshold block")
    threshold = ThresholdSpec(
        mean_error=thr["mean_error"], std_error=thr["std_error"],
        value=thr["value"], count=thr["count"],
    )
    predictions = []
    for window in report["windows"]:
        origin = window["origin"]
        if origin >= len(labels):
            raise ConfigError(
                f"window origin {origin} outside the labels file ({len(labels)} rows)"
            )
        predictions.append(
            calibration.ProbabilisticPrediction(
                probability=calibration.error_to_probability(window["error"], threshold),
                label=int(labels[origin]),
            )
        )
    result = calibration.ece(predictions, config.calibration.bins)
    _write_json(
        args.out,
        {
            "format_version": REPORT_FORMAT_VERSION,
            "ece": result.ece,
            "total": result.total,
            "bins": [
                {
                    "lower": b.lower,
                    "upper": b.upper,
                    "count": b.count,
                    "mean_confidence": b.mean_confidence,
                    "observed_frequency": b.observed_frequency,
                }
                for b in result.bins
            ],
            "reliability_points": [
                {"confidence": c, "frequency": f, "count": n}
                for c, f, n in calibration.reliability_points(result)
            ],
        },
    )
    print(f"ece {result.ece:.6g} over {result.total} windows -> {args.out}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coolwatch",
        description="Train, detect, rank and calibrate on cooling-system series",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic scenario CSV plus labels")
    gen.add_argument("--config", default=None, help="JSON run configuration")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out", required=True, help="series CSV output path")
    gen.add_argument("--labels-out", required=True, help="labels CSV output path")
    gen.set_defaults(func=cmd_gen)

    tr = sub.add_parser("train", help="train the autoencoder and calibrate the threshold")
    tr.add_argument("--config", default=None)
    tr.add_argument("--data", required=True, help="input series CSV")
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--no-attention", action="store_true", help="train the plain variant")
    tr.add_argument("--checkpoint", required=True, help="checkpoint output path")
    tr.add_argument("--report", required=True, help="training report output path")
    tr.set_defaults(func=cmd_train)

    det = sub.add_parser("detect", help="score windows and group anomaly events")
    det.add_argument("--config", default=None)
    det.add_argument("--data", required=True)
    det.add_argument("--checkpoint", required=True)
    det.add_argument("--merge-gap", type=int, default=None)
    det.add_argument("--report", required=True, help="anomaly report output path")
    det.set_defaults(func=cmd_detect)

    rk = sub.add_parser("risk", help="rank risk from an anomaly report and grades")
    rk.add_argument("--report", required=True, help="anomaly report from detect")
    rk.add_argument("--severity", type=int, required=True)
    rk.add_argument("--probability", type=int, required=True)
    rk.add_argument(
        "--detection", type=int, nargs="+", required=True,
        help="one or more detection grades; each yields its own assessment",
    )
    rk.add_argument("--span", default="analyzed span", help="label for the covered span")
    rk.add_argument("--band-table", default=None, help="JSON band table and policy")
    rk.add_argument("--out", required=True, help="risk report output path")
    rk.set_defaults(func=cmd_risk)

    cal = sub.add_parser("calibrate", help="calibration error of the detector's probabilities")
    cal.add_argument("--config", default=None)
    cal.add_argument("--report", required=True, help="anomaly report from detect")
    cal.add_argument("--labels", required=True, help="ground-truth labels CSV")
    cal.add_argument("--bins", type=int, default=None)
    cal.add_argument("--out", required=True, help="calibration report output path")
    cal.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CoolwatchError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
