"""On-disk formats: dataset CSVs, the model JSON file, histories, manifests.

Floats are written with ``repr``, the shortest representation that parses
back to the identical double, so every file round-trips bit for bit and
deterministic runs produce byte-identical outputs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .nn import AutoencoderParams, NetConfig
from .preprocess import ScalerParams, TimeSeriesSet
from .training import HistoryRow, TrainedModel

MODEL_FORMAT_VERSION = 1
TIME_COLUMN = "time_s"
_REL_TIME_TOL = 1e-9


class FormatError(ValueError):
    """A file does not match the expected format."""


def _fmt(x: float) -> str:
    return repr(float(x))


def write_dataset_csv(path: str | Path, data: TimeSeriesSet) -> None:
    times = data.times()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([TIME_COLUMN, *data.feature_names])
        for k in range(data.n_samples):
            writer.writerow([_fmt(times[k]), *(_fmt(v) for v in data.values[k])])


def read_dataset_csv(path: str | Path) -> TimeSeriesSet:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if not header or header[0] != TIME_COLUMN:
            raise FormatError(
                f"{path}: first column must be {TIME_COLUMN!r}, got {header[:1]}"
            )
        names = tuple(header[1:])
        if not names:
            raise FormatError(f"{path}: no feature columns")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                )
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    if len(rows) < 2:
        raise FormatError(f"{path}: need at least two samples")
    arr = np.array(rows)
    times, values = arr[:, 0], arr[:, 1:]
    dt = times[1] - times[0]
    if not dt > 0:
        raise FormatError(f"{path}: time column must be strictly increasing")
    gaps = np.diff(times)
    if np.any(np.abs(gaps - dt) > _REL_TIME_TOL * abs(dt)):
        worst = int(np.argmax(np.abs(gaps - dt)))
        raise FormatError(
            f"{path}: time column not equidistant near row {worst + 2} "
            f"(gap {gaps[worst]!r} vs dt {dt!r})"
        )
    return TimeSeriesSet(names, float(times[0]), float(dt), values)


def write_history_csv(path: str | Path, rows: Iterable[HistoryRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "dataset_index", "loss"])
        for row in rows:
            writer.writerow([row.epoch, row.dataset_index, _fmt(row.loss)])


def write_loss_curve_csv(path: str | Path, losses: Sequence[float]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(losses):
            writer.writerow([epoch, _fmt(loss)])


def _array_to_json(arr: np.ndarray) -> dict:
    return {"shape": list(arr.shape), "data": [float(v) for v in arr.ravel()]}


def _array_from_json(obj: dict) -> np.ndarray:
    arr = np.array(obj["data"], dtype=np.float64)
    return arr.reshape(obj["shape"])


def save_model(path: str | Path, model: TrainedModel) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "net": {
            "n_features": model.net.n_features,
            "seq_len": model.net.seq_len,
            "lstm_hidden": model.net.lstm_hidden,
            "latent_dim": model.net.latent_dim,
        },
        "feature_names": list(model.feature_names),
        "scaler": {
            "mins": [float(v) for v in model.scaler.mins],
            "maxs": [float(v) for v in model.scaler.maxs],
            "constant": [bool(v) for v in model.scaler.constant],
        },
        "params": {
            name: _array_to_json(arr) for name, arr in model.params.as_dict().items()
        },
        "training": {
            "seed": model.seed,
            "epochs": model.epochs,
            "learning_rate": model.learning_rate,
            "final_losses": [float(v) for v in model.final_losses],
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_model(path: str | Path) -> TrainedModel:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON: {exc}") from None
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise FormatError(
            f"{path}: format_version {version!r} unsupported "
            f"(expected {MODEL_FORMAT_VERSION})"
        )
    try:
        net = NetConfig(**doc["net"])
        names = tuple(doc["feature_names"])
        scaler = ScalerParams(
            feature_names=names,
            mins=np.array(doc["scaler"]["mins"], dtype=np.float64),
            maxs=np.array(doc["scaler"]["maxs"], dtype=np.float64),
            constant=np.array(doc["scaler"]["constant"], dtype=bool),
        )
        params = AutoencoderParams.from_dict(
            {name: _array_from_json(obj) for name, obj in doc["params"].items()}
        )
        training = doc["training"]
        model = TrainedModel(
            params=params,
            scaler=scaler,
            net=net,
            feature_names=names,
            seed=int(training["seed"]),
            epochs=int(training["epochs"]),
            learning_rate=float(training["learning_rate"]),
            final_losses=tuple(float(v) for v in training["final_losses"]),
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: malformed model file: {exc!r}") from None
    expected = {
        "encoder.wx": (4 * net.lstm_hidden, net.n_features),
        "encoder.wh": (4 * net.lstm_hidden, net.lstm_hidden),
        "decoder.wx": (4 * net.lstm_hidden, net.latent_dim),
        "latent.weight": (net.latent_dim, net.lstm_hidden),
        "readout.weight": (net.n_features, net.lstm_hidden),
    }
    actual = model.params.as_dict()
    for name, shape in expected.items():
        if actual[name].shape != shape:
            raise FormatError(
                f"{path}: {name} has shape {actual[name].shape}, expected {shape}"
            )
    return model


def write_manifest(path: str | Path, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")


def read_manifest(path: str | Path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def write_spectrum_csv(path: str | Path, freqs: np.ndarray,
                       mags: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency_hz", "magnitude"])
        for f, m in zip(freqs, mags):
            writer.writerow([_fmt(f), _fmt(m)])
