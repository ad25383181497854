"""Dataset container, min-max scaling, and sliding-window handling.

Scaling is fitted once over all training sets (global per-feature extrema)
and reused verbatim for any later data; application data never refits.
Windows are stride-1 and dense; ``overlap_mean`` merges per-window outputs
back to series length by averaging every window cell that covers a sample,
which is the exact inverse of ``sliding_windows`` when windows agree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass(frozen=True)
class TimeSeriesSet:
    """Equidistantly sampled multivariate series, one column per feature."""

    feature_names: tuple[str, ...]
    t0: float
    dt: float
    values: np.ndarray  # [n_samples, n_features] float64

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        if values.ndim != 2:
            raise ValueError(f"values must be 2-D, got shape {values.shape}")
        if len(self.feature_names) != values.shape[1]:
            raise ValueError(
                f"{len(self.feature_names)} names for {values.shape[1]} columns"
            )
        if len(set(self.feature_names)) != len(self.feature_names):
            raise ValueError(f"duplicate feature names: {self.feature_names}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not np.isfinite(values).all():
            raise ValueError("values contain NaN or Inf")

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n_samples)

    def column(self, name: str) -> np.ndarray:
        if name not in self.feature_names:
            raise KeyError(f"unknown feature {name!r}")
        return self.values[:, self.feature_names.index(name)]

    def replace_values(self, values: np.ndarray) -> "TimeSeriesSet":
        return TimeSeriesSet(self.feature_names, self.t0, self.dt, values)


@dataclass(frozen=True)
class ScalerParams:
    """Per-feature min-max mapping onto [0, 1].

    A feature that was constant during the fit has a degenerate range; it
    maps to 0.5 and is flagged, and the inverse restores the constant.
    """

    feature_names: tuple[str, ...]
    mins: np.ndarray
    maxs: np.ndarray
    constant: np.ndarray  # bool per feature

    def _indices(self, names: Sequence[str]) -> list[int]:
        out = []
        for name in names:
            if name not in self.feature_names:
                raise KeyError(f"feature {name!r} not in {self.feature_names}")
            out.append(self.feature_names.index(name))
        return out

    def transform_columns(self, values: np.ndarray, names: Sequence[str]) -> np.ndarray:
        idx = self._indices(names)
        values = np.asarray(values, dtype=np.float64)
        mins, maxs = self.mins[idx], self.maxs[idx]
        span = np.where(self.constant[idx], 1.0, maxs - mins)
        scaled = (values - mins) / span
        return np.where(self.constant[idx], 0.5, scaled)

    def inverse_transform_columns(self, values: np.ndarray,
                                  names: Sequence[str]) -> np.ndarray:
        idx = self._indices(names)
        values = np.asarray(values, dtype=np.float64)
        mins, maxs = self.mins[idx], self.maxs[idx]
        restored = values * (maxs - mins) + mins
        return np.where(self.constant[idx], mins, restored)


def fit_scaler(datasets: Iterable[TimeSeriesSet]) -> ScalerParams:
    """Global per-feature extrema over every provided set."""
    datasets = list(datasets)
    if not datasets:
        raise ValueError("fit_scaler needs at least one dataset")
    names = datasets[0].feature_names
    for d in datasets[1:]:
        if d.feature_names != names:
            raise ValueError(f"feature names differ: {names} vs {d.feature_names}")
    mins = np.min([d.values.min(axis=0) for d in datasets], axis=0)
    maxs = np.max([d.values.max(axis=0) for d in datasets], axis=0)
    return ScalerParams(names, mins, maxs, constant=(mins == maxs))


def transform(scaler: ScalerParams, data: TimeSeriesSet) -> TimeSeriesSet:
    if data.feature_names != scaler.feature_names:
        raise ValueError(
            f"feature names differ: {scaler.feature_names} vs {data.feature_names}"
        )
    return data.replace_values(
        scaler.transform_columns(data.values, data.feature_names)
    )


def inverse_transform(scaler: ScalerParams, data: TimeSeriesSet) -> TimeSeriesSet:
    if data.feature_names != scaler.feature_names:
        raise ValueError(
            f"feature names differ: {scaler.feature_names} vs {data.feature_names}"
        )
    return data.replace_values(
        scaler.inverse_transform_columns(data.values, data.feature_names)
    )


@dataclass(frozen=True)
class WindowBatch:
    """All stride-1 windows of one series, with its framing metadata."""

    windows: np.ndarray  # [num_windows, seq_len, n_features]
    source_length: int
    feature_names: tuple[str, ...]
    t0: float
    dt: float
    stride: int = 1

    @property
    def num_windows(self) -> int:
        return self.windows.shape[0]

    @property
    def seq_len(self) -> int:
        return self.windows.shape[1]

    def step_inputs(self) -> list[np.ndarray]:
        """Per-step matrices: element ``t`` is ``windows[:, t, :]``."""
        return [np.ascontiguousarray(self.windows[:, t, :])
                for t in range(self.seq_len)]


def window_stack(values: np.ndarray, seq_len: int) -> np.ndarray:
    """Stride-1 windows of a [T, n] array as a [T-s+1, s, n] stack."""
    T = values.shape[0]
    if not 1 <= seq_len <= T:
        raise ValueError(f"seq_len {seq_len} invalid for {T} samples")
    return np.stack([values[i:i + seq_len] for i in range(T - seq_len + 1)])


def sliding_windows(data: TimeSeriesSet, seq_len: int) -> WindowBatch:
    return WindowBatch(
        windows=window_stack(data.values, seq_len),
        source_length=data.n_samples,
        feature_names=data.feature_names,
        t0=data.t0,
        dt=data.dt,
    )


def coverage_counts(source_length: int, seq_len: int) -> np.ndarray:
    """How many stride-1 windows cover each sample index."""
    num_windows = source_length - seq_len + 1
    counts = np.zeros(source_length, dtype=np.int64)
    for t in range(seq_len):
        counts[t:t + num_windows] += 1
    return counts


def overlap_mean_values(windows: np.ndarray, source_length: int) -> np.ndarray:
    """Average every window cell covering each sample; inverse of stacking."""
    num_windows, seq_len = windows.shape[0], windows.shape[1]
    if num_windows != source_length - seq_len + 1:
        raise ValueError(
            f"{num_windows} windows inconsistent with length {source_length} "
            f"and seq_len {seq_len}"
        )
    total = np.zeros((source_length, windows.shape[2]))
    for t in range(seq_len):
        total[t:t + num_windows] += windows[:, t, :]
    counts = coverage_counts(source_length, seq_len)
    return total / counts[:, None]


def overlap_center_values(windows: np.ndarray, source_length: int) -> np.ndarray:
    """Take one representative cell per sample, preferring window centers.

    Sample ``i`` is read from window ``i - seq_len//2`` at its center
    position when that window exists, clamping to the first/last window
    near the edges. Exposed as an alternative merge rule; the mean is the
    default everywhere else.
    """
    num_windows, seq_len, n = windows.shape
    if num_windows != source_length - seq_len + 1:
        raise ValueError(
            f"{num_windows} windows inconsistent with length {source_length} "
            f"and seq_len {seq_len}"
        )
    out = np.empty((source_length, n))
    center = seq_len // 2
    for i in range(source_length):
        w = min(max(i - center, 0), num_windows - 1)
        out[i] = windows[w, i - w]
    return out


def overlap_mean(batch: WindowBatch) -> TimeSeriesSet:
    values = overlap_mean_values(batch.windows, batch.source_length)
    return TimeSeriesSet(batch.feature_names, batch.t0, batch.dt, values)


def resample_equidistant(times: np.ndarray, values: np.ndarray,
                         dt: float) -> tuple[float, np.ndarray]:
    """Linear interpolation of irregularly sampled columns onto a fixed grid.

    Returns the grid origin (first input time) and the resampled [T, n]
    array, where the grid covers the input span at spacing ``dt``.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if times.ndim != 1 or values.shape[0] != times.shape[0]:
        raise ValueError("times must be 1-D and aligned with values rows")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    n_out = int(np.floor((times[-1] - times[0]) / dt)) + 1
    grid = times[0] + dt * np.arange(n_out)
    out = np.column_stack(
        [np.interp(grid, times, values[:, j]) for j in range(values.shape[1])]
    )
    return float(times[0]), out
