"""Recover completely missing feature columns with a frozen autoencoder.

The trained network and scaler stay untouched. Each missing feature
becomes a length-T optimization variable (one shared value per time step,
no matter how many windows overlap it). Every epoch rebuilds a tape that

  1. assembles the full scaled series from available columns (constants)
     and the current missing-column estimates (gradient leaves),
  2. slices it into all stride-1 windows differentiably (window row t is
     just rows [t, t + num_windows) of the series),
  3. runs the batched autoencoder forward, and
  4. scores only the available feature columns of input vs output.

Adam then updates the missing columns alone. Because window extraction is
a differentiable slice, a sample covered by several windows automatically
accumulates all their gradient contributions.

Afterwards the optimized series is pushed through the network once more;
the network's own output for the missing columns (merged across windows
by overlap mean) is usually smoother than the raw optimized estimate and
is reported alongside it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import preprocess
from .autodiff import Tape
from .nn import forward_steps, lift_params
from .optim import Adam, reduced_loss
from .training import DivergenceError, TrainedModel, reconstruct_series

DEFAULT_EPOCHS_ONE_MISSING = 300
DEFAULT_EPOCHS_MULTI_MISSING = 3000

_INIT_MODES = ("zeros", "midpoint")


@dataclass(frozen=True)
class ReconstructionSpec:
    """What to reconstruct and how hard to try.

    ``epochs=None`` resolves to 300 for a single missing feature and 3000
    when several are missing at once. ``weights`` scales the loss term of
    individual available features (default 1.0 each), which lets a user
    emphasize features known to matter. ``init`` places the initial guess
    in scaled space: "zeros" or "midpoint" (0.5).
    """

    missing: tuple[str, ...]
    epochs: int | None = None
    learning_rate: float = 0.005
    init: str = "zeros"
    weights: Mapping[str, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "missing", tuple(self.missing))
        if not self.missing:
            raise ValueError("at least one missing feature is required")
        if len(set(self.missing)) != len(self.missing):
            raise ValueError(f"duplicate missing features: {self.missing}")
        if self.epochs is not None and self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.init not in _INIT_MODES:
            raise ValueError(f"init must be one of {_INIT_MODES}, got {self.init!r}")

    def resolved_epochs(self) -> int:
        if self.epochs is not None:
            return self.epochs
        if len(self.missing) == 1:
            return DEFAULT_EPOCHS_ONE_MISSING
        return DEFAULT_EPOCHS_MULTI_MISSING


@dataclass
class ReconstructionResult:
    x_miss: dict[str, np.ndarray]      # optimized estimate, data units, [T]
    x_hat_miss: dict[str, np.ndarray]  # network output for the same columns
    loss_history: tuple[float, ...]    # loss before each update, len == epochs
    initial_loss: float
    final_loss: float


def _validate(model: TrainedModel, data: preprocess.TimeSeriesSet,
              spec: ReconstructionSpec) -> list[str]:
    names = list(model.feature_names)
    for m in spec.missing:
        if m not in names:
            raise KeyError(f"unknown missing feature {m!r}; model has {names}")
    available = [n for n in names if n not in spec.missing]
    if not available:
        raise ValueError("all features marked missing; nothing to fit against")
    for n in available:
        if n not in data.feature_names:
            raise ValueError(f"data lacks required available feature {n!r}")
    if spec.weights is not None:
        unknown = set(spec.weights) - set(available)
        if unknown:
            raise ValueError(
                f"weights given for non-available features: {sorted(unknown)}"
            )
    if data.n_samples < model.net.seq_len:
        raise ValueError(
            f"{data.n_samples} samples is shorter than seq_len {model.net.seq_len}"
        )
    return available


def _build_loss(tape: Tape, net, model: TrainedModel,
                avail_cols: Mapping[str, np.ndarray],
                miss_leaves: Mapping[str, "object"],
                weights: Sequence[float], avail_idx: Sequence[int]):
    """Assemble series, window it, forward it, and score available columns."""
    names = model.feature_names
    seq_len = model.net.seq_len
    T = next(iter(avail_cols.values())).shape[0]
    num_windows = T - seq_len + 1

    columns = []
    for name in names:
        if name in miss_leaves:
            columns.append(miss_leaves[name])
        else:
            columns.append(tape.leaf(avail_cols[name][:, None]))
    series = tape.concat_cols(columns)

    xs = [tape.slice_rows(series, t, t + num_windows) for t in range(seq_len)]
    detail = forward_steps(tape, net, xs)
    target = tape.concat_rows(xs)
    output = tape.concat_rows(detail.outputs)
    target_avail = tape.slice_cols(target, avail_idx)
    output_avail = tape.slice_cols(output, avail_idx)
    return reduced_loss(tape, target_avail, output_avail, weights)


def reconstruct(model: TrainedModel, data: preprocess.TimeSeriesSet,
                spec: ReconstructionSpec) -> ReconstructionResult:
    """Optimize the missing columns of ``data`` against the frozen model.

    ``data`` must contain every available feature; columns named in
    ``spec.missing`` may be absent and are ignored when present. Returns
    estimates in data units along with the loss trajectory.
    """
    available = _validate(model, data, spec)
    names = model.feature_names
    avail_idx = tuple(i for i, n in enumerate(names) if n in available)
    weights = [
        float(spec.weights.get(n, 1.0)) if spec.weights else 1.0 for n in available
    ]
    epochs = spec.resolved_epochs()

    avail_cols = {
        n: model.scaler.transform_columns(data.column(n)[:, None], [n]).ravel()
        for n in available
    }
    T = data.n_samples
    init_value = 0.0 if spec.init == "zeros" else 0.5
    estimates = {m: np.full(T, init_value) for m in spec.missing}

    adam = Adam(spec.learning_rate)
    history: list[float] = []

    def build(tape: Tape, current: Mapping[str, np.ndarray]):
        net = lift_params(tape, model.params, requires_grad=False)
        leaves = {
            m: tape.leaf(current[m][:, None], requires_grad=True)
            for m in spec.missing
        }
        loss = _build_loss(tape, net, model, avail_cols, leaves, weights, avail_idx)
        return loss, leaves

    for epoch in range(epochs):
        tape = Tape()
        loss, leaves = build(tape, estimates)
        value = loss.item()
        if not np.isfinite(value):
            raise DivergenceError(f"non-finite loss in epoch {epoch}")
        grads = tape.backward(loss)
        named_grads = {m: grads[leaf].ravel() for m, leaf in leaves.items()}
        estimates = adam.step(estimates, named_grads)
        history.append(value)

    final_tape = Tape()
    final_loss = build(final_tape, estimates)[0].item()
    initial_loss = history[0] if history else final_loss

    x_miss = {
        m: model.scaler.inverse_transform_columns(
            estimates[m][:, None], [m]
        ).ravel()
        for m in spec.missing
    }

    full_scaled = np.empty((T, len(names)))
    for j, name in enumerate(names):
        full_scaled[:, j] = estimates[name] if name in estimates else avail_cols[name]
    recon_scaled = reconstruct_series(model, full_scaled)
    x_hat_miss = {
        m: model.scaler.inverse_transform_columns(
            recon_scaled[:, names.index(m)][:, None], [m]
        ).ravel()
        for m in spec.missing
    }

    return ReconstructionResult(
        x_miss=x_miss,
        x_hat_miss=x_hat_miss,
        loss_history=tuple(history),
        initial_loss=initial_loss,
        final_loss=final_loss,
    )


def refine(model: TrainedModel, series: preprocess.TimeSeriesSet,
           missing: Sequence[str]) -> dict[str, np.ndarray]:
    """Network output for chosen columns of a complete series, data units.

    One forward pass over all windows, merged by overlap mean. Useful to
    re-read the autoencoder's opinion of an already assembled series.
    """
    for m in missing:
        if m not in model.feature_names:
            raise KeyError(f"unknown feature {m!r}; model has {model.feature_names}")
    scaled = preprocess.transform(model.scaler, series)
    recon_scaled = reconstruct_series(model, scaled.values)
    names = model.feature_names
    return {
        m: model.scaler.inverse_transform_columns(
            recon_scaled[:, names.index(m)][:, None], [m]
        ).ravel()
        for m in missing
    }
