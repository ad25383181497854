"""Losses on the tape and the Adam optimizer.

``reduced_loss`` is the objective used when some feature columns are
unavailable: it sums per-feature mean-square errors over the remaining
columns only, optionally weighted, so values in the excluded columns can
never influence it.
"""

from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from .autodiff import Tape, Var


def mse(tape: Tape, a: Var, b: Var) -> Var:
    """Mean over all elements of the squared difference."""
    return tape.mean_sq_diff(a, b)


def reduced_loss(tape: Tape, target: Var, output: Var,
                 weights: Sequence[float] | None = None) -> Var:
    """Sum of per-column mean-square errors between two [M, k] tensors.

    Both tensors must already be restricted to the available feature
    columns (same column order). ``weights`` scales each column's term;
    omitted weights default to 1. With unit weights and k columns this is
    k times the pooled MSE.
    """
    if len(target.shape) != 2 or target.shape != output.shape:
        raise ValueError(
            f"reduced_loss needs matching 2-D tensors, got {target.shape} "
            f"and {output.shape}"
        )
    k = target.shape[1]
    if k < 1:
        raise ValueError("reduced_loss needs at least one column")
    if weights is not None and len(weights) != k:
        raise ValueError(f"{len(weights)} weights for {k} columns")

    total = None
    for j in range(k):
        term = tape.mean_sq_diff(
            tape.slice_cols(target, (j,)), tape.slice_cols(output, (j,))
        )
        if weights is not None and weights[j] != 1.0:
            term = tape.scale(term, float(weights[j]))
        total = term if total is None else tape.add(total, term)
    return total


class Adam:
    """Adam with bias correction; state is owned by one optimization run.

    Update per array: ``m = b1*m + (1-b1)*g``, ``v = b2*v + (1-b2)*g*g``,
    then ``x -= lr * m_hat / (sqrt(v_hat) + eps)`` with the usual
    ``1 - b^t`` corrections. ``step`` returns fresh arrays and never
    mutates its inputs, so callers control exactly which values change.
    """

    def __init__(self, learning_rate: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        if not learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ValueError(f"betas must lie in [0, 1), got {beta1}, {beta2}")
        if not eps > 0:
            raise ValueError(f"eps must be positive, got {eps}")
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, values: Mapping[str, np.ndarray],
             grads: Mapping[str, np.ndarray]) -> dict[str, np.ndarray]:
        """One update over every named array; requires a grad per value."""
        missing = set(values) - set(grads)
        if missing:
            raise KeyError(f"no gradient for: {sorted(missing)}")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        out: dict[str, np.ndarray] = {}
        for name in values:
            g = grads[name]
            x = values[name]
            if g.shape != x.shape:
                raise ValueError(
                    f"{name}: grad shape {g.shape} != value shape {x.shape}"
                )
            m = self._m.get(name)
            v = self._v.get(name)
            if m is None:
                m = np.zeros_like(x)
                v = np.zeros_like(x)
            m = self.beta1 * m + (1.0 - self.beta1) * g
            v = self.beta2 * v + (1.0 - self.beta2) * (g * g)
            self._m[name] = m
            self._v[name] = v
            out[name] = x - self.learning_rate * (m / c1) / (np.sqrt(v / c2) + self.eps)
        return out
