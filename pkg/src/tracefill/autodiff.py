"""Tape-based reverse-mode automatic differentiation over float64 arrays.

A :class:`Tape` records operations eagerly: every node caches its forward
value, and :meth:`Tape.backward` walks the recording once in reverse to
produce exact gradients of a scalar loss with respect to every leaf created
with ``requires_grad=True``. When a leaf feeds several consumers its
gradient contributions accumulate by summation.

Values are dense numpy float64 arrays, 1-D or 2-D (scalars are shape
``(1,)``). Shapes are validated per operation and mismatches raise
:class:`ShapeError` naming both shapes. The op set is closed; adding an op
means adding a forward rule, a derivative rule, and an entry in the
finite-difference check table below (``run_op_checks`` sweeps the table).

Shape rules per op:

==================  ==========================================  ============
op                  inputs                                      output
==================  ==========================================  ============
add, sub, mul       two tensors of identical shape              same shape
matmul              ``[m, k]`` and ``[k, r]``                   ``[m, r]``
scale               tensor, constant factor                     same shape
tanh, sigmoid       one tensor                                  same shape
transpose           ``[m, n]``                                  ``[n, m]``
add_bias            ``[m, n]`` and row vector ``[n]``           ``[m, n]``
concat_rows         2-D tensors with equal column counts        rows stacked
concat_cols         2-D tensors with equal row counts           cols stacked
slice_cols          ``[m, n]``, distinct column indices         ``[m, k]``
slice_rows          ``[m, n]``, contiguous row range            ``[k, n]``
sum                 one tensor                                  ``[1]``
mean_sq_diff        two tensors of identical shape              ``[1]``
==================  ==========================================  ============

Backward itself is not recorded, so higher-order derivatives are out of
scope. Node values should be treated as read-only by callers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

Array = np.ndarray


class ShapeError(ValueError):
    """Operand shapes do not conform to the operation's shape rule."""


class NonFiniteError(FloatingPointError):
    """A value that must be finite contains NaN or Inf."""


def as_tensor(value) -> Array:
    """Coerce to a float64 array of rank 1 or 2 (scalars become shape (1,))."""
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim > 2:
        raise ShapeError(f"tensors are 1-D or 2-D, got shape {arr.shape}")
    return arr


class Var:
    """Handle to one tape node. Compared by identity; create via Tape methods."""

    __slots__ = ("tape", "id", "shape")

    def __init__(self, tape: "Tape", node_id: int, shape: tuple[int, ...]):
        self.tape = tape
        self.id = node_id
        self.shape = shape

    @property
    def value(self) -> Array:
        """Cached forward value (read-only by convention)."""
        return self.tape._nodes[self.id].value

    def item(self) -> float:
        v = self.value
        if v.size != 1:
            raise ShapeError(f"item() needs a scalar, got shape {v.shape}")
        return float(v.reshape(()))

    def __add__(self, other: "Var") -> "Var":
        return self.tape.add(self, other)

    def __sub__(self, other: "Var") -> "Var":
        return self.tape.sub(self, other)

    def __mul__(self, other: "Var") -> "Var":
        return self.tape.mul(self, other)

    def __matmul__(self, other: "Var") -> "Var":
        return self.tape.matmul(self, other)

    def __repr__(self) -> str:
        return f"Var(id={self.id}, shape={self.shape})"


class _Node:
    __slots__ = ("op", "inputs", "kwargs", "value", "needs_grad")

    def __init__(self, op, inputs, kwargs, value, needs_grad):
        self.op = op
        self.inputs = inputs
        self.kwargs = kwargs
        self.value = value
        self.needs_grad = needs_grad


@dataclass(frozen=True)
class _OpRule:
    # forward(values, kwargs) -> output array; raises ShapeError on mismatch
    forward: Callable[..., Array]
    # backward(g, out, values, needs, kwargs) -> per-input contribution
    # (None where needs[i] is False); never mutates g in place
    backward: Callable[..., tuple]


def _same_shape(a: Array, b: Array, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


def _fw_add(values, kwargs):
    a, b = values
    _same_shape(a, b, "add")
    return a + b


def _bw_add(g, out, values, needs, kwargs):
    return (g if needs[0] else None, g if needs[1] else None)


def _fw_sub(values, kwargs):
    a, b = values
    _same_shape(a, b, "sub")
    return a - b


def _bw_sub(g, out, values, needs, kwargs):
    return (g if needs[0] else None, -g if needs[1] else None)


def _fw_mul(values, kwargs):
    a, b = values
    _same_shape(a, b, "mul")
    return a * b


def _bw_mul(g, out, values, needs, kwargs):
    a, b = values
    return (g * b if needs[0] else None, g * a if needs[1] else None)


def _fw_matmul(values, kwargs):
    a, b = values
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: shapes {a.shape} and {b.shape} do not conform")
    return a @ b


def _bw_matmul(g, out, values, needs, kwargs):
    a, b = values
    ga = g @ b.T if needs[0] else None
    gb = a.T @ g if needs[1] else None
    return (ga, gb)


def _fw_scale(values, kwargs):
    (a,) = values
    factor = kwargs["factor"]
    if not np.isfinite(factor):
        raise NonFiniteError(f"scale: non-finite factor {factor!r}")
    return a * factor


def _bw_scale(g, out, values, needs, kwargs):
    return (g * kwargs["factor"],)


def _fw_tanh(values, kwargs):
    return np.tanh(values[0])


def _bw_tanh(g, out, values, needs, kwargs):
    return (g * (1.0 - out * out),)


def _fw_sigmoid(values, kwargs):
    x = values[0]
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _bw_sigmoid(g, out, values, needs, kwargs):
    return (g * out * (1.0 - out),)


def _fw_transpose(values, kwargs):
    (a,) = values
    if a.ndim != 2:
        raise ShapeError(f"transpose: need a 2-D tensor, got shape {a.shape}")
    return a.T.copy()


def _bw_transpose(g, out, values, needs, kwargs):
    return (g.T,)


def _fw_add_bias(values, kwargs):
    a, b = values
    if a.ndim != 2 or b.ndim != 1 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"add_bias: shapes {a.shape} and {b.shape} do not conform")
    return a + b


def _bw_add_bias(g, out, values, needs, kwargs):
    ga = g if needs[0] else None
    gb = g.sum(axis=0) if needs[1] else None
    return (ga, gb)


def _check_2d(parts: Sequence[Array], op: str) -> None:
    for p in parts:
        if p.ndim != 2:
            raise ShapeError(f"{op}: all inputs must be 2-D, got shape {p.shape}")


def _fw_concat_rows(values, kwargs):
    _check_2d(values, "concat_rows")
    cols = {v.shape[1] for v in values}
    if len(cols) != 1:
        raise ShapeError(f"concat_rows: column counts differ: {[v.shape for v in values]}")
    return np.concatenate(values, axis=0)


def _bw_concat_rows(g, out, values, needs, kwargs):
    grads = []
    offset = 0
    for v, need in zip(values, needs):
        n = v.shape[0]
        grads.append(g[offset:offset + n] if need else None)
        offset += n
    return tuple(grads)


def _fw_concat_cols(values, kwargs):
    _check_2d(values, "concat_cols")
    rows = {v.shape[0] for v in values}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: row counts differ: {[v.shape for v in values]}")
    return np.concatenate(values, axis=1)


def _bw_concat_cols(g, out, values, needs, kwargs):
    grads = []
    offset = 0
    for v, need in zip(values, needs):
        n = v.shape[1]
        grads.append(g[:, offset:offset + n] if need else None)
        offset += n
    return tuple(grads)


def _fw_slice_cols(values, kwargs):
    (a,) = values
    cols = kwargs["cols"]
    if a.ndim != 2:
        raise ShapeError(f"slice_cols: need a 2-D tensor, got shape {a.shape}")
    if len(set(cols)) != len(cols):
        raise ShapeError(f"slice_cols: column indices must be distinct, got {cols}")
    for c in cols:
        if not 0 <= c < a.shape[1]:
            raise ShapeError(f"slice_cols: column {c} out of range for shape {a.shape}")
    return a[:, list(cols)].copy()


def _bw_slice_cols(g, out, values, needs, kwargs):
    a = values[0]
    grad = np.zeros_like(a)
    grad[:, list(kwargs["cols"])] = g
    return (grad,)


def _fw_slice_rows(values, kwargs):
    (a,) = values
    start, stop = kwargs["start"], kwargs["stop"]
    if a.ndim != 2:
        raise ShapeError(f"slice_rows: need a 2-D tensor, got shape {a.shape}")
    if not (0 <= start < stop <= a.shape[0]):
        raise ShapeError(f"slice_rows: range [{start}, {stop}) invalid for shape {a.shape}")
    return a[start:stop].copy()


def _bw_slice_rows(g, out, values, needs, kwargs):
    a = values[0]
    grad = np.zeros_like(a)
    grad[kwargs["start"]:kwargs["stop"]] = g
    return (grad,)


def _fw_sum(values, kwargs):
    return np.array([values[0].sum()])


def _bw_sum(g, out, values, needs, kwargs):
    return (np.full_like(values[0], float(g.reshape(()))),)


def _fw_mean_sq_diff(values, kwargs):
    a, b = values
    _same_shape(a, b, "mean_sq_diff")
    d = a - b
    return np.array([(d * d).mean()])


def _bw_mean_sq_diff(g, out, values, needs, kwargs):
    a, b = values
    gs = float(g.reshape(()))
    base = (2.0 / a.size) * gs * (a - b)
    ga = base if needs[0] else None
    gb = -base if needs[1] else None
    return (ga, gb)


_OPS: dict[str, _OpRule] = {
    "add": _OpRule(_fw_add, _bw_add),
    "sub": _OpRule(_fw_sub, _bw_sub),
    "mul": _OpRule(_fw_mul, _bw_mul),
    "matmul": _OpRule(_fw_matmul, _bw_matmul),
    "scale": _OpRule(_fw_scale, _bw_scale),
    "tanh": _OpRule(_fw_tanh, _bw_tanh),
    "sigmoid": _OpRule(_fw_sigmoid, _bw_sigmoid),
    "transpose": _OpRule(_fw_transpose, _bw_transpose),
    "add_bias": _OpRule(_fw_add_bias, _bw_add_bias),
    "concat_rows": _OpRule(_fw_concat_rows, _bw_concat_rows),
    "concat_cols": _OpRule(_fw_concat_cols, _bw_concat_cols),
    "slice_cols": _OpRule(_fw_slice_cols, _bw_slice_cols),
    "slice_rows": _OpRule(_fw_slice_rows, _bw_slice_rows),
    "sum": _OpRule(_fw_sum, _bw_sum),
    "mean_sq_diff": _OpRule(_fw_mean_sq_diff, _bw_mean_sq_diff),
}


def registered_ops() -> tuple[str, ...]:
    return tuple(sorted(_OPS))


class Tape:
    """Recording of a forward computation, ready for one reverse sweep."""

    def __init__(self):
        self._nodes: list[_Node] = []
        self._grad_leaves: dict[int, Var] = {}

    def __len__(self) -> int:
        return len(self._nodes)

    def leaf(self, value, requires_grad: bool = False) -> Var:
        """Register an input tensor. Distinct calls make distinct leaves."""
        arr = as_tensor(value).copy()
        if not np.isfinite(arr).all():
            raise NonFiniteError("leaf: value contains NaN or Inf")
        node = _Node("leaf", (), {}, arr, bool(requires_grad))
        self._nodes.append(node)
        var = Var(self, len(self._nodes) - 1, arr.shape)
        if requires_grad:
            self._grad_leaves[var.id] = var
        return var

    def apply(self, op: str, *inputs: Var, **kwargs) -> Var:
        """Record one op; computes and caches its value immediately."""
        rule = _OPS.get(op)
        if rule is None:
            raise KeyError(f"unknown op {op!r}; registered: {registered_ops()}")
        for v in inputs:
            if v.tape is not self:
                raise ValueError(f"{op}: input {v!r} belongs to a different tape")
        values = [self._nodes[v.id].value for v in inputs]
        out = rule.forward(values, kwargs)
        needs = any(self._nodes[v.id].needs_grad for v in inputs)
        node = _Node(op, tuple(v.id for v in inputs), kwargs, out, needs)
        self._nodes.append(node)
        return Var(self, len(self._nodes) - 1, out.shape)

    # Conveniences, one per op.

    def add(self, a: Var, b: Var) -> Var:
        return self.apply("add", a, b)

    def sub(self, a: Var, b: Var) -> Var:
        return self.apply("sub", a, b)

    def mul(self, a: Var, b: Var) -> Var:
        return self.apply("mul", a, b)

    def matmul(self, a: Var, b: Var) -> Var:
        return self.apply("matmul", a, b)

    def scale(self, a: Var, factor: float) -> Var:
        return self.apply("scale", a, factor=float(factor))

    def tanh(self, a: Var) -> Var:
        return self.apply("tanh", a)

    def sigmoid(self, a: Var) -> Var:
        return self.apply("sigmoid", a)

    def transpose(self, a: Var) -> Var:
        return self.apply("transpose", a)

    def add_bias(self, a: Var, bias: Var) -> Var:
        return self.apply("add_bias", a, bias)

    def concat_rows(self, parts: Sequence[Var]) -> Var:
        return self.apply("concat_rows", *parts)

    def concat_cols(self, parts: Sequence[Var]) -> Var:
        return self.apply("concat_cols", *parts)

    def slice_cols(self, a: Var, cols: Sequence[int]) -> Var:
        return self.apply("slice_cols", a, cols=tuple(int(c) for c in cols))

    def slice_rows(self, a: Var, start: int, stop: int) -> Var:
        return self.apply("slice_rows", a, start=int(start), stop=int(stop))

    def sum(self, a: Var) -> Var:
        return self.apply("sum", a)

    def mean_sq_diff(self, a: Var, b: Var) -> Var:
        return self.apply("mean_sq_diff", a, b)

    def backward(self, loss: Var) -> dict[Var, Array]:
        """Gradients of a scalar loss for every requires_grad leaf.

        Leaves that do not influence the loss get zero gradients. Non-leaf
        gradients are discarded. Repeated calls recompute from scratch and
        are bit-identical.
        """
        if loss.tape is not self:
            raise ValueError("backward: loss belongs to a different tape")
        loss_val = self._nodes[loss.id].value
        if loss_val.size != 1:
            raise ShapeError(f"backward: loss must be scalar, got shape {loss_val.shape}")
        if not np.isfinite(loss_val).all():
            raise NonFiniteError("backward: loss is not finite")

        grads: list[Array | None] = [None] * (loss.id + 1)
        grads[loss.id] = np.ones_like(loss_val)
        for nid in range(loss.id, -1, -1):
            g = grads[nid]
            if g is None:
                continue
            node = self._nodes[nid]
            if node.op == "leaf" or not node.needs_grad:
                continue
            rule = _OPS[node.op]
            needs = [self._nodes[i].needs_grad for i in node.inputs]
            values = [self._nodes[i].value for i in node.inputs]
            contribs = rule.backward(g, node.value, values, needs, node.kwargs)
            for iid, contrib in zip(node.inputs, contribs):
                if contrib is None:
                    continue
                prev = grads[iid]
                # out-of-place accumulation: rules may return shared arrays
                grads[iid] = contrib if prev is None else prev + contrib

        out: dict[Var, Array] = {}
        for lid, var in self._grad_leaves.items():
            g = grads[lid] if lid <= loss.id else None
            value = self._nodes[lid].value
            out[var] = np.array(g, copy=True) if g is not None else np.zeros_like(value)
        return out

    def replay(self) -> bool:
        """Recompute every node from the leaves; True if all values match bitwise."""
        recomputed: list[Array] = []
        for node in self._nodes:
            if node.op == "leaf":
                recomputed.append(node.value)
                continue
            values = [recomputed[i] for i in node.inputs]
            recomputed.append(_OPS[node.op].forward(values, node.kwargs))
        return all(
            fresh.shape == node.value.shape and bool((fresh == node.value).all())
            for fresh, node in zip(recomputed, self._nodes)
        )


def grad_check(f: Callable[[Tape, Var], Var], x, eps: float = 1e-6) -> float:
    """Compare analytic gradients of ``f`` against central finite differences.

    ``f`` receives a fresh tape plus a leaf holding ``x`` and must return a
    scalar loss Var; it must be pure (no state between calls). Returns the
    maximum over components of ``|analytic - numeric| /
    max(|analytic|, |numeric|, 1e-12)``.
    """
    if not 1e-8 <= eps <= 1e-4:
        raise ValueError(f"grad_check: eps {eps} outside [1e-8, 1e-4]")
    x = as_tensor(x)

    tape = Tape()
    var = tape.leaf(x, requires_grad=True)
    loss = f(tape, var)
    analytic = tape.backward(loss)[var]

    def loss_at(arr: Array) -> float:
        t = Tape()
        return f(t, t.leaf(arr)).item()

    numeric = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        hi = x.copy()
        hi[idx] += eps
        lo = x.copy()
        lo[idx] -= eps
        numeric[idx] = (loss_at(hi) - loss_at(lo)) / (2.0 * eps)

    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return float((np.abs(analytic - numeric) / denom).max())


def _op_check_cases(rng) -> list[tuple[str, Callable[[], tuple]]]:
    """Random conforming inputs per op for the finite-difference sweep.

    Draws keep gradient components away from zero so the relative-error
    criterion is meaningful; targets sit outside the reachable output range.
    """

    def signed(shape, lo=0.5, hi=1.5):
        mag = rng.uniform(lo, hi, shape)
        sign = np.where(rng.uniform(0.0, 1.0, shape) < 0.5, -1.0, 1.0)
        return mag * sign

    def plain(shape, lo=-1.5, hi=1.5):
        return rng.uniform(lo, hi, shape)

    return [
        ("add", lambda: (plain((3, 4)), plain((3, 4)))),
        ("sub", lambda: (plain((3, 4)), plain((3, 4)))),
        ("mul", lambda: (signed((3, 4)), signed((3, 4)))),
        ("matmul", lambda: (signed((3, 4)), signed((4, 2)))),
        ("scale", lambda: (plain((3, 4)),)),
        ("tanh", lambda: (plain((3, 4)),)),
        ("sigmoid", lambda: (plain((3, 4), -2.0, 2.0),)),
        ("transpose", lambda: (plain((3, 4)),)),
        ("add_bias", lambda: (plain((3, 4)), plain((4,)))),
        ("concat_rows", lambda: (plain((2, 3)), plain((3, 3)))),
        ("concat_cols", lambda: (plain((3, 2)), plain((3, 3)))),
        ("slice_cols", lambda: (plain((3, 5)),)),
        ("slice_rows", lambda: (plain((5, 3)),)),
        ("sum", lambda: (plain((3, 4)),)),
        ("mean_sq_diff", lambda: (plain((3, 4), 0.5, 1.5), plain((3, 4), -1.5, -0.5))),
    ]


_OP_CHECK_KWARGS = {
    "scale": {"factor": 1.7},
    "slice_cols": {"cols": (0, 2, 3)},
    "slice_rows": {"start": 1, "stop": 4},
}


def run_op_checks(seed: int = 0, samples_per_op: int = 100) -> dict[str, float]:
    """Finite-difference sweep over every registered op.

    For each op, each differentiable input position is checked on
    ``samples_per_op`` random inputs; the result maps op name to the worst
    relative error seen. The loss wrapper is a mean-square distance to a
    fixed out-of-range target, so every gradient component stays O(1).
    """
    from .rng import Xoshiro256

    rng = Xoshiro256(seed)
    cases = _op_check_cases(rng)
    if {name for name, _ in cases} != set(_OPS):
        missing = set(_OPS) - {name for name, _ in cases}
        raise AssertionError(f"ops missing a finite-difference case: {sorted(missing)}")

    worst: dict[str, float] = {}
    for op, make in cases:
        kwargs = _OP_CHECK_KWARGS.get(op, {})
        err = 0.0
        for _ in range(samples_per_op):
            inputs = make()
            for pos in range(len(inputs)):

                def f(tape: Tape, x: Var, _inputs=inputs, _pos=pos) -> Var:
                    vars_ = [
                        x if j == _pos else tape.leaf(arr)
                        for j, arr in enumerate(_inputs)
                    ]
                    out = tape.apply(op, *vars_, **kwargs)
                    if out.value.size == 1:
                        return out
                    target = tape.leaf(np.full(out.shape, 4.0))
                    return tape.mean_sq_diff(out, target)

                err = max(err, grad_check(f, inputs[pos], eps=1e-6))
        worst[op] = err
    return worst
