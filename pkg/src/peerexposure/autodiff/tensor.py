"""Dense float64 tensors recorded on a tape for reverse-mode differentiation.

A :class:`Tape` owns the recording. Leaves are created with
:meth:`Tape.param` (differentiable) or :func:`constant`; every primitive
applied to at least one differentiable input appends a node to the tape of
that input. Broadcasting is limited to scalars (Python numbers or 0-d
tensors); anything else must be tiled explicitly (see :func:`gather`).
"""
from __future__ import annotations

import itertools
from typing import Callable, Sequence

import numpy as np

from ..errors import InputError, NumericError, ShapeError

LOG_EPS = 1e-12

_uid = itertools.count()


class Tensor:
    __slots__ = ("data", "requires_grad", "tape", "uid", "name")

    def __init__(self, data, requires_grad: bool = False, tape: "Tape | None" = None, name: str | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.tape = tape
        self.uid = next(_uid)
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __len__(self) -> int:
        return len(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # operators delegate to the primitives below
    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, o):
        return matmul(self, o)

    @property
    def T(self):
        return transpose(self)


class _Node:
    __slots__ = ("op", "inputs", "out", "vjp")

    def __init__(self, op: str, inputs: tuple, out: Tensor, vjp: Callable):
        self.op = op
        self.inputs = inputs
        self.out = out
        self.vjp = vjp


class Tape:
    """Ordered record of primitive applications (inputs always precede outputs)."""

    def __init__(self):
        self.nodes: list[_Node] = []
        self.params: list[Tensor] = []

    def param(self, data, name: str | None = None) -> Tensor:
        t = Tensor(np.array(data, dtype=np.float64), requires_grad=True, tape=self, name=name)
        self.params.append(t)
        return t

    def __len__(self) -> int:
        return len(self.nodes)

    def ops(self) -> list[str]:
        return [n.op for n in self.nodes]

    def backward(self, loss: Tensor) -> dict[Tensor, np.ndarray]:
        return backward(self, loss)


def constant(data) -> Tensor:
    return Tensor(data)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(op: str, out_data: np.ndarray, inputs: Sequence[Tensor], vjp: Callable) -> Tensor:
    tape = None
    for t in inputs:
        if t.requires_grad:
            if tape is None:
                tape = t.tape
            elif t.tape is not tape:
                raise InputError("operands were recorded on different tapes")
    if tape is None:
        return Tensor(out_data)
    out = Tensor(out_data, requires_grad=True, tape=tape)
    tape.nodes.append(_Node(op, tuple(inputs), out, vjp))
    return out


def backward(tape: Tape, loss: Tensor) -> dict[Tensor, np.ndarray]:
    """Gradients of a scalar ``loss`` with respect to every differentiable leaf.

    Leaves that do not influence the loss receive exact zeros.
    """
    if loss.data.shape != ():
        raise InputError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    grads: dict[int, np.ndarray] = {}
    leaves: dict[int, Tensor] = {t.uid: t for t in tape.params}
    produced = set()
    for node in tape.nodes:
        produced.add(node.out.uid)
        for t in node.inputs:
            if t.requires_grad and t.tape is tape and t.uid not in produced:
                leaves.setdefault(t.uid, t)
    if loss.requires_grad:
        if loss.tape is not tape:
            raise InputError("loss was not recorded on this tape")
        grads[loss.uid] = np.ones(())
        if loss.uid not in produced:
            leaves.setdefault(loss.uid, loss)
    for node in reversed(tape.nodes):
        g = grads.pop(node.out.uid, None)
        if g is None:
            continue
        in_grads = node.vjp(g)
        for t, gi in zip(node.inputs, in_grads):
            if gi is None or not t.requires_grad:
                continue
            if t.uid in grads:
                grads[t.uid] = grads[t.uid] + gi
            else:
                grads[t.uid] = gi
    return {t: grads.get(uid, np.zeros_like(t.data)) for uid, t in leaves.items()}


# -- broadcasting helpers --------------------------------------------------


def _pair(a, b) -> tuple[Tensor, Tensor, tuple[int, ...]]:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape == b.shape:
        return a, b, a.shape
    if a.shape == ():
        return a, b, b.shape
    if b.shape == ():
        return a, b, a.shape
    raise ShapeError(f"incompatible shapes {a.shape} and {b.shape} (only scalar broadcasting)")


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    return np.asarray(g.sum())


# -- primitives ------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b, _ = _pair(a, b)
    return _record("add", a.data + b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b, _ = _pair(a, b)
    return _record("sub", a.data - b.data, (a, b), lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)))


def neg(a) -> Tensor:
    a = as_tensor(a)
    return _record("neg", -a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    a, b, _ = _pair(a, b)
    return _record(
        "mul",
        a.data * b.data,
        (a, b),
        lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)),
    )


def div(a, b) -> Tensor:
    a, b, _ = _pair(a, b)
    if np.any(b.data == 0):
        raise NumericError("division by zero denominator")
    q = a.data / b.data
    return _record(
        "div",
        q,
        (a, b),
        lambda g: (_unbroadcast(g / b.data, a.shape), _unbroadcast(-g * q / b.data, b.shape)),
    )


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul needs (m, k) @ (k, n), got {a.shape} @ {b.shape}")
    return _record("matmul", a.data @ b.data, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))


def transpose(a) -> Tensor:
    a = as_tensor(a)
    if a.ndim != 2:
        raise ShapeError("transpose needs a 2-d tensor")
    return _record("transpose", a.data.T.copy(), (a,), lambda g: (g.T,))


def reshape(a, shape: tuple[int, ...]) -> Tensor:
    a = as_tensor(a)
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(str(exc)) from None
    return _record("reshape", out, (a,), lambda g: (g.reshape(a.shape),))


def concat(tensors: Sequence, axis: int = -1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise InputError("concat needs at least one tensor")
    nd = ts[0].ndim
    if any(t.ndim != nd for t in ts) or nd == 0:
        raise ShapeError("concat operands must share a nonzero rank")
    lead = ts[0].shape[:-1]
    if axis not in (-1, nd - 1) or any(t.shape[:-1] != lead for t in ts):
        raise ShapeError(f"concat only joins along the last axis; shapes {[t.shape for t in ts]}")
    widths = [t.shape[-1] for t in ts]
    cuts = np.cumsum(widths)[:-1]
    return _record(
        "concat",
        np.concatenate([t.data for t in ts], axis=-1),
        tuple(ts),
        lambda g: tuple(np.split(g, cuts, axis=-1)),
    )


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return _record("relu", np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    s = np.empty_like(a.data)
    pos = a.data >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-a.data[pos]))
    e = np.exp(a.data[~pos])
    s[~pos] = e / (1.0 + e)
    return _record("sigmoid", s, (a,), lambda g: (g * s * (1.0 - s),))


def exp(a) -> Tensor:
    a = as_tensor(a)
    e = np.exp(a.data)
    return _record("exp", e, (a,), lambda g: (g * e,))


def log(a) -> Tensor:
    """Natural log with the argument clamped below at ``LOG_EPS``."""
    a = as_tensor(a)
    inside = a.data >= LOG_EPS
    x = np.where(inside, a.data, LOG_EPS)
    return _record("log", np.log(x), (a,), lambda g: (g * inside / x,))


def log1p(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= -1):
        raise NumericError("log1p argument must exceed -1")
    return _record("log1p", np.log1p(a.data), (a,), lambda g: (g / (1.0 + a.data),))


def square(a) -> Tensor:
    a = as_tensor(a)
    return _record("square", a.data * a.data, (a,), lambda g: (2.0 * g * a.data,))


def abs_(a) -> Tensor:
    a = as_tensor(a)
    return _record("abs", np.abs(a.data), (a,), lambda g: (g * np.sign(a.data),))


def clamp(a, lo: float, hi: float) -> Tensor:
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return _record("clamp", np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


def sum_(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        return _record("sum", np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, a.shape).copy(),))
    ax = axis % a.ndim
    return _record(
        "sum",
        a.data.sum(axis=ax),
        (a,),
        lambda g: (np.broadcast_to(np.expand_dims(g, ax), a.shape).copy(),),
    )


def mean(a, axis: int | None = None) -> Tensor:
    a = as_tensor(a)
    count = a.data.size if axis is None else a.shape[axis % a.ndim]
    if count == 0:
        raise NumericError("mean of an empty tensor")
    return mul(sum_(a, axis), 1.0 / count)


def _extreme(op: str, a, axis: int, pick) -> Tensor:
    a = as_tensor(a)
    ax = axis % a.ndim
    idx = pick(a.data, axis=ax)
    out = np.take_along_axis(a.data, np.expand_dims(idx, ax), axis=ax).squeeze(ax)

    def vjp(g):
        full = np.zeros_like(a.data)
        np.put_along_axis(full, np.expand_dims(idx, ax), np.expand_dims(g, ax), axis=ax)
        return (full,)

    return _record(op, out, (a,), vjp)


def max_(a, axis: int = 0) -> Tensor:
    """Maximum along ``axis``; the gradient goes to the first maximal entry."""
    return _extreme("max", a, axis, np.argmax)


def min_(a, axis: int = 0) -> Tensor:
    return _extreme("min", a, axis, np.argmin)


def segment_sum(a, segment_ids, num_segments: int) -> Tensor:
    """Sum rows of ``a`` that share a segment id: ``out[s] = sum(a[ids == s])``."""
    a = as_tensor(a)
    ids = np.asarray(segment_ids, dtype=np.int64)
    if a.ndim == 0 or ids.shape != (a.shape[0],):
        raise ShapeError(f"segment ids of shape {ids.shape} do not match rows of {a.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= num_segments):
        raise InputError("segment id out of range")
    out = np.zeros((num_segments,) + a.shape[1:])
    np.add.at(out, ids, a.data)
    return _record("segment_sum", out, (a,), lambda g: (g[ids],))


def gather(a, index) -> Tensor:
    """Row selection ``a[index]``; the backward pass is a segment sum."""
    a = as_tensor(a)
    idx = np.asarray(index, dtype=np.int64)
    if idx.ndim != 1:
        raise ShapeError("gather index must be 1-d")
    if idx.size and (idx.min() < 0 or idx.max() >= a.shape[0]):
        raise InputError("gather index out of range")

    def vjp(g):
        full = np.zeros_like(a.data)
        np.add.at(full, idx, g)
        return (full,)

    return _record("gather", a.data[idx], (a,), vjp)


def _softmin_rows(neg_cost: np.ndarray, shift: np.ndarray, buf: np.ndarray) -> np.ndarray:
    """Row-wise ``log sum_j exp(neg_cost[i, j] + shift[j])``, computed in ``buf``."""
    np.add(neg_cost, shift[None, :], out=buf)
    top = buf.max(axis=1)
    buf -= top[:, None]
    # terms below e^-60 of the row maximum cannot move the sum; clipping keeps exp off the slow underflow path
    np.maximum(buf, -60.0, out=buf)
    np.exp(buf, out=buf)
    return top + np.log(buf.sum(axis=1))


def entropic_ot(x, y, eps: float, iters: int) -> Tensor:
    """Entropy-regularised OT value between uniform point clouds ``x`` and ``y``.

    Ground cost is squared Euclidean distance; the value
    ``min_P <P, C> + eps * KL(P | a b^T)`` is obtained from log-domain
    Sinkhorn potentials after ``iters`` alternating updates. Its gradient is
    taken through the cost with the final plan held fixed, which is exact at
    the Sinkhorn fixed point (envelope theorem).
    """
    x, y = as_tensor(x), as_tensor(y)
    if x.ndim != 2 or y.ndim != 2 or x.shape[1] != y.shape[1]:
        raise ShapeError(f"point clouds must be (n, d) and (m, d); got {x.shape}, {y.shape}")
    n, m = x.shape[0], y.shape[0]
    if n == 0 or m == 0:
        raise InputError("entropic_ot needs nonempty point clouds")
    xd, yd = x.data, y.data
    cost = (xd * xd).sum(1)[:, None] + (yd * yd).sum(1)[None, :] - 2.0 * xd @ yd.T
    cost = np.maximum(cost, 0.0)
    log_a, log_b = -np.log(n), -np.log(m)
    k = -cost / eps
    k_t = np.ascontiguousarray(k.T)
    buf, buf_t = np.empty((n, m)), np.empty((m, n))
    f = np.zeros(n)
    gpot = np.zeros(m)
    for _ in range(max(int(iters), 1)):
        f = -eps * (_softmin_rows(k, gpot / eps, buf) + log_b)
        gpot = -eps * (_softmin_rows(k_t, f / eps, buf_t) + log_a)
    value = f.mean() + gpot.mean()
    plan = np.exp((f[:, None] + gpot[None, :] - cost) / eps + log_a + log_b)
    row, col = plan.sum(1), plan.sum(0)

    def vjp(g):
        gx = 2.0 * g * (row[:, None] * xd - plan @ yd)
        gy = 2.0 * g * (col[:, None] * yd - plan.T @ xd)
        return gx, gy

    return _record("entropic_ot", np.asarray(value), (x, y), vjp)
