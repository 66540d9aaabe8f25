"""Minimal reverse-mode automatic differentiation over dense tensors.

A Tensor wraps a row-major numpy array plus an optional gradient buffer.
Operations record backward closures on their results; backward() walks the
recorded graph in reverse topological order and accumulates gradients
additively into every tensor that requires them. A graph can be traversed
backward once; building a new forward builds a new graph.

Training runs in float32; gradient checking runs the same code in float64
(finite differences are unreliable in single precision). A graph is
single-threaded during forward/backward; tensors with no live graph
references may be handed freely between threads.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the context (inference/validation)."""
    global _grad_enabled
    saved = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = saved


class Tensor:
    """Dense tensor participating in reverse-mode differentiation."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = np.zeros_like(arr) if requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self._consumed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def node(data: np.ndarray, parents: Sequence[Tensor],
         backward: Callable[[np.ndarray], None]) -> Tensor:
    """Build an operation result recording `backward` for the reverse pass.

    `backward` receives the accumulated output gradient and must add each
    parent's contribution via accumulate_grad. Recording is skipped when
    gradients are disabled or no parent requires them.
    """
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def accumulate_grad(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def backward(loss: Tensor) -> None:
    """Populate d(loss)/d(leaf) for every requires_grad leaf in the graph.

    The traversed graph is consumed: a second backward through any of its
    nodes raises. Gradients accumulate additively, so two backwards from
    two separate forwards sum their contributions.
    """
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
    if loss._consumed:
        raise RuntimeError("graph already consumed by a previous backward")
    if not loss.requires_grad:
        raise ValueError("loss does not require gradients; nothing to do")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        t, expanded = stack.pop()
        if expanded:
            order.append(t)
            continue
        if id(t) in seen:
            continue
        seen.add(id(t))
        stack.append((t, True))
        for p in t._parents:
            if id(p) not in seen and p._backward is not None:
                stack.append((p, False))

    accumulate_grad(loss, np.ones_like(loss.data))
    for t in reversed(order):
        if t._consumed:
            raise RuntimeError("graph already consumed by a previous backward")
        if t._backward is not None:
            t._backward(t.grad)
            t._backward = None
            t._consumed = True


def _require_same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ValueError(f"{op}: shape mismatch {a.data.shape} vs {b.data.shape}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "add")

    def bwd(g):
        accumulate_grad(a, g)
        accumulate_grad(b, g)

    return node(a.data + b.data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "sub")

    def bwd(g):
        accumulate_grad(a, g)
        accumulate_grad(b, -g)

    return node(a.data - b.data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _require_same_shape(a, b, "mul")

    def bwd(g):
        accumulate_grad(a, g * b.data)
        accumulate_grad(b, g * a.data)

    return node(a.data * b.data, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bwd(g):
        accumulate_grad(a, g * c)

    return node(a.data * c, (a,), bwd)


def add_const(a: Tensor, c: float) -> Tensor:
    def bwd(g):
        accumulate_grad(a, g)

    return node(a.data + float(c), (a,), bwd)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.data.shape} vs {b.data.shape}")

    def bwd(g):
        accumulate_grad(a, g @ b.data.T)
        accumulate_grad(b, a.data.T @ g)

    return node(a.data @ b.data, (a, b), bwd)


def relu(a: Tensor) -> Tensor:
    # subgradient at 0 is 0
    mask = a.data > 0.0

    def bwd(g):
        accumulate_grad(a, g * mask)

    return node(np.where(mask, a.data, 0.0), (a,), bwd)


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bwd(g):
        accumulate_grad(a, g * out * (1.0 - out))

    return node(out, (a,), bwd)


def square(a: Tensor) -> Tensor:
    def bwd(g):
        accumulate_grad(a, g * (2.0 * a.data))

    return node(a.data * a.data, (a,), bwd)


def rsqrt(a: Tensor, eps: float = 0.0) -> Tensor:
    out = 1.0 / np.sqrt(a.data + eps)

    def bwd(g):
        accumulate_grad(a, g * (-0.5 * out ** 3))

    return node(out, (a,), bwd)


def reduce_mean(a: Tensor) -> Tensor:
    n = a.data.size

    def bwd(g):
        accumulate_grad(a, np.full_like(a.data, g / n))

    return node(np.asarray(a.data.mean(), dtype=a.data.dtype), (a,), bwd)


def reduce_sum(a: Tensor) -> Tensor:
    def bwd(g):
        accumulate_grad(a, np.full_like(a.data, g))

    return node(np.asarray(a.data.sum(), dtype=a.data.dtype), (a,), bwd)


def mean_over_axis(a: Tensor, axis: int) -> Tensor:
    """Mean along one axis, keeping it as size 1."""
    if not -a.data.ndim <= axis < a.data.ndim:
        raise ValueError(f"mean_over_axis: axis {axis} out of range for shape {a.data.shape}")
    n = a.data.shape[axis]
    if n == 0:
        raise ValueError("mean_over_axis: cannot average an empty axis")

    def bwd(g):
        accumulate_grad(a, np.broadcast_to(g / n, a.data.shape).copy())

    return node(a.data.mean(axis=axis, keepdims=True), (a,), bwd)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    shape = tuple(shape)
    out = a.data.reshape(shape)

    def bwd(g):
        accumulate_grad(a, g.reshape(a.data.shape))

    return node(out.copy(), (a,), bwd)


def broadcast_to(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    shape = tuple(shape)
    if len(shape) != a.data.ndim:
        raise ValueError(f"broadcast_to: rank mismatch {a.data.shape} -> {shape}")
    expanded = []
    for ax, (have, want) in enumerate(zip(a.data.shape, shape)):
        if have == want:
            continue
        if have != 1:
            raise ValueError(f"broadcast_to: cannot expand {a.data.shape} to {shape}; "
                             f"axis {ax} is not size 1")
        expanded.append(ax)

    def bwd(g):
        accumulate_grad(a, g.sum(axis=tuple(expanded), keepdims=True))

    return node(np.broadcast_to(a.data, shape).copy(), (a,), bwd)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    if not tensors:
        raise ValueError("concat: need at least one tensor")
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def bwd(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            accumulate_grad(t, piece)

    return node(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), bwd)


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Slice `length` entries starting at `start` along one axis."""
    if start < 0 or length < 0 or start + length > a.data.shape[axis]:
        raise ValueError(f"narrow: [{start}, {start + length}) outside axis {axis} "
                         f"of shape {a.data.shape}")
    index = [slice(None)] * a.data.ndim
    index[axis] = slice(start, start + length)
    index = tuple(index)

    def bwd(g):
        full = np.zeros_like(a.data)
        full[index] = g
        accumulate_grad(a, full)

    return node(a.data[index].copy(), (a,), bwd)


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor,
               eps: float = 1e-5, sample: int | None = None,
               rng: np.random.Generator | None = None) -> float:
    """Compare analytic gradients of a scalar function against central
    finite differences; returns the max relative error over coordinates.

    Coordinates where the eps and eps/2 difference quotients disagree are
    skipped: there the function is not locally smooth (a ReLU kink within
    the probe step) and the finite difference itself is invalid. `sample`
    caps how many coordinates are probed (seeded subset via `rng`).
    """
    if not x.requires_grad:
        raise ValueError("grad_check target must require gradients")

    probe = f(x)
    if probe.data.size != 1:
        raise ValueError(f"grad_check needs a scalar function, got shape {probe.data.shape}")
    if not np.array_equal(probe.data, f(x).data):
        raise NumericError("grad_check: function is non-deterministic "
                           "(double evaluation mismatch)")

    x.zero_grad()
    backward(f(x))
    analytic = x.grad.reshape(-1).copy()

    flat = x.data.reshape(-1)
    coords = np.arange(flat.size)
    if sample is not None and sample < flat.size:
        gen = rng if rng is not None else np.random.default_rng(0)
        coords = np.sort(gen.choice(flat.size, size=sample, replace=False))

    def value_at(i: int, v: float) -> float:
        saved = flat[i]
        flat[i] = v
        with no_grad():
            out = float(f(x).data)
        flat[i] = saved
        return out

    max_err = 0.0
    for i in coords:
        i = int(i)
        base = float(flat[i])
        n_full = (value_at(i, base + eps) - value_at(i, base - eps)) / (2.0 * eps)
        n_half = (value_at(i, base + eps / 2) - value_at(i, base - eps / 2)) / eps
        if abs(n_full - n_half) / max(1.0, abs(n_full), abs(n_half)) > 1e-3:
            continue
        err = abs(analytic[i] - n_full) / max(1.0, abs(analytic[i]), abs(n_full))
        max_err = max(max_err, err)
    return max_err
