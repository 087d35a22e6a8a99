"""Reverse-mode automatic differentiation over dense float64 arrays.

A graph of Node objects is built during each forward pass (tape style) and
discarded after backward(). Parameters are persistent leaf nodes; everything
else is recreated per pass. Any non-finite intermediate raises immediately
instead of silently propagating NaNs into the optimizer.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class AutodiffError(Exception):
    """Structural failure inside the autodiff engine."""


class DomainError(AutodiffError):
    """Input outside the mathematical domain of a primitive (log, sqrt)."""


class NonFiniteError(AutodiffError):
    """A forward pass produced inf or NaN."""


_check_finite = True


def set_finite_checks(enabled: bool) -> None:
    """Toggle per-node finiteness checks (on by default)."""
    global _check_finite
    _check_finite = bool(enabled)


class Node:
    """One tape node: a float64 array, its parent nodes and a backward rule.

    The backward rule receives the adjoint of this node and accumulates
    adjoints into the parents via _accum.
    """

    __slots__ = ("value", "parents", "adjoint", "_backward")

    def __init__(self, value, parents=(), backward=None):
        arr = np.asarray(value, dtype=np.float64)
        if _check_finite and not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"non-finite value in forward pass, shape {arr.shape}")
        self.value = arr
        self.parents = parents
        self.adjoint = None
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return self.value.item()

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __getitem__(self, key):
        return narrow(self, key)

    def __repr__(self):
        return f"Node(shape={self.value.shape})"


class Parameter(Node):
    """Persistent leaf node; gradient maps are keyed on these objects."""

    __slots__ = ("name",)

    def __init__(self, value, name: str = ""):
        super().__init__(value)
        self.name = name

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


def lift(x) -> Node:
    return x if isinstance(x, Node) else Node(x)


def constant(x) -> Node:
    return Node(x)


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient over the axes numpy broadcast during the forward op."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _accum(node: Node, grad: np.ndarray) -> None:
    g = _unbroadcast(np.asarray(grad, dtype=np.float64), node.value.shape)
    node.adjoint = g if node.adjoint is None else node.adjoint + g


# ---------------------------------------------------------------------------
# primitives


def add(a, b) -> Node:
    a, b = lift(a), lift(b)
    out = Node(a.value + b.value, (a, b))

    def bw(g):
        _accum(a, g)
        _accum(b, g)

    out._backward = bw
    return out


def sub(a, b) -> Node:
    a, b = lift(a), lift(b)
    out = Node(a.value - b.value, (a, b))

    def bw(g):
        _accum(a, g)
        _accum(b, -g)

    out._backward = bw
    return out


def mul(a, b) -> Node:
    a, b = lift(a), lift(b)
    out = Node(a.value * b.value, (a, b))

    def bw(g):
        _accum(a, g * b.value)
        _accum(b, g * a.value)

    out._backward = bw
    return out


def div(a, b) -> Node:
    a, b = lift(a), lift(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = Node(a.value / b.value, (a, b))

    def bw(g):
        _accum(a, g / b.value)
        _accum(b, -g * a.value / (b.value * b.value))

    out._backward = bw
    return out


def neg(a) -> Node:
    a = lift(a)
    out = Node(-a.value, (a,))

    def bw(g):
        _accum(a, -g)

    out._backward = bw
    return out


def matmul(a, b) -> Node:
    a, b = lift(a), lift(b)
    if a.value.ndim != 2 or b.value.ndim != 2:
        raise AutodiffError(
            f"matmul expects 2-D operands, got {a.value.shape} @ {b.value.shape}"
        )
    out = Node(a.value @ b.value, (a, b))

    def bw(g):
        _accum(a, g @ b.value.T)
        _accum(b, a.value.T @ g)

    out._backward = bw
    return out


def exp(a) -> Node:
    a = lift(a)
    with np.errstate(over="ignore"):
        out = Node(np.exp(a.value), (a,))
    val = out.value  # capture the array, not the node, to keep the tape acyclic

    def bw(g):
        _accum(a, g * val)

    out._backward = bw
    return out


def log(a) -> Node:
    a = lift(a)
    if np.any(a.value <= 0):
        raise DomainError("log of non-positive value")
    out = Node(np.log(a.value), (a,))

    def bw(g):
        _accum(a, g / a.value)

    out._backward = bw
    return out


def sqrt(a) -> Node:
    a = lift(a)
    if np.any(a.value < 0):
        raise DomainError("sqrt of negative value")
    out = Node(np.sqrt(a.value), (a,))
    val = out.value

    def bw(g):
        _accum(a, g * 0.5 / val)

    out._backward = bw
    return out


def square(a) -> Node:
    a = lift(a)
    out = Node(a.value * a.value, (a,))

    def bw(g):
        _accum(a, g * 2.0 * a.value)

    out._backward = bw
    return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so neither branch exponentiates a large positive number
    pos = x >= 0
    out = np.empty_like(x)
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Node:
    a = lift(a)
    out = Node(_sigmoid(a.value), (a,))
    val = out.value

    def bw(g):
        _accum(a, g * val * (1.0 - val))

    out._backward = bw
    return out


def tanh(a) -> Node:
    a = lift(a)
    out = Node(np.tanh(a.value), (a,))
    val = out.value

    def bw(g):
        _accum(a, g * (1.0 - val * val))

    out._backward = bw
    return out


def softplus(a) -> Node:
    """log(1 + exp(x)) computed as max(x, 0) + log1p(exp(-|x|))."""
    a = lift(a)
    out = Node(np.logaddexp(0.0, a.value), (a,))

    def bw(g):
        _accum(a, g * _sigmoid(a.value))

    out._backward = bw
    return out


def relu(a) -> Node:
    a = lift(a)
    out = Node(np.maximum(a.value, 0.0), (a,))

    def bw(g):
        _accum(a, g * (a.value > 0))

    out._backward = bw
    return out


def clip(a, lo=None, hi=None) -> Node:
    """Clamp values; gradient passes only where the input was interior."""
    a = lift(a)
    out = Node(np.clip(a.value, lo, hi), (a,))
    mask = np.ones_like(a.value, dtype=bool)
    if lo is not None:
        mask &= a.value > lo
    if hi is not None:
        mask &= a.value < hi

    def bw(g):
        _accum(a, g * mask)

    out._backward = bw
    return out


def softmax(a, axis: int = -1) -> Node:
    a = lift(a)
    z = a.value - np.max(a.value, axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / np.sum(e, axis=axis, keepdims=True)
    out = Node(y, (a,))

    def bw(g):
        inner = np.sum(g * y, axis=axis, keepdims=True)
        _accum(a, y * (g - inner))

    out._backward = bw
    return out


def total_sum(a) -> Node:
    a = lift(a)
    out = Node(np.sum(a.value), (a,))

    def bw(g):
        _accum(a, np.broadcast_to(g, a.value.shape))

    out._backward = bw
    return out


def sum_axis(a, axis: int, keepdims: bool = False) -> Node:
    a = lift(a)
    out = Node(np.sum(a.value, axis=axis, keepdims=keepdims), (a,))

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accum(a, np.broadcast_to(g, a.value.shape))

    out._backward = bw
    return out


def mean_all(a) -> Node:
    a = lift(a)
    out = Node(np.mean(a.value), (a,))
    n = a.value.size

    def bw(g):
        _accum(a, np.broadcast_to(g / n, a.value.shape))

    out._backward = bw
    return out


def concat(nodes, axis: int = 0) -> Node:
    nodes = [lift(n) for n in nodes]
    out = Node(np.concatenate([n.value for n in nodes], axis=axis), tuple(nodes))
    sizes = [n.value.shape[axis] for n in nodes]
    offsets = np.cumsum([0] + sizes)

    def bw(g):
        for n, start, stop in zip(nodes, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(start, stop)
            _accum(n, g[tuple(idx)])

    out._backward = bw
    return out


def narrow(a, key) -> Node:
    """Basic (non-fancy) indexing; the adjoint scatters back into zeros."""
    a = lift(a)
    out = Node(a.value[key], (a,))

    def bw(g):
        full = np.zeros_like(a.value)
        full[key] = g.reshape(full[key].shape)
        _accum(a, full)

    out._backward = bw
    return out


def reshape(a, shape) -> Node:
    a = lift(a)
    out = Node(a.value.reshape(shape), (a,))

    def bw(g):
        _accum(a, g.reshape(a.value.shape))

    out._backward = bw
    return out


# ---------------------------------------------------------------------------
# backward pass


def _topo_order(root: Node) -> list:
    """Parents-before-children ordering of all nodes reachable from root."""
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in visited:
                stack.append((p, False))
    return order


def backward(root: Node, params=None):
    """Run reverse accumulation from a scalar root.

    Returns a dict mapping each requested Parameter to its gradient;
    parameters not reachable from the root get exact zeros.
    """
    if root.value.size != 1:
        raise AutodiffError(f"backward root must be scalar, got shape {root.value.shape}")
    order = _topo_order(root)
    for node in order:
        node.adjoint = None
    root.adjoint = np.ones_like(root.value)
    for node in reversed(order):
        if node.adjoint is None or node._backward is None:
            continue
        node._backward(node.adjoint)
    if params is None:
        return {}
    reachable = {id(n) for n in order}
    grads = {}
    for p in params:
        if id(p) in reachable and p.adjoint is not None:
            grads[p] = p.adjoint
        else:
            grads[p] = np.zeros_like(p.value)
    return grads


# ---------------------------------------------------------------------------
# Adam


@dataclass
class AdamState:
    """Bias-corrected Adam state; moment tensors allocated lazily per parameter."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step_count: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, grads, state: AdamState) -> None:
    """Apply one Adam update in place to every parameter in `params`."""
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p in params:
        g = grads[p]
        if g.shape != p.value.shape:
            raise AutodiffError(
                f"gradient shape {g.shape} does not match parameter "
                f"{getattr(p, 'name', '?')} shape {p.value.shape}"
            )
        if not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for {getattr(p, 'name', '?')}")
        m = state.m.get(p)
        if m is None:
            m = np.zeros_like(p.value)
            state.v[p] = np.zeros_like(p.value)
        v = state.v[p]
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[p] = m
        state.v[p] = v
        p.value = p.value - state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckBlock:
    name: str
    rel_error: float
    passed: bool


@dataclass
class GradCheckReport:
    blocks: list
    tolerance: float

    @property
    def max_rel_error(self) -> float:
        return max((b.rel_error for b in self.blocks), default=0.0)

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.blocks)

    def lines(self):
        for b in self.blocks:
            status = "ok" if b.passed else "FAIL"
            yield f"{status:4s}  {b.name:40s}  rel_err={b.rel_error:.3e}"


def finite_difference_check(loss_fn, params, step: float = 1e-5,
                            tolerance: float = 1e-3,
                            norm_floor: float = 1e-4) -> GradCheckReport:
    """Compare backward() gradients against central finite differences.

    loss_fn must be a deterministic zero-argument callable returning a scalar
    Node built from the given parameters. The relative error per parameter
    block is ||g_fd - g_bp|| / max(||g_fd||, ||g_bp||, norm_floor); the floor
    keeps blocks whose true gradient is (near) zero from comparing
    finite-difference roundoff noise against itself.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    analytic = backward(loss_fn(), params)
    blocks = []
    for p in params:
        fd = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        fd_flat = fd.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = loss_fn().item()
            flat[i] = orig - step
            f_minus = loss_fn().item()
            flat[i] = orig
            fd_flat[i] = (f_plus - f_minus) / (2.0 * step)
        diff = np.linalg.norm(fd - analytic[p])
        denom = max(np.linalg.norm(fd), np.linalg.norm(analytic[p]), norm_floor)
        rel = diff / denom
        name = getattr(p, "name", "") or f"param{len(blocks)}"
        blocks.append(GradCheckBlock(name=name, rel_error=rel, passed=rel < tolerance))
    return GradCheckReport(blocks=blocks, tolerance=tolerance)
