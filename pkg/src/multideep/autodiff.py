"""Reverse-mode automatic differentiation over dense float64 arrays.

A small define-by-run tape: every op returns a Tensor that remembers its
inputs and a closure that pushes gradients back to them, and backward()
replays the tape in reverse topological order. Arrays stay 2-D unless an
op says otherwise. Only the pieces the schedulers actually need exist
here; there is no broadcasting cleverness beyond row-vector biases.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError("item() needs a single-element tensor")
        return float(self.data.reshape(-1)[0])

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() starts from a scalar output")
        if not self.requires_grad:
            raise ValueError("output does not depend on any tracked tensor")
        _accumulate(self, np.ones_like(self.data))
        for node in _reverse_tape(self):
            if node._backward is not None:
                node._backward()

    def __repr__(self) -> str:
        flag = ", grad" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _reverse_tape(root: Tensor) -> list[Tensor]:
    """Nodes of the tape, root first, every parent after its consumers."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if parent.requires_grad and id(parent) not in seen:
                stack.append((parent, False))
    order.reverse()
    return order


def _wire(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data, requires_grad=any(p.requires_grad for p in parents))
    if out.requires_grad:
        out._parents = tuple(parents)
        out._backward = backward(out)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------- arithmetic

def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(out):
        def run():
            _accumulate(a, _unbroadcast(out.grad, a.data.shape))
            _accumulate(b, _unbroadcast(out.grad, b.data.shape))
        return run
    return _wire(a.data + b.data, (a, b), backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def backward(out):
        def run():
            _accumulate(a, _unbroadcast(out.grad, a.data.shape))
            _accumulate(b, _unbroadcast(-out.grad, b.data.shape))
        return run
    return _wire(a.data - b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(out):
        def run():
            _accumulate(a, _unbroadcast(out.grad * b.data, a.data.shape))
            _accumulate(b, _unbroadcast(out.grad * a.data, b.data.shape))
        return run
    return _wire(a.data * b.data, (a, b), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    def backward(out):
        def run():
            _accumulate(a, out.grad * factor)
        return run
    return _wire(a.data * factor, (a,), backward)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    def backward(out):
        def run():
            if a.requires_grad:
                _accumulate(a, out.grad @ b.data.T)
            if b.requires_grad:
                _accumulate(b, a.data.T @ out.grad)
        return run
    return _wire(a.data @ b.data, (a, b), backward)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None,
           activation: str | None = None) -> Tensor:
    """``x @ w`` with an optional bias row and relu folded into one node.

    Equivalent to composing matmul, add and relu but a single tape entry,
    which keeps deep encoders cheap to replay.
    """
    if activation not in (None, "relu"):
        raise ValueError(f"unsupported activation {activation!r}")
    value = x.data @ w.data
    if b is not None:
        value = value + b.data
    if activation == "relu":
        mask = value > 0.0
        value = value * mask
    parents = (x, w) if b is None else (x, w, b)

    def backward(out):
        def run():
            g = out.grad
            if activation == "relu":
                g = g * mask
            if x.requires_grad:
                _accumulate(x, g @ w.data.T)
            if w.requires_grad:
                _accumulate(w, x.data.T @ g)
            if b is not None and b.requires_grad:
                _accumulate(b, _unbroadcast(g, b.data.shape))
        return run
    return _wire(value, parents, backward)


def attention(h: Tensor, wq: Tensor, wk: Tensor, wv: Tensor,
              scale_factor: float) -> Tensor:
    """Scaled dot-product self-attention over the rows of ``h``.

    Computes ``softmax((h wq)(h wk)^T * scale_factor) @ (h wv)`` as one
    tape node with a hand-derived backward pass.
    """
    q = h.data @ wq.data
    k = h.data @ wk.data
    v = h.data @ wv.data
    s = (q @ k.T) * scale_factor
    s -= s.max(axis=1, keepdims=True)
    e = np.exp(s)
    p = e / e.sum(axis=1, keepdims=True)

    def backward(out):
        def run():
            g = out.grad
            dv = p.T @ g
            dp = g @ v.T
            ds = p * (dp - (dp * p).sum(axis=1, keepdims=True))
            ds *= scale_factor
            dq = ds @ k
            dk = ds.T @ q
            if h.requires_grad:
                _accumulate(h, dq @ wq.data.T + dk @ wk.data.T + dv @ wv.data.T)
            if wq.requires_grad:
                _accumulate(wq, h.data.T @ dq)
            if wk.requires_grad:
                _accumulate(wk, h.data.T @ dk)
            if wv.requires_grad:
                _accumulate(wv, h.data.T @ dv)
        return run
    return _wire(p @ v, (h, wq, wk, wv), backward)


def transpose(a: Tensor) -> Tensor:
    def backward(out):
        def run():
            _accumulate(a, out.grad.T)
        return run
    return _wire(a.data.T, (a,), backward)


# ------------------------------------------------------------- restructuring

def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    widths = [p.data.shape[1] for p in parts]
    splits = np.cumsum(widths)[:-1]

    def backward(out):
        def run():
            for part, g in zip(parts, np.split(out.grad, splits, axis=1)):
                _accumulate(part, g)
        return run
    return _wire(np.concatenate([p.data for p in parts], axis=1), tuple(parts), backward)


def gather_rows(a: Tensor, indices) -> Tensor:
    idx = np.asarray(indices, dtype=np.intp)

    def backward(out):
        def run():
            g = np.zeros_like(a.data)
            np.add.at(g, idx, out.grad)
            _accumulate(a, g)
        return run
    return _wire(a.data[idx], (a,), backward)


def segment_mean(a: Tensor, segment_ids, num_segments: int) -> Tensor:
    """Average the rows of ``a`` that share a segment id.

    Rows with no members come out as zeros. Internally a dense averaging
    matrix keeps the backward pass a plain matmul.
    """
    ids = np.asarray(segment_ids, dtype=np.intp)
    if ids.shape[0] != a.data.shape[0]:
        raise ValueError("one segment id per row required")
    weights = np.zeros((num_segments, a.data.shape[0]))
    counts = np.bincount(ids, minlength=num_segments).astype(np.float64)
    nonempty = counts > 0
    weights[ids, np.arange(ids.shape[0])] = 1.0
    weights[nonempty] /= counts[nonempty, None]

    def backward(out):
        def run():
            _accumulate(a, weights.T @ out.grad)
        return run
    return _wire(weights @ a.data, (a,), backward)


def flatten(a: Tensor) -> Tensor:
    def backward(out):
        def run():
            _accumulate(a, out.grad.reshape(a.data.shape))
        return run
    return _wire(a.data.reshape(-1), (a,), backward)


# --------------------------------------------------------------- nonlinear

def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0

    def backward(out):
        def run():
            _accumulate(a, out.grad * mask)
        return run
    return _wire(a.data * mask, (a,), backward)


def exp(a: Tensor) -> Tensor:
    value = np.exp(a.data)

    def backward(out):
        def run():
            _accumulate(a, out.grad * value)
        return run
    return _wire(value, (a,), backward)


def log(a: Tensor) -> Tensor:
    def backward(out):
        def run():
            _accumulate(a, out.grad / a.data)
        return run
    return _wire(np.log(a.data), (a,), backward)


def clamp(a: Tensor, lo: float | None, hi: float | None) -> Tensor:
    low = -np.inf if lo is None else lo
    high = np.inf if hi is None else hi
    mask = (a.data >= low) & (a.data <= high)

    def backward(out):
        def run():
            _accumulate(a, out.grad * mask)
        return run
    return _wire(np.clip(a.data, low, high), (a,), backward)


def minimum(a: Tensor, b: Tensor) -> Tensor:
    # Ties route the whole gradient to the first argument.
    take_a = a.data <= b.data

    def backward(out):
        def run():
            _accumulate(a, out.grad * take_a)
            _accumulate(b, out.grad * ~take_a)
        return run
    return _wire(np.minimum(a.data, b.data), (a, b), backward)


def softmax(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    value = e / e.sum(axis=1, keepdims=True)

    def backward(out):
        def run():
            inner = (out.grad * value).sum(axis=1, keepdims=True)
            _accumulate(a, value * (out.grad - inner))
        return run
    return _wire(value, (a,), backward)


def log_softmax(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    value = shifted - lse

    def backward(out):
        def run():
            inner = out.grad.sum(axis=1, keepdims=True)
            _accumulate(a, out.grad - np.exp(value) * inner)
        return run
    return _wire(value, (a,), backward)


def l2_normalize_rows(a: Tensor, eps: float = 1e-12) -> Tensor:
    norm = np.sqrt((a.data ** 2).sum(axis=1, keepdims=True))
    denom = np.maximum(norm, eps)
    value = a.data / denom

    def backward(out):
        def run():
            live = norm > eps
            inner = (out.grad * a.data).sum(axis=1, keepdims=True)
            g = out.grad / denom - a.data * (inner / denom ** 3)
            _accumulate(a, np.where(live, g, out.grad / eps))
        return run
    return _wire(value, (a,), backward)


# --------------------------------------------------------------- reductions

def sum_rows(a: Tensor) -> Tensor:
    """Collapse a matrix to a single row by summing the rows together."""
    def backward(out):
        def run():
            _accumulate(a, np.broadcast_to(out.grad, a.data.shape).copy())
        return run
    return _wire(a.data.sum(axis=0, keepdims=True), (a,), backward)


def sum_all(a: Tensor) -> Tensor:
    def backward(out):
        def run():
            _accumulate(a, np.full_like(a.data, float(out.grad)))
        return run
    return _wire(np.asarray(a.data.sum()), (a,), backward)


def mean_all(a: Tensor) -> Tensor:
    size = a.data.size

    def backward(out):
        def run():
            _accumulate(a, np.full_like(a.data, float(out.grad) / size))
        return run
    return _wire(np.asarray(a.data.mean()), (a,), backward)


def mse(pred: Tensor, target: Tensor) -> Tensor:
    diff = pred.data - target.data
    size = diff.size

    def backward(out):
        def run():
            g = float(out.grad) * 2.0 * diff / size
            _accumulate(pred, g)
            _accumulate(target, -g)
        return run
    return _wire(np.asarray((diff ** 2).mean()), (pred, target), backward)


# -------------------------------------------------------------- optimization

class Adam:
    """Adam with bias correction on raw float64 parameter arrays."""

    def __init__(self, params: Sequence[Tensor], lr: float = 3e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> None:
        self.t += 1
        for p, m, v in zip(self.params, self._m, self._v):
            if p.grad is None:
                continue
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            m_hat = m / (1.0 - self.beta1 ** self.t)
            v_hat = v / (1.0 - self.beta2 ** self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def grad_check(fn: Callable[[], Tensor], params: Sequence[Tensor],
               h: float = 1e-5, floor: float = 1e-8) -> float:
    """Worst relative disagreement between the tape and central differences.

    ``fn`` must rebuild its graph from the given parameters on every call
    and return a scalar. The relative error per element is
    |analytic - numeric| / max(floor, |analytic| + |numeric|), so ``floor``
    sets the absolute scale below which both sides count as agreeing on
    zero. Central differences carry roundoff noise near 1e-11 at the
    default step, which a pure relative metric would misread as error
    whenever the true derivative is exactly zero.
    """
    for p in params:
        p.grad = None
    fn().backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]
    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        aflat = a.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            f_plus = fn().item()
            flat[i] = orig - h
            f_minus = fn().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            err = abs(aflat[i] - numeric) / max(floor, abs(aflat[i]) + abs(numeric))
            worst = max(worst, err)
    return worst
