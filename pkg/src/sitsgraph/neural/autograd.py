"""Minimal reverse-mode autodiff over dense 2-D arrays.

Forward ops append (output, backward closure) records to the active tape in
execution order; ``Tape.backward`` replays them in exact reverse order, and
every gradient accumulates with += so parameters reused across ops collect
contributions from every use. Arrays are float32 by default; building the
graph in float64 (for finite-difference checks) just means passing float64
data in.
"""

from __future__ import annotations

import contextlib

import numpy as np

from ..errors import AllIgnored, ShapeMismatch


class Tensor:
    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data)
        if arr.ndim != 2:
            raise ShapeMismatch(f"tensors are 2-D, got shape {arr.shape}")
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.data.shape

    def accumulate(self, grad: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += grad

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


_ACTIVE_TAPE: "Tape | None" = None


class Tape:
    """Operation record in execution order."""

    def __init__(self):
        self._records: list[tuple[Tensor, callable]] = []

    def __enter__(self):
        global _ACTIVE_TAPE
        self._prev = _ACTIVE_TAPE
        _ACTIVE_TAPE = self
        return self

    def __exit__(self, *exc):
        global _ACTIVE_TAPE
        _ACTIVE_TAPE = self._prev
        return False

    def __len__(self):
        return len(self._records)

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ShapeMismatch(f"backward needs a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        for out, fn in reversed(self._records):
            if out.grad is None:
                continue
            fn(out.grad)


@contextlib.contextmanager
def no_grad():
    global _ACTIVE_TAPE
    prev = _ACTIVE_TAPE
    _ACTIVE_TAPE = None
    try:
        yield
    finally:
        _ACTIVE_TAPE = prev


def _emit(out: Tensor, fn) -> Tensor:
    if out.requires_grad and _ACTIVE_TAPE is not None:
        _ACTIVE_TAPE._records.append((out, fn))
    return out


def _needs(*tensors: Tensor) -> bool:
    return any(t.requires_grad for t in tensors)


# ---------------------------------------------------------------------------
# primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul {a.shape} @ {b.shape}")
    out = Tensor(a.data @ b.data, requires_grad=_needs(a, b))

    def backward(g):
        if a.requires_grad:
            a.accumulate(g @ b.data.T)
        if b.requires_grad:
            b.accumulate(a.data.T @ g)

    return _emit(out, backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise add; b may be a (1, k) row broadcast over a's rows."""
    if a.data.shape != b.data.shape and not (b.data.shape == (1, a.data.shape[1])):
        raise ShapeMismatch(f"add {a.shape} + {b.shape}")
    out = Tensor(a.data + b.data, requires_grad=_needs(a, b))

    def backward(g):
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(g if b.data.shape == g.shape else g.sum(axis=0, keepdims=True))

    return _emit(out, backward)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(f"sub {a.shape} - {b.shape}")
    out = Tensor(a.data - b.data, requires_grad=_needs(a, b))

    def backward(g):
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(-g)

    return _emit(out, backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(f"mul {a.shape} * {b.shape}")
    out = Tensor(a.data * b.data, requires_grad=_needs(a, b))

    def backward(g):
        if a.requires_grad:
            a.accumulate(g * b.data)
        if b.requires_grad:
            b.accumulate(g * a.data)

    return _emit(out, backward)


def relu(x: Tensor) -> Tensor:
    out = Tensor(np.maximum(x.data, 0), requires_grad=x.requires_grad)
    mask = x.data > 0

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * mask)

    return _emit(out, backward)


def concat_cols(parts: list[Tensor]) -> Tensor:
    rows = {p.data.shape[0] for p in parts}
    if len(rows) != 1:
        raise ShapeMismatch(f"concat over mismatched row counts {rows}")
    out = Tensor(np.concatenate([p.data for p in parts], axis=1), requires_grad=_needs(*parts))
    widths = [p.data.shape[1] for p in parts]

    def backward(g):
        off = 0
        for p, w in zip(parts, widths):
            if p.requires_grad:
                p.accumulate(g[:, off : off + w])
            off += w

    return _emit(out, backward)


def concat_rows(parts: list[Tensor]) -> Tensor:
    cols = {p.data.shape[1] for p in parts}
    if len(cols) != 1:
        raise ShapeMismatch(f"concat over mismatched column counts {cols}")
    out = Tensor(np.concatenate([p.data for p in parts], axis=0), requires_grad=_needs(*parts))
    heights = [p.data.shape[0] for p in parts]

    def backward(g):
        off = 0
        for p, h in zip(parts, heights):
            if p.requires_grad:
                p.accumulate(g[off : off + h])
            off += h

    return _emit(out, backward)


def slice_rows(x: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start <= stop <= x.data.shape[0]):
        raise ShapeMismatch(f"slice [{start}:{stop}] outside {x.data.shape[0]} rows")
    out = Tensor(x.data[start:stop].copy(), requires_grad=x.requires_grad)

    def backward(g):
        if x.requires_grad:
            acc = np.zeros_like(x.data)
            acc[start:stop] = g
            x.accumulate(acc)

    return _emit(out, backward)


def gather_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    out = Tensor(x.data[idx], requires_grad=x.requires_grad)

    def backward(g):
        if x.requires_grad:
            acc = np.zeros_like(x.data)
            np.add.at(acc, idx, g)
            x.accumulate(acc)

    return _emit(out, backward)


def scatter_add_rows(x: Tensor, idx: np.ndarray, n_rows: int) -> Tensor:
    """out[j] = sum of x rows whose idx equals j (zero rows if none)."""
    idx = np.asarray(idx, dtype=np.int64)
    if idx.shape[0] != x.data.shape[0]:
        raise ShapeMismatch(f"{idx.shape[0]} indices for {x.data.shape[0]} rows")
    data = np.zeros((n_rows, x.data.shape[1]), dtype=x.data.dtype)
    np.add.at(data, idx, x.data)
    out = Tensor(data, requires_grad=x.requires_grad)

    def backward(g):
        if x.requires_grad:
            x.accumulate(g[idx])

    return _emit(out, backward)


def scale_rows(x: Tensor, coeff: np.ndarray) -> Tensor:
    """Multiply each row by a constant coefficient."""
    coeff = np.asarray(coeff, dtype=x.data.dtype).reshape(-1, 1)
    if coeff.shape[0] != x.data.shape[0]:
        raise ShapeMismatch(f"{coeff.shape[0]} coefficients for {x.data.shape[0]} rows")
    out = Tensor(x.data * coeff, requires_grad=x.requires_grad)

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * coeff)

    return _emit(out, backward)


def mean_all(x: Tensor) -> Tensor:
    out = Tensor(np.array([[x.data.mean()]], dtype=x.data.dtype), requires_grad=x.requires_grad)
    n = x.data.size

    def backward(g):
        if x.requires_grad:
            x.accumulate(np.full_like(x.data, float(g[0, 0]) / n))

    return _emit(out, backward)


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    out = Tensor(np.clip(x.data, lo, hi), requires_grad=x.requires_grad)
    mask = (x.data >= lo) & (x.data <= hi)

    def backward(g):
        if x.requires_grad:
            x.accumulate(g * mask)

    return _emit(out, backward)


# ---------------------------------------------------------------------------
# fused losses and normalization


def batchnorm(
    x: Tensor,
    gamma: Tensor,
    beta: Tensor,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    train: bool,
    momentum: float = 0.1,
    eps: float = 1e-5,
) -> Tensor:
    """Column-wise batch normalization over the row (node) batch.

    Train mode normalizes with batch moments (population variance) and updates
    the running stats in place; eval mode uses the running stats.
    """
    if gamma.data.shape != (1, x.data.shape[1]) or beta.data.shape != (1, x.data.shape[1]):
        raise ShapeMismatch("gamma/beta must be (1, dim) rows")
    if train:
        mean = x.data.mean(axis=0, keepdims=True)
        var = x.data.var(axis=0, keepdims=True)
        running_mean *= 1.0 - momentum
        running_mean += momentum * mean[0]
        running_var *= 1.0 - momentum
        running_var += momentum * var[0]
    else:
        mean = running_mean[None, :]
        var = running_var[None, :]
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mean) * inv
    out = Tensor(xhat * gamma.data + beta.data, requires_grad=_needs(x, gamma, beta))
    n = x.data.shape[0]

    def backward(g):
        if gamma.requires_grad:
            gamma.accumulate((g * xhat).sum(axis=0, keepdims=True))
        if beta.requires_grad:
            beta.accumulate(g.sum(axis=0, keepdims=True))
        if x.requires_grad:
            gy = g * gamma.data
            if train:
                x.accumulate(
                    inv * (gy - gy.mean(axis=0, keepdims=True) - xhat * (gy * xhat).mean(axis=0, keepdims=True))
                )
            else:
                x.accumulate(gy * inv)

    return _emit(out, backward)


def cross_entropy(logits: Tensor, labels: np.ndarray, ignore_index: int = -1) -> Tensor:
    """Mean negative log-likelihood over non-ignored rows, max-stabilized."""
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.shape[0] != logits.data.shape[0]:
        raise ShapeMismatch(f"{labels.shape[0]} labels for {logits.data.shape[0]} rows")
    keep = labels != ignore_index
    n_valid = int(keep.sum())
    if n_valid == 0:
        raise AllIgnored("every row is ignored")
    if labels[keep].min() < 0 or labels[keep].max() >= logits.data.shape[1]:
        raise ShapeMismatch("label outside [0, n_classes)")

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsumexp
    rows = np.nonzero(keep)[0]
    nll = -logp[rows, labels[rows]]
    out = Tensor(np.array([[nll.mean()]], dtype=logits.data.dtype), requires_grad=logits.requires_grad)
    softmax_data = np.exp(logp)

    def backward(g):
        if logits.requires_grad:
            grad = softmax_data.copy()
            grad[rows, labels[rows]] -= 1.0
            grad[~keep] = 0.0
            logits.accumulate(grad * (float(g[0, 0]) / n_valid))

    return _emit(out, backward)


def huber(pred: Tensor, target: np.ndarray, delta: float = 1.0) -> Tensor:
    """Mean Huber loss: 0.5 r^2 inside |r| <= delta, linear outside."""
    target = np.asarray(target, dtype=pred.data.dtype)
    if target.shape != pred.data.shape:
        raise ShapeMismatch(f"target {target.shape} vs pred {pred.shape}")
    r = pred.data - target
    absr = np.abs(r)
    quad = absr <= delta
    vals = np.where(quad, 0.5 * r * r, delta * (absr - 0.5 * delta))
    out = Tensor(np.array([[vals.mean()]], dtype=pred.data.dtype), requires_grad=pred.requires_grad)
    n = pred.data.size

    def backward(g):
        if pred.requires_grad:
            dr = np.where(quad, r, delta * np.sign(r))
            pred.accumulate(dr * (float(g[0, 0]) / n))

    return _emit(out, backward)
