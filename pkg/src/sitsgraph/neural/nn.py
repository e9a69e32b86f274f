"""Layers, graph convolutions, optimizer and schedulers on top of the tape."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch
from . import autograd as ag
from .autograd import Tensor

relu = ag.relu
cross_entropy = ag.cross_entropy


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, dtype=np.float32) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class Linear:
    def __init__(
        self,
        rng: np.random.Generator | None,
        fan_in: int,
        fan_out: int,
        bias: bool = True,
        dtype=np.float32,
        zero: bool = False,
    ):
        if zero or rng is None:
            w = np.zeros((fan_in, fan_out), dtype=dtype)
        else:
            w = glorot(rng, fan_in, fan_out, dtype)
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros((1, fan_out), dtype=dtype), requires_grad=True) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        out = ag.matmul(x, self.weight)
        if self.bias is not None:
            out = ag.add(out, self.bias)
        return out

    def parameters(self) -> list[Tensor]:
        return [self.weight] + ([self.bias] if self.bias is not None else [])


class MLP:
    """Stack of linears with ReLU between (none after the last).

    ``zero_last`` zeroes only the output layer, making the MLP start as the
    zero map while keeping trainable signal in the hidden layer; residual
    branches built this way begin as identities.
    """

    def __init__(self, rng, dims: list[int], dtype=np.float32, zero: bool = False, zero_last: bool = False):
        if len(dims) < 2:
            raise ShapeMismatch("an MLP needs at least input and output dims")
        last = len(dims) - 2
        self.layers = [
            Linear(rng, a, b, dtype=dtype, zero=zero or (zero_last and i == last))
            for i, (a, b) in enumerate(zip(dims[:-1], dims[1:]))
        ]

    def __call__(self, x: Tensor) -> Tensor:
        for i, layer in enumerate(self.layers):
            x = layer(x)
            if i < len(self.layers) - 1:
                x = ag.relu(x)
        return x

    def parameters(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer.parameters()]


class BatchNorm:
    def __init__(self, dim: int, momentum: float = 0.1, eps: float = 1e-5, dtype=np.float32):
        self.gamma = Tensor(np.ones((1, dim), dtype=dtype), requires_grad=True)
        self.beta = Tensor(np.zeros((1, dim), dtype=dtype), requires_grad=True)
        self.running_mean = np.zeros(dim, dtype=dtype)
        self.running_var = np.ones(dim, dtype=dtype)
        self.momentum = momentum
        self.eps = eps

    def __call__(self, x: Tensor, train: bool) -> Tensor:
        return ag.batchnorm(
            x,
            self.gamma,
            self.beta,
            self.running_mean,
            self.running_var,
            train=train,
            momentum=self.momentum,
            eps=self.eps,
        )

    def parameters(self) -> list[Tensor]:
        return [self.gamma, self.beta]


# ---------------------------------------------------------------------------
# graph convolutions; edges are (src, dst) index arrays of an undirected
# relation listed once per pair


def _symmetrize(edges: tuple[np.ndarray, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    src, dst = (np.asarray(e, dtype=np.int64) for e in edges)
    return np.concatenate([src, dst]), np.concatenate([dst, src])


def gcn_conv(x: Tensor, edges: tuple[np.ndarray, np.ndarray], w: Tensor, bias: Tensor | None = None) -> Tensor:
    """Symmetric-normalized propagation with self-loops: D^-1/2 (A+I) D^-1/2 X W."""
    n = x.data.shape[0]
    s, d = _symmetrize(edges)
    loops = np.arange(n, dtype=np.int64)
    s = np.concatenate([s, loops])
    d = np.concatenate([d, loops])
    deg = np.bincount(d, minlength=n).astype(x.data.dtype)
    coeff = 1.0 / np.sqrt(deg[s] * deg[d])
    h = ag.matmul(x, w)
    msg = ag.scale_rows(ag.gather_rows(h, s), coeff)
    out = ag.scatter_add_rows(msg, d, n)
    if bias is not None:
        out = ag.add(out, bias)
    return out


def sage_conv(x: Tensor, edges: tuple[np.ndarray, np.ndarray], w_self: Tensor, w_neigh: Tensor) -> Tensor:
    """out_i = x_i W_self + mean_{j in N(i)} x_j W_neigh; empty neighborhoods
    contribute a zero mean."""
    n = x.data.shape[0]
    s, d = _symmetrize(edges)
    deg = np.bincount(d, minlength=n).astype(x.data.dtype)
    neigh_sum = ag.scatter_add_rows(ag.gather_rows(x, s), d, n)
    neigh_mean = ag.scale_rows(neigh_sum, 1.0 / np.maximum(deg, 1.0))
    return ag.add(ag.matmul(x, w_self), ag.matmul(neigh_mean, w_neigh))


# ---------------------------------------------------------------------------
# optimizer


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: dict,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> list[np.ndarray]:
    """Bias-corrected Adam update, in place on ``params``.

    ``state`` starts empty and carries the step counter plus first/second
    moment buffers between calls.
    """
    if not state:
        state["step"] = 0
        state["m"] = [np.zeros_like(p) for p in params]
        state["v"] = [np.zeros_like(p) for p in params]
    state["step"] += 1
    t = state["step"]
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params


class Adam:
    def __init__(self, params: list[Tensor], lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state: dict = {}

    def step(self) -> None:
        grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in self.params]
        adam_step(
            [p.data for p in self.params],
            grads,
            self.state,
            lr=self.lr,
            beta1=self.beta1,
            beta2=self.beta2,
            eps=self.eps,
        )

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


class PlateauScheduler:
    """Multiplies the learning rate by ``factor`` when the monitored value
    fails to improve for ``patience`` consecutive epochs."""

    def __init__(self, optimizer: Adam, factor: float = 0.1, patience: int = 5):
        self.optimizer = optimizer
        self.factor = factor
        self.patience = patience
        self.best = np.inf
        self.stale = 0

    def step(self, value: float) -> bool:
        if value < self.best:
            self.best = value
            self.stale = 0
            return False
        self.stale += 1
        if self.stale >= self.patience:
            self.optimizer.lr *= self.factor
            self.stale = 0
            return True
        return False
