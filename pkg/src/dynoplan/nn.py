"""Self-contained dense numerics: 2-D tensors with reverse-mode autodiff,
MLPs, single-head attention, cross-entropy, Adam, and model-file I/O.

Everything is float64 and deterministic: fixed summation order, no threads,
no in-place aliasing of values that participate in a recorded graph.
"""

from __future__ import annotations

import struct
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph recording (inference mode)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """Row-major float64 matrix with an optional gradient buffer."""

    __slots__ = ("value", "grad", "_parents", "_bwd")

    def __init__(self, value, parents: tuple = (), bwd: Callable | None = None):
        v = np.asarray(value, dtype=np.float64)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2:
            raise ValueError("Tensor is strictly 2-D")
        self.value = v
        self.grad: np.ndarray | None = None
        self._parents = parents if _GRAD_ENABLED else ()
        self._bwd = bwd if _GRAD_ENABLED else None

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.value.shape})"


def _acc(t: Tensor, g: np.ndarray) -> None:
    # First contribution copies (callers may reuse the buffer); later ones add.
    if t.grad is None:
        t.grad = g.copy()
    else:
        t.grad += g


def backward(loss: Tensor) -> None:
    """Reverse-mode accumulation from a recorded scalar loss."""
    if loss.value.shape != (1, 1):
        raise ValueError("backward expects a 1x1 loss tensor")
    if loss._bwd is None and not loss._parents:
        raise ValueError("backward called on a tensor with no recorded graph")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, done = stack.pop()
        if done:
            topo.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    loss.grad = np.ones((1, 1))
    for node in reversed(topo):
        if node._bwd is not None:
            if node.grad is None:
                node.grad = np.zeros_like(node.value)
            node._bwd(node.grad)


# -- primitive ops -----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape[1] != b.value.shape[0]:
        raise ValueError(f"matmul shape mismatch {a.shape} @ {b.shape}")
    out = a.value @ b.value

    def bwd(g):
        _acc(a, g @ b.value.T)
        _acc(b, a.value.T @ g)

    return Tensor(out, (a, b), bwd)


def transpose(a: Tensor) -> Tensor:
    def bwd(g):
        _acc(a, g.T)

    return Tensor(a.value.T, (a,), bwd)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.value.shape != b.value.shape:
        raise ValueError(f"add shape mismatch {a.shape} vs {b.shape}")

    def bwd(g):
        _acc(a, g)
        _acc(b, g)

    return Tensor(a.value + b.value, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    def bwd(g):
        _acc(a, g)
        _acc(b, -g)

    return Tensor(a.value - b.value, (a, b), bwd)


def scale(a: Tensor, c: float) -> Tensor:
    def bwd(g):
        _acc(a, g * c)

    return Tensor(a.value * c, (a,), bwd)


def add_bias(a: Tensor, b: Tensor) -> Tensor:
    """Broadcast a (1, c) bias row over the rows of a."""
    if b.value.shape != (1, a.value.shape[1]):
        raise ValueError(f"bias shape {b.shape} does not match {a.shape}")

    def bwd(g):
        _acc(a, g)
        _acc(b, g.sum(axis=0, keepdims=True))

    return Tensor(a.value + b.value, (a, b), bwd)


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0.0

    def bwd(g):
        _acc(a, g * mask)

    return Tensor(np.where(mask, a.value, 0.0), (a,), bwd)


def maximum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise max; exact ties route the subgradient to `a`."""
    take_a = a.value >= b.value

    def bwd(g):
        _acc(a, g * take_a)
        _acc(b, g * ~take_a)

    return Tensor(np.where(take_a, a.value, b.value), (a, b), bwd)


def concat_cols(parts: Sequence[Tensor]) -> Tensor:
    widths = [p.value.shape[1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def bwd(g):
        for p, lo, hi in zip(parts, offsets, offsets[1:]):
            _acc(p, g[:, lo:hi])

    return Tensor(np.concatenate([p.value for p in parts], axis=1), tuple(parts), bwd)


def slice_cols(a: Tensor, lo: int, hi: int) -> Tensor:
    def bwd(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.value)
        a.grad[:, lo:hi] += g

    return Tensor(a.value[:, lo:hi].copy(), (a,), bwd)


class GatherPlan:
    """Precomputed scatter-add plan for a fixed row-index array.

    Sorting the indices once lets the backward pass use reduceat instead of
    np.add.at, which is slow for the large repeated-index gathers in message
    passing.
    """

    def __init__(self, idx: np.ndarray):
        idx = np.asarray(idx, dtype=np.intp)
        self.idx = idx
        self.perm = np.argsort(idx, kind="stable")
        sorted_idx = idx[self.perm]
        boundary = np.ones(len(idx), dtype=bool)
        boundary[1:] = sorted_idx[1:] != sorted_idx[:-1]
        self.starts = np.flatnonzero(boundary)
        self.rows = sorted_idx[self.starts]


def gather_rows(a: Tensor, idx: np.ndarray, plan: GatherPlan | None = None) -> Tensor:
    if plan is None:
        idx = np.asarray(idx, dtype=np.intp)

        def bwd(g):
            if a.grad is None:
                a.grad = np.zeros_like(a.value)
            np.add.at(a.grad, idx, g)

        return Tensor(a.value[idx], (a,), bwd)

    def bwd_planned(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.value)
        sums = np.add.reduceat(g[plan.perm], plan.starts, axis=0)
        a.grad[plan.rows] += sums

    return Tensor(a.value[plan.idx], (a,), bwd_planned)


def segment_max_rows(a: Tensor, starts: np.ndarray) -> Tensor:
    """Max over contiguous row groups; group g covers rows starts[g]:starts[g+1].

    Ties within a group route the subgradient to the first achieving row.
    """
    starts = np.asarray(starts, dtype=np.intp)
    n_rows = a.value.shape[0]
    if starts[0] != 0 or np.any(np.diff(starts) <= 0) or starts[-1] >= n_rows:
        raise ValueError("starts must begin at 0, strictly increase, and cover all rows")
    bounds = np.append(starts, n_rows)
    out = np.maximum.reduceat(a.value, starts, axis=0)

    def bwd(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.value)
        cols = np.arange(a.value.shape[1])
        for gi in range(len(starts)):
            s, e = bounds[gi], bounds[gi + 1]
            am = s + np.argmax(a.value[s:e], axis=0)  # first max per column
            a.grad[am, cols] += g[gi]

    return Tensor(out, (a,), bwd)


def row_softmax(a: Tensor) -> Tensor:
    m = a.value.max(axis=1, keepdims=True)
    e = np.exp(a.value - m)
    s = e / e.sum(axis=1, keepdims=True)

    def bwd(g):
        dot = (g * s).sum(axis=1, keepdims=True)
        _acc(a, s * (g - dot))

    return Tensor(s, (a,), bwd)


def cross_entropy_from_logits(logits: Tensor, target: int) -> Tensor:
    """-log softmax(logits)[target] for a 1 x c logit row, log-sum-exp stabilized."""
    c = logits.value.shape[1]
    if logits.value.shape[0] != 1:
        raise ValueError("logits must be a single row")
    if not 0 <= target < c:
        raise ValueError(f"target {target} out of range for {c} classes")
    row = logits.value[0]
    m = row.max()
    z = np.exp(row - m)
    total = z.sum()
    loss = np.log(total) + m - row[target]

    def bwd(g):
        p = z / total
        p = p.copy()
        p[target] -= 1.0
        _acc(logits, g[0, 0] * p[None, :])

    return Tensor([[loss]], (logits,), bwd)


def attention(K: Tensor, Q: Tensor, V: Tensor) -> Tensor:
    """softmax(Q K^T / sqrt(d_k)) V with row-wise softmax."""
    if K.value.shape[1] != Q.value.shape[1]:
        raise ValueError("key/query width mismatch")
    if K.value.shape[0] != V.value.shape[0]:
        raise ValueError("key/value count mismatch")
    d_k = K.value.shape[1]
    scores = scale(matmul(Q, transpose(K)), 1.0 / np.sqrt(d_k))
    return matmul(row_softmax(scores), V)


def mean_of(losses: Sequence[Tensor]) -> Tensor:
    total = losses[0]
    for l in losses[1:]:
        total = add(total, l)
    return scale(total, 1.0 / len(losses))


# -- MLPs ---------------------------------------------------------------------


@dataclass
class Mlp:
    """Affine layers with ReLU between them and none after the last."""

    weights: list[Tensor]
    biases: list[Tensor]

    @property
    def in_dim(self) -> int:
        return self.weights[0].value.shape[0]


def mlp_init(dims: Sequence[int], rng: np.random.Generator) -> Mlp:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases."""
    weights, biases = [], []
    for din, dout in zip(dims, dims[1:]):
        bound = 1.0 / np.sqrt(din)
        weights.append(Tensor(rng.uniform(-bound, bound, (din, dout))))
        biases.append(Tensor(rng.uniform(-bound, bound, (1, dout))))
    return Mlp(weights, biases)


def mlp_forward(mlp: Mlp, x: Tensor) -> Tensor:
    if x.value.shape[1] != mlp.in_dim:
        raise ValueError(f"input width {x.shape[1]} != mlp in-dim {mlp.in_dim}")
    n = len(mlp.weights)
    for i, (w, b) in enumerate(zip(mlp.weights, mlp.biases)):
        x = add_bias(matmul(x, w), b)
        if i < n - 1:
            x = relu(x)
    return x


# -- Adam ---------------------------------------------------------------------


class Adam:
    """Standard Adam with bias correction; deterministic given update order."""

    def __init__(self, params: dict[str, Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.value) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.value) for k, p in params.items()}

    def step(self) -> None:
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for name, p in self.params.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.value)
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.value = p.value - self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None


# -- model file format ---------------------------------------------------------

MODEL_MAGIC = b"DYNO"
MODEL_VERSION = 1


def save_blocks(path, blocks: dict[str, np.ndarray], header: dict) -> None:
    """Named float64 parameter blocks behind a JSON header."""
    import json

    hdr = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(struct.pack("<I", MODEL_VERSION))
        f.write(struct.pack("<I", len(hdr)))
        f.write(hdr)
        f.write(struct.pack("<I", len(blocks)))
        for name, arr in blocks.items():
            a = np.ascontiguousarray(arr, dtype="<f8")
            nb = name.encode()
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<II", a.shape[0], a.shape[1]))
            f.write(a.tobytes())


def load_blocks(path) -> tuple[dict, dict[str, np.ndarray]]:
    import json

    with open(path, "rb") as f:
        if f.read(4) != MODEL_MAGIC:
            raise ValueError("not a model file (bad magic)")
        (version,) = struct.unpack("<I", f.read(4))
        if version != MODEL_VERSION:
            raise ValueError(f"unsupported model format version {version}")
        (hlen,) = struct.unpack("<I", f.read(4))
        header = json.loads(f.read(hlen).decode())
        (nblocks,) = struct.unpack("<I", f.read(4))
        blocks: dict[str, np.ndarray] = {}
        for _ in range(nblocks):
            (nlen,) = struct.unpack("<I", f.read(4))
            name = f.read(nlen).decode()
            rows, cols = struct.unpack("<II", f.read(8))
            buf = f.read(rows * cols * 8)
            blocks[name] = np.frombuffer(buf, dtype="<f8").reshape(rows, cols).copy()
    return header, blocks
