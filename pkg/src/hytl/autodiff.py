"""Minimal dense-tensor reverse-mode autodiff, double precision throughout.

Graphs are built define-by-run: each op links output tensors to their parents
with a backward closure, and `backward` runs one reverse topological sweep.
Broadcasting is restricted to scalars and rank-1 bias over the last axis so
every backward rule stays small and auditable.
"""

from __future__ import annotations

import json
import struct
from contextlib import contextmanager
from typing import Iterable, Sequence

import numpy as np

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Ops executed inside build no graph (forward values only)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class AutodiffError(Exception):
    pass


class ShapeMismatch(AutodiffError):
    pass


class NotScalarLoss(AutodiffError):
    pass


class Tensor:
    __slots__ = ("data", "grad", "parents", "_bw", "name")

    def __init__(self, data, parents=(), bw=None, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        # inside no_grad() the graph is severed at construction time
        self.parents = parents if _GRAD_ENABLED else ()
        self._bw = bw
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.data.shape})"


def const(data, name=None) -> Tensor:
    return Tensor(data, name=name)


def _accum(t: Tensor, g) -> None:
    if t.grad is None:
        t.grad = np.array(g, dtype=np.float64)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, (gs, ss) in enumerate(zip(g.shape, shape)):
        if ss == 1 and gs != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    sa, sb = a.data.shape, b.data.shape
    if sa == sb or sa == () or sb == ():
        return
    # rank-1 bias over the last axis of a higher-rank operand
    if len(sa) > len(sb) == 1 and sa[-1] == sb[0]:
        return
    if len(sb) > len(sa) == 1 and sb[-1] == sa[0]:
        return
    raise ShapeMismatch(f"{op}: incompatible shapes {sa} and {sb}")


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "add")
    out = Tensor(a.data + b.data, (a, b))

    def bw(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(g, b.data.shape))

    out._bw = bw
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "sub")
    out = Tensor(a.data - b.data, (a, b))

    def bw(g):
        _accum(a, _unbroadcast(g, a.data.shape))
        _accum(b, _unbroadcast(-g, b.data.shape))

    out._bw = bw
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "mul")
    out = Tensor(a.data * b.data, (a, b))

    def bw(g):
        _accum(a, _unbroadcast(g * b.data, a.data.shape))
        _accum(b, _unbroadcast(g * a.data, b.data.shape))

    out._bw = bw
    return out


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast(a, b, "div")
    out = Tensor(a.data / b.data, (a, b))

    def bw(g):
        _accum(a, _unbroadcast(g / b.data, a.data.shape))
        _accum(b, _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))

    out._bw = bw
    return out


def scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.data * s, (a,))

    def bw(g):
        _accum(a, g * s)

    out._bw = bw
    return out


def neg(a: Tensor) -> Tensor:
    return scale(a, -1.0)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul: incompatible shapes {a.data.shape} and {b.data.shape}")
    out = Tensor(a.data @ b.data, (a, b))

    def bw(g):
        _accum(a, g @ b.data.T)
        _accum(b, a.data.T @ g)

    out._bw = bw
    return out


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeMismatch(f"transpose expects rank 2, got {a.data.shape}")
    out = Tensor(a.data.T.copy(), (a,))

    def bw(g):
        _accum(a, g.T)

    out._bw = bw
    return out


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    out = Tensor(a.data.reshape(shape), (a,))

    def bw(g):
        _accum(a, g.reshape(a.data.shape))

    out._bw = bw
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y, (a,))

    def bw(g):
        _accum(a, g * (1.0 - y * y))

    out._bw = bw
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = 0.5 * (1.0 + np.tanh(0.5 * a.data))
    out = Tensor(y, (a,))

    def bw(g):
        _accum(a, g * y * (1.0 - y))

    out._bw = bw
    return out


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    out = Tensor(np.where(mask, a.data, 0.0), (a,))

    def bw(g):
        _accum(a, g * mask)

    out._bw = bw
    return out


def exp(a: Tensor) -> Tensor:
    y = np.exp(a.data)
    out = Tensor(y, (a,))

    def bw(g):
        _accum(a, g * y)

    out._bw = bw
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), (a,))

    def bw(g):
        _accum(a, g / a.data)

    out._bw = bw
    return out


def softplus(a: Tensor) -> Tensor:
    out = Tensor(np.logaddexp(0.0, a.data), (a,))

    def bw(g):
        _accum(a, g * 0.5 * (1.0 + np.tanh(0.5 * a.data)))

    out._bw = bw
    return out


def square(a: Tensor) -> Tensor:
    out = Tensor(a.data * a.data, (a,))

    def bw(g):
        _accum(a, g * 2.0 * a.data)

    out._bw = bw
    return out


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y, (a,))

    def bw(g):
        _accum(a, y * (g - (g * y).sum(axis=axis, keepdims=True)))

    out._bw = bw
    return out


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse
    out = Tensor(y, (a,))

    def bw(g):
        _accum(a, g - np.exp(y) * g.sum(axis=axis, keepdims=True))

    out._bw = bw
    return out


def layernorm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to mean 0 / variance 1, then scale and shift."""
    if eps <= 0:
        raise AutodiffError("layernorm eps must be positive")
    d = x.data.shape[-1]
    if gain.data.shape != (d,) or bias.data.shape != (d,):
        raise ShapeMismatch(
            f"layernorm: gain/bias {gain.data.shape}/{bias.data.shape} vs last axis {d}"
        )
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = Tensor(xhat * gain.data + bias.data, (x, gain, bias))

    def bw(g):
        dxhat = g * gain.data
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        _accum(x, dx)
        _accum(gain, _unbroadcast(g * xhat, gain.data.shape))
        _accum(bias, _unbroadcast(g, bias.data.shape))

    out._bw = bw
    return out


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    parts = list(tensors)
    out = Tensor(np.concatenate([t.data for t in parts], axis=axis), tuple(parts))
    sizes = [t.data.shape[axis] for t in parts]

    def bw(g):
        start = 0
        for t, size in zip(parts, sizes):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(start, start + size)
            _accum(t, g[tuple(idx)])
            start += size

    out._bw = bw
    return out


def slice_(a: Tensor, key) -> Tensor:
    out = Tensor(a.data[key], (a,))

    def bw(g):
        full = np.zeros_like(a.data)
        full[key] += g
        _accum(a, full)

    out._bw = bw
    return out


def gather(a: Tensor, rows) -> Tensor:
    """Select rows of a rank-2 tensor by integer index (duplicates allowed)."""
    rows = np.asarray(rows, dtype=np.int64)
    if a.data.ndim != 2:
        raise ShapeMismatch(f"gather expects rank 2, got {a.data.shape}")
    out = Tensor(a.data[rows], (a,))

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, rows, g)
        _accum(a, full)

    out._bw = bw
    return out


def mean(a: Tensor, axis: int | None = None) -> Tensor:
    out = Tensor(a.data.mean(axis=axis), (a,))
    n = a.data.size if axis is None else a.data.shape[axis]

    def bw(g):
        if axis is None:
            _accum(a, np.full(a.data.shape, g / n))
        else:
            _accum(a, np.broadcast_to(np.expand_dims(g, axis) / n, a.data.shape).copy())

    out._bw = bw
    return out


def sum_(a: Tensor, axis: int | None = None) -> Tensor:
    out = Tensor(a.data.sum(axis=axis), (a,))

    def bw(g):
        if axis is None:
            _accum(a, np.full(a.data.shape, g))
        else:
            _accum(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    out._bw = bw
    return out


def minimum(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeMismatch(f"minimum: shapes differ {a.data.shape} vs {b.data.shape}")
    take_a = a.data <= b.data
    out = Tensor(np.where(take_a, a.data, b.data), (a, b))

    def bw(g):
        _accum(a, g * take_a)
        _accum(b, g * ~take_a)

    out._bw = bw
    return out


def detach(a: Tensor) -> Tensor:
    return Tensor(a.data.copy())


def _toposort(root: Tensor) -> list[Tensor]:
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
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor) -> list[Tensor]:
    """Accumulate d(loss)/d(node) into .grad for every reachable node.

    Returns the visited nodes so callers can clear intermediate grads before
    reusing a shared subgraph in another backward pass.
    """
    if loss.data.shape != ():
        raise NotScalarLoss(f"loss must be scalar, got shape {loss.data.shape}")
    order = _toposort(loss)
    loss.grad = np.ones(())
    for node in reversed(order):
        # nodes built under no_grad keep a bw closure but have no parents
        if node._bw is not None and node.parents and node.grad is not None:
            node._bw(node.grad)
    return order


def clear_graph(nodes: Iterable[Tensor]) -> None:
    for node in nodes:
        node.grad = None


# ---------------------------------------------------------------------------
# Parameters and Adam.


class ParamStore:
    """Named parameter tensors plus per-parameter Adam state."""

    def __init__(self) -> None:
        self.params: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, array) -> Tensor:
        if name in self.params:
            raise AutodiffError(f"duplicate parameter name {name!r}")
        t = Tensor(np.array(array, dtype=np.float64), name=name)
        self.params[name] = t
        self._m[name] = np.zeros_like(t.data)
        self._v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def items(self):
        return self.params.items()

    def zero_grads(self) -> None:
        for p in self.params.values():
            p.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        return {
            name: (p.grad if p.grad is not None else np.zeros_like(p.data))
            for name, p in self.params.items()
        }

    def set_grads(self, grads: dict[str, np.ndarray]) -> None:
        for name, g in grads.items():
            self.params[name].grad = g

    def copy_values_from(self, other: "ParamStore") -> None:
        for name, p in self.params.items():
            np.copyto(p.data, other.params[name].data)

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            np.copyto(p.data, arrays[name])


def adam_step(
    store: ParamStore,
    lr: float = 3e-4,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One Adam update from accumulated grads; grads are cleared afterwards."""
    store.step_count += 1
    t = store.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in store.params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        m = store._m[name]
        v = store._v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        p.grad = None


def soft_update(target: ParamStore, online: ParamStore, tau: float) -> None:
    """target <- tau * online + (1 - tau) * target, elementwise."""
    if not 0.0 < tau <= 1.0:
        raise AutodiffError(f"tau must be in (0, 1], got {tau}")
    for name, p in target.params.items():
        p.data *= 1.0 - tau
        p.data += tau * online.params[name].data


# ---------------------------------------------------------------------------
# Checkpoint serialization.

_MAGIC = b"HYTL"
_VERSION = 1


def save_checkpoint(path, params: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Flat binary: magic, version, JSON metadata block, parameter records."""
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(struct.pack("<I", len(params)))
        for name, arr in params.items():
            arr = np.asarray(arr, dtype="<f8")  # keeps rank-0 shape; tobytes is C-order
            name_bytes = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_bytes)))
            fh.write(name_bytes)
            fh.write(struct.pack("<B", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise AutodiffError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise AutodiffError(f"{path}: unsupported checkpoint version {version}")
        (meta_len,) = struct.unpack("<I", fh.read(4))
        meta = json.loads(fh.read(meta_len).decode("utf-8"))
        (count,) = struct.unpack("<I", fh.read(4))
        params: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(rank))
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(size * 8), dtype="<f8").reshape(shape)
            params[name] = data.astype(np.float64)
        return params, meta
