"""A small reverse-mode autodiff over numpy arrays.

Only what the four emulator architectures need: matmul, bias-style
broadcast add, elementwise arithmetic, relu/sigmoid, concat, slicing,
reshape/permute and a mean-square reduction. Values are float32 unless the
inputs are float64 (used by the finite-difference oracles).
"""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data)
        if dtype is not None:
            arr = arr.astype(dtype, copy=False)
        elif arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self._parents: tuple = ()
        self._backward: Callable | None = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self):
        tag = f" {self.name}" if self.name else ""
        return f"Tensor{tag}(shape={self.shape}, dtype={self.dtype}, requires_grad={self.requires_grad})"

    # operator sugar
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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return slice_(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype) if dtype is not None else x)


def _result(data, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.array(g, dtype=t.dtype, copy=True)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``g`` down to ``shape`` (leading axes and size-1 axes)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(a: np.ndarray, b: np.ndarray, op: str):
    try:
        shape = np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}") from None
    return shape


# --------------------------------------------------------------------------
# primitives
# --------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: shape mismatch {a.shape} @ {b.shape}")

    def backward(g):
        if a.requires_grad:
            _accumulate(a, g @ b.data.T)
        if b.requires_grad:
            _accumulate(b, a.data.T @ g)

    return _result(a.data @ b.data, (a, b), backward)


def add(a, b) -> Tensor:
    a = as_tensor(a) if isinstance(a, Tensor) else as_tensor(a, like=b)
    b = as_tensor(b, like=a)
    _check_broadcast(a.data, b.data, "add")

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(g, b.shape))

    return _result(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a = as_tensor(a) if isinstance(a, Tensor) else as_tensor(a, like=b)
    b = as_tensor(b, like=a)
    _check_broadcast(a.data, b.data, "sub")

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.shape))
        _accumulate(b, _unbroadcast(-g, b.shape))

    return _result(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a = as_tensor(a) if isinstance(a, Tensor) else as_tensor(a, like=b)
    b = as_tensor(b, like=a)
    _check_broadcast(a.data, b.data, "mul")

    def backward(g):
        if a.requires_grad:
            _accumulate(a, _unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(g * a.data, b.shape))

    return _result(a.data * b.data, (a, b), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0

    def backward(g):
        _accumulate(x, g * mask)

    return _result(x.data * mask, (x,), backward)


def sigmoid(x: Tensor) -> Tensor:
    # split by sign so exp never overflows
    d = x.data
    e = np.exp(-np.abs(d))
    s = np.where(d >= 0, 1 / (1 + e), e / (1 + e)).astype(d.dtype, copy=False)

    def backward(g):
        _accumulate(x, g * s * (1 - s))

    return _result(s, (x,), backward)


def concat(xs: Sequence[Tensor], axis: int = -1) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    data = np.concatenate([x.data for x in xs], axis=axis)
    bounds = np.cumsum([0] + [x.shape[axis] for x in xs])

    def backward(g):
        for x, lo, hi in zip(xs, bounds[:-1], bounds[1:]):
            if x.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                _accumulate(x, g[tuple(idx)])

    return _result(data, xs, backward)


def slice_(x: Tensor, idx) -> Tensor:
    data = x.data[idx]

    def backward(g):
        full = np.zeros_like(x.data)
        full[idx] += g
        _accumulate(x, full)

    return _result(data, (x,), backward)


def reshape(x: Tensor, shape) -> Tensor:
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise ValueError(f"reshape: cannot view {x.shape} as {shape}") from None

    def backward(g):
        _accumulate(x, g.reshape(x.shape))

    return _result(data, (x,), backward)


def permute(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))

    def backward(g):
        _accumulate(x, g.transpose(inv))

    return _result(x.data.transpose(axes), (x,), backward)


def mean_square(x: Tensor) -> Tensor:
    n = x.data.size

    def backward(g):
        _accumulate(x, (2.0 / n) * g * x.data)

    return _result(np.mean(x.data * x.data, dtype=x.dtype), (x,), backward)


# --------------------------------------------------------------------------
# backward pass
# --------------------------------------------------------------------------


def _topo_order(root: Tensor) -> list[Tensor]:
    order, seen = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, seed: np.ndarray | None = None) -> None:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every leaf that needs it.

    ``loss`` must be a scalar unless an explicit output ``seed`` is given
    (used by attribution to pick one output entry).
    """
    if seed is None:
        if loss.data.size != 1:
            raise ValueError(f"backward needs a scalar loss, got shape {loss.shape}")
        seed = np.ones_like(loss.data)
    if not loss.requires_grad:
        return
    order = _topo_order(loss)
    grads = {id(loss): np.asarray(seed, dtype=loss.dtype)}
    # interior nodes get a fresh buffer, leaves keep accumulating
    for node in order:
        if node._backward is not None:
            node.grad = None
    loss.grad = grads[id(loss)].copy()
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def zero_grad(params) -> None:
    for p in (params.values() if isinstance(params, dict) else params):
        p.grad = None


# --------------------------------------------------------------------------
# recurrent cell
# --------------------------------------------------------------------------


def gru_cell(x_proj: Tensor, h_prev: Tensor, U: Tensor, b_rec: Tensor | None = None,
             candidate=relu) -> Tensor:
    """One GRU step given the input projection ``x W + b`` of width 3K.

    Column blocks are ordered (update z, reset r, candidate). With ``b_rec``
    set, the reset gate acts after the recurrent projection (``reset_after``
    convention) and ``b_rec`` is the recurrent bias.
    """
    k = h_prev.shape[-1]
    if x_proj.shape[-1] != 3 * k or U.shape != (k, 3 * k):
        raise ValueError(f"gru_cell: shape mismatch x_proj {x_proj.shape}, h {h_prev.shape}, U {U.shape}")
    if b_rec is None:
        hzr = h_prev @ U[:, : 2 * k]
        z = sigmoid(x_proj[:, :k] + hzr[:, :k])
        r = sigmoid(x_proj[:, k : 2 * k] + hzr[:, k:])
        cand = candidate(x_proj[:, 2 * k :] + (r * h_prev) @ U[:, 2 * k :])
    else:
        hp = h_prev @ U + b_rec
        z = sigmoid(x_proj[:, :k] + hp[:, :k])
        r = sigmoid(x_proj[:, k : 2 * k] + hp[:, k : 2 * k])
        cand = candidate(x_proj[:, 2 * k :] + r * hp[:, 2 * k :])
    return (1.0 - z) * h_prev + z * cand


# --------------------------------------------------------------------------
# finite-difference oracle
# --------------------------------------------------------------------------


def numerical_grad(f: Callable[[], float], arr: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central differences of scalar ``f()`` w.r.t. every entry of ``arr`` (in place)."""
    g = np.zeros(arr.shape, dtype=np.float64)
    flat = arr.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        step = h * max(1.0, abs(float(old)))
        flat[i] = old + step
        fp = f()
        flat[i] = old - step
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * step)
    return g


def max_rel_error(analytic: np.ndarray, reference: np.ndarray, floor: float = 1e-3) -> float:
    """max_i |a_i - r_i| / max(|a_i|, |r_i|, floor * max|r|)."""
    a = np.asarray(analytic, dtype=np.float64)
    r = np.asarray(reference, dtype=np.float64)
    scale = max(float(np.abs(r).max(initial=0.0)), 1e-30)
    den = np.maximum(np.maximum(np.abs(a), np.abs(r)), floor * scale)
    return float(np.max(np.abs(a - r) / den, initial=0.0))


def check_gradients(loss_fn: Callable[[dict], Tensor], arrays: dict[str, np.ndarray], entries: int | None = None,
                    rng: np.random.Generator | None = None, h: float = 1e-6) -> dict[str, float]:
    """Max relative error of float32 backprop against float64 central differences.

    ``loss_fn`` maps a dict of Tensors to a scalar Tensor. With ``entries``
    set, only that many randomly chosen elements of each array are probed.
    """
    rng = rng or np.random.default_rng(0)
    t32 = {n: Tensor(a, requires_grad=True, dtype=np.float32) for n, a in arrays.items()}
    backward(loss_fn(t32))
    work = {n: np.array(a, dtype=np.float64) for n, a in arrays.items()}
    t64 = {n: Tensor(a, dtype=np.float64) for n, a in work.items()}

    def f():
        return float(loss_fn(t64).data)

    out = {}
    for name, arr in work.items():
        flat = arr.reshape(-1)
        idx = np.arange(flat.size) if entries is None or entries >= flat.size else \
            np.sort(rng.choice(flat.size, entries, replace=False))
        num = np.empty(idx.size)
        for q, i in enumerate(idx):
            old = flat[i]
            step = h * max(1.0, abs(old))
            flat[i] = old + step
            fp = f()
            flat[i] = old - step
            fm = f()
            flat[i] = old
            num[q] = (fp - fm) / (2 * step)
        g = t32[name].grad
        ana = np.zeros(idx.size) if g is None else g.reshape(-1)[idx]
        out[name] = max_rel_error(ana, num)
    return out
