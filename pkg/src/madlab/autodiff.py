"""Reverse-mode automatic differentiation on numpy arrays.

A Tensor wraps an ndarray plus the closure that routes its output
gradient to its parents. `backward(loss)` walks the graph once and
returns a dict {param Tensor: gradient array}; nodes are never mutated,
so a graph can be inspected after the call.

Supported primitives: matmul, 2-D convolution (stride 1, same padding),
elementwise add/sub/mul/div/exp/log/tanh/relu/sqrt/clip/power,
reduce sum/mean, broadcasting, slicing, concat, reshape/transpose,
2x2 average pooling and nearest upsampling.

Every primitive checks its output for non-finite values and raises
NumericFault naming the op. Disable via `set_check_finite(False)` only
in code that performs its own checks.
"""

import math

import numpy as np

from .errors import NumericFault

_CHECK_FINITE = True


def set_check_finite(flag):
    global _CHECK_FINITE
    _CHECK_FINITE = bool(flag)


def _check(data, op):
    if _CHECK_FINITE:
        # sum() propagates NaN and Inf, so one reduction covers the array
        if not math.isfinite(float(np.sum(data, dtype=np.float64))):
            raise NumericFault(op)
    return data


class Tensor:
    """Graph node. `is_param` marks trainable leaves."""

    __slots__ = ("data", "parents", "_bwd", "op", "is_param", "needs_grad")

    def __init__(self, data, parents=(), bwd=None, op="leaf", is_param=False, dtype=None):
        if not isinstance(data, np.ndarray):
            data = np.asarray(data, dtype=dtype or np.float64)
        elif dtype is not None and data.dtype != dtype:
            data = data.astype(dtype)
        self.data = data
        self.parents = parents
        self._bwd = bwd
        self.op = op
        self.is_param = is_param
        self.needs_grad = is_param or any(p.needs_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def __repr__(self):
        return f"Tensor(op={self.op}, shape={self.data.shape})"

    # operator sugar; constants are wrapped on the fly
    def __add__(self, other):
        return add(self, _wrap(other, self.dtype))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _wrap(other, self.dtype))

    def __rsub__(self, other):
        return sub(_wrap(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _wrap(other, self.dtype))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, _wrap(other, self.dtype))

    def __rtruediv__(self, other):
        return div(_wrap(other, self.dtype), self)

    def __neg__(self):
        return mul(self, _wrap(-1.0, self.dtype))

    def __pow__(self, k):
        return power(self, k)

    def __getitem__(self, idx):
        return slice_(self, idx)


def _wrap(x, dtype):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


def tensor(data, dtype=None):
    """Constant leaf."""
    return Tensor(data, dtype=dtype)


def param(data, dtype=None):
    """Trainable leaf."""
    return Tensor(data, is_param=True, dtype=dtype)


def _unbroadcast(grad, shape):
    """Sum `grad` down to `shape` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _node(data, parents, bwd, op):
    live = [p for p in parents if p.needs_grad]
    if not live:
        return Tensor(_check(data, op), op=op)
    return Tensor(_check(data, op), parents=tuple(parents), bwd=bwd, op=op)


# ---------------------------------------------------------------- elementwise

def add(a, b):
    def bwd(g, acc):
        _acc(acc, a, _unbroadcast(g, a.data.shape))
        _acc(acc, b, _unbroadcast(g, b.data.shape))

    return _node(a.data + b.data, (a, b), bwd, "add")


def sub(a, b):
    def bwd(g, acc):
        _acc(acc, a, _unbroadcast(g, a.data.shape))
        _acc(acc, b, _unbroadcast(-g, b.data.shape))

    return _node(a.data - b.data, (a, b), bwd, "sub")


def mul(a, b):
    def bwd(g, acc):
        _acc(acc, a, _unbroadcast(g * b.data, a.data.shape))
        _acc(acc, b, _unbroadcast(g * a.data, b.data.shape))

    return _node(a.data * b.data, (a, b), bwd, "mul")


def div(a, b):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = a.data / b.data

    def bwd(g, acc):
        _acc(acc, a, _unbroadcast(g / b.data, a.data.shape))
        _acc(acc, b, _unbroadcast(-g * out / b.data, b.data.shape))

    return _node(out, (a, b), bwd, "div")


def exp(a):
    with np.errstate(over="ignore"):
        out = np.exp(a.data)

    def bwd(g, acc):
        _acc(acc, a, g * out)

    return _node(out, (a,), bwd, "exp")


def log(a):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(a.data)

    def bwd(g, acc):
        _acc(acc, a, g / a.data)

    return _node(out, (a,), bwd, "log")


def tanh(a):
    out = np.tanh(a.data)

    def bwd(g, acc):
        _acc(acc, a, g * (1.0 - out * out))

    return _node(out, (a,), bwd, "tanh")


def relu(a):
    mask = a.data > 0

    def bwd(g, acc):
        _acc(acc, a, g * mask)

    return _node(a.data * mask, (a,), bwd, "relu")


def sqrt(a):
    with np.errstate(invalid="ignore"):
        out = np.sqrt(a.data)

    def bwd(g, acc):
        _acc(acc, a, g * 0.5 / out)

    return _node(out, (a,), bwd, "sqrt")


def power(a, k):
    """a**k for a constant exponent k."""
    k = float(k)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = a.data ** k

    def bwd(g, acc):
        _acc(acc, a, g * k * a.data ** (k - 1.0))

    return _node(out, (a,), bwd, "power")


def square(a):
    def bwd(g, acc):
        _acc(acc, a, g * 2.0 * a.data)

    return _node(a.data * a.data, (a,), bwd, "square")


def clip(a, lo, hi):
    """Clamp; gradient passes only where values are strictly inside the bounds."""
    out = np.clip(a.data, lo, hi)
    mask = (a.data > lo) & (a.data < hi)

    def bwd(g, acc):
        _acc(acc, a, g * mask)

    return _node(out, (a,), bwd, "clip")


# ---------------------------------------------------------------- reductions

def sum_(a, axis=None, keepdims=False):
    out = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g, acc):
        if axis is None:
            _acc(acc, a, np.broadcast_to(g, a.data.shape).copy())
        else:
            if not keepdims:
                g = np.expand_dims(g, axis)
            _acc(acc, a, np.broadcast_to(g, a.data.shape).copy())

    return _node(out, (a,), bwd, "sum")


def mean(a, axis=None, keepdims=False):
    out = a.data.mean(axis=axis, keepdims=keepdims)
    scale = a.data.size / out.size

    def bwd(g, acc):
        if axis is None:
            gg = np.broadcast_to(g, a.data.shape)
        else:
            gg = np.expand_dims(g, axis) if not keepdims else g
            gg = np.broadcast_to(gg, a.data.shape)
        _acc(acc, a, gg / scale)

    return _node(out, (a,), bwd, "mean")


# ---------------------------------------------------------------- structure

def reshape(a, shape):
    def bwd(g, acc):
        _acc(acc, a, g.reshape(a.data.shape))

    return _node(a.data.reshape(shape), (a,), bwd, "reshape")


def transpose(a, axes=None):
    ax = axes if axes is not None else tuple(reversed(range(a.data.ndim)))
    inv = np.argsort(ax)

    def bwd(g, acc):
        _acc(acc, a, g.transpose(inv))

    return _node(a.data.transpose(ax), (a,), bwd, "transpose")


def slice_(a, idx):
    """Basic (non-fancy) indexing."""
    out = a.data[idx]

    def bwd(g, acc):
        full = np.zeros_like(a.data)
        full[idx] = g
        _acc(acc, a, full)

    return _node(out, (a,), bwd, "slice")


def concat(tensors, axis=0):
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def bwd(g, acc):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _acc(acc, t, g[tuple(sl)])

    return _node(out, tuple(tensors), bwd, "concat")


def broadcast_to(a, shape):
    def bwd(g, acc):
        _acc(acc, a, _unbroadcast(g, a.data.shape))

    return _node(np.broadcast_to(a.data, shape).copy(), (a,), bwd, "broadcast")


# ---------------------------------------------------------------- linear alg

def matmul(a, b):
    out = a.data @ b.data

    def bwd(g, acc):
        _acc(acc, a, g @ b.data.T)
        _acc(acc, b, a.data.T @ g)

    return _node(out, (a, b), bwd, "matmul")


# ---------------------------------------------------------------- conv / pool

def _im2col(x, k=3):
    """(N,C,H,W) -> (N*H*W, C*k*k) patches under same-padding."""
    n, c, h, w = x.shape
    p = k // 2
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(2, 3))
    # win: (N, C, H, W, k, k) -> (N, H, W, C, k, k)
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n * h * w, c * k * k)


def conv2d(x, w, b=None):
    """Stride-1 same-padding convolution.

    x: (N, Cin, H, W); w: (Cout, Cin, k, k) with k odd; b: (Cout,) or None.
    """
    n, cin, h, wd = x.data.shape
    cout, cin2, k, k2 = w.data.shape
    if cin != cin2 or k != k2 or k % 2 != 1:
        raise ValueError(f"conv2d shape mismatch: x {x.data.shape}, w {w.data.shape}")
    if k == 1:
        # pointwise conv is a channel matmul; avoid the patch copy
        xr = x.data.transpose(0, 2, 3, 1).reshape(-1, cin)
        out = xr @ w.data.reshape(cout, cin).T
    else:
        cols = _im2col(x.data, k)
        out = cols @ w.data.reshape(cout, -1).T
        del cols
    if b is not None:
        out = out + b.data
    out = out.reshape(n, h, wd, cout).transpose(0, 3, 1, 2)

    def bwd(g, acc):
        gr = g.transpose(0, 2, 3, 1).reshape(-1, cout)  # (N*H*W, Cout)
        if w.needs_grad:
            if k == 1:
                xr2 = x.data.transpose(0, 2, 3, 1).reshape(-1, cin)
                gw = (gr.T @ xr2).reshape(cout, cin, 1, 1)
            else:
                cols2 = _im2col(x.data, k)  # recomputed to cap peak memory
                gw = (gr.T @ cols2).reshape(cout, cin, k, k)
                del cols2
            _acc(acc, w, gw)
        if b is not None and b.needs_grad:
            _acc(acc, b, gr.sum(axis=0))
        if x.needs_grad:
            # dx = conv(g, w flipped and in/out channels swapped)
            wt = w.data[:, :, ::-1, ::-1].transpose(1, 0, 2, 3)  # (Cin, Cout, k, k)
            if k == 1:
                gx = gr @ wt.reshape(cin, cout).T
            else:
                gcols = _im2col(g, k)
                gx = gcols @ wt.reshape(cin, -1).T
                del gcols
            _acc(acc, x, gx.reshape(n, h, wd, cin).transpose(0, 3, 1, 2))

    parents = (x, w) if b is None else (x, w, b)
    return _node(out, parents, bwd, "conv2d")


def avg_pool2(x):
    """2x2 average pooling, stride 2. H and W must be even."""
    n, c, h, w = x.data.shape
    r = x.data.reshape(n, c, h // 2, 2, w // 2, 2)
    out = r.mean(axis=(3, 5))

    def bwd(g, acc):
        gx = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25
        _acc(acc, x, gx)

    return _node(out, (x,), bwd, "avg_pool2")


def upsample2(x):
    """2x nearest-neighbour upsampling."""
    out = np.repeat(np.repeat(x.data, 2, axis=2), 2, axis=3)

    def bwd(g, acc):
        n, c, h, w = g.shape
        _acc(acc, x, g.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5)))

    return _node(out, (x,), bwd, "upsample2")


# ---------------------------------------------------------------- backward

def _acc(acc, node, grad):
    if not node.needs_grad:
        return
    key = id(node)
    if key in acc:
        acc[key] = acc[key] + grad
    else:
        acc[key] = grad


def _toposort(root):
    order, stack, seen = [], [(root, False)], set()
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.needs_grad and id(p) not in seen:
                stack.append((p, False))
    return order  # parents before children


def backward(loss):
    """Gradient of a scalar loss w.r.t. every reachable param leaf.

    Returns {param Tensor: ndarray}. The graph is left untouched.
    """
    if loss.data.shape != ():
        raise ValueError(f"backward() needs a scalar root, got shape {loss.data.shape}")
    acc = {id(loss): np.ones((), dtype=loss.data.dtype)}
    grads = {}
    for node in reversed(_toposort(loss)):
        g = acc.pop(id(node), None)
        if g is None:
            continue
        if _CHECK_FINITE and not math.isfinite(float(np.sum(g, dtype=np.float64))):
            raise NumericFault(node.op, "gradient")
        if node.is_param:
            grads[node] = grads[node] + g if node in grads else g
        if node._bwd is not None:
            node._bwd(g, acc)
    return grads
