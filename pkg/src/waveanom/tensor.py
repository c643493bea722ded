"""Reverse-mode tensors: float64 arrays on a taped compute graph.

Every operation returns a fresh Tensor whose array is never mutated
afterwards, so exported values are safe to share across threads. Graph
construction and backward() are single-threaded per graph; leaf parameters
are only mutated by the optimizer, between graphs.

Layer conventions:
  * conv2d inputs are (H, W, Cin) or batched (N, H, W, Cin); kernels are
    (kh, kw, Cin, Cout).
  * flip=False is cross-correlation (the usual "conv layer"); flip=True is
    true convolution (kernel spatially flipped).
  * max_pool is non-overlapping and pads with -inf when the window does not
    divide the input; ties route the gradient to the lowest flat index.
"""
from __future__ import annotations

import numpy as np

from . import backend
from .errors import ShapeError


class Tensor:
    """A float64 array plus the tape node that produced it."""

    __slots__ = ("data", "requires_grad", "grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, op="leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in _parents)
        self.grad = None
        self.op = op
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.data.shape}, grad={self.requires_grad})"

    def detach(self):
        """A view-free leaf copy that cuts the graph."""
        return Tensor(self.data.copy())

    def zero_grad(self):
        self.grad = None

    def topo_order(self):
        """Parents-before-children ordering of the graph below this node."""
        order, seen = [], set()
        stack = [(self, False)]
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
                stack.append((p, False))
        return order

    def backward(self):
        """Populate .grad on every reachable tensor with requires_grad."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.data.shape}")
        order = self.topo_order()
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # Arithmetic sugar used by the cells and losses.
    def __add__(self, other):
        return add(self, _as_tensor(other))

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    __rmul__ = __mul__

    def __sub__(self, other):
        return add(self, mul(_as_tensor(other), _as_tensor(-1.0)))

    def __rsub__(self, other):
        return add(_as_tensor(other), mul(self, _as_tensor(-1.0)))

    def __neg__(self):
        return mul(self, _as_tensor(-1.0))


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data):
    """A trainable leaf."""
    return Tensor(data, requires_grad=True)


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad:
        return
    t.grad = g if t.grad is None else t.grad + g


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def gradients(loss: Tensor, params) -> list[np.ndarray]:
    """Zero, backpropagate, and return d(loss)/d(p) for each p in params."""
    for node in loss.topo_order():
        node.grad = None
    loss.backward()
    out = []
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
        out.append(g)
    return out


# ---------------------------------------------------------------------------
# elementwise / shape ops


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, _parents=(a, b), op="add")

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    out._backward = backward
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, _parents=(a, b), op="mul")

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    out._backward = backward
    return out


def log(a: Tensor) -> Tensor:
    out = Tensor(np.log(a.data), _parents=(a,), op="log")

    def backward(g):
        _accumulate(a, g / a.data)

    out._backward = backward
    return out


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values; gradient passes through only where unclamped."""
    inside = (a.data >= lo) & (a.data <= hi)
    out = Tensor(np.clip(a.data, lo, hi), _parents=(a,), op="clip")

    def backward(g):
        _accumulate(a, g * inside)

    out._backward = backward
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.data.reshape(shape), _parents=(a,), op="reshape")

    def backward(g):
        _accumulate(a, g.reshape(a.data.shape))

    out._backward = backward
    return out


def concat(tensors, axis=-1) -> Tensor:
    tensors = tuple(tensors)
    out = Tensor(np.concatenate([t.data for t in tensors], axis=axis),
                 _parents=tensors, op="concat")
    sizes = [t.data.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            _accumulate(t, piece)

    out._backward = backward
    return out


def split_axis(a: Tensor, sizes, axis=-1) -> list[Tensor]:
    """Inverse of concat: split into len(sizes) pieces along an axis."""
    if sum(sizes) != a.data.shape[axis]:
        raise ShapeError(f"split sizes {sizes} do not cover axis of length {a.data.shape[axis]}")
    bounds = np.cumsum(sizes)[:-1]
    pieces = np.split(a.data, bounds, axis=axis)
    outs = []
    for piece_idx, piece in enumerate(pieces):
        out = Tensor(piece, _parents=(a,), op="split")

        def backward(g, piece_idx=piece_idx):
            full = np.zeros_like(a.data)
            start = 0 if piece_idx == 0 else int(bounds[piece_idx - 1])
            sl = [slice(None)] * a.data.ndim
            sl[axis] = slice(start, start + sizes[piece_idx])
            full[tuple(sl)] = g
            _accumulate(a, full)

        out._backward = backward
        outs.append(out)
    return outs


def sum_(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims), _parents=(a,), op="sum")

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape).copy())

    out._backward = backward
    return out


def mean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    out = Tensor(a.data.mean(axis=axis, keepdims=keepdims), _parents=(a,), op="mean")
    count = a.data.size if axis is None else a.data.shape[axis]

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape) / count)

    out._backward = backward
    return out


# ---------------------------------------------------------------------------
# activations


def _sigmoid_stable(x: np.ndarray) -> np.ndarray:
    # Evaluate exp only on the non-overflowing branch.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    y = _sigmoid_stable(a.data)
    out = Tensor(y, _parents=(a,), op="sigmoid")

    def backward(g):
        _accumulate(a, g * y * (1.0 - y))

    out._backward = backward
    return out


def log_sigmoid(a: Tensor) -> Tensor:
    """log(sigmoid(x)) without underflow; gradient 1 - sigmoid(x) never dies."""
    x = a.data
    y = np.where(x >= 0, -np.log1p(np.exp(-np.abs(x))), x - np.log1p(np.exp(-np.abs(x))))
    out = Tensor(y, _parents=(a,), op="log_sigmoid")
    s = _sigmoid_stable(x)

    def backward(g):
        _accumulate(a, g * (1.0 - s))

    out._backward = backward
    return out


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    out = Tensor(y, _parents=(a,), op="tanh")

    def backward(g):
        _accumulate(a, g * (1.0 - y * y))

    out._backward = backward
    return out


def relu(a: Tensor) -> Tensor:
    y = np.maximum(a.data, 0.0)
    out = Tensor(y, _parents=(a,), op="relu")

    def backward(g):
        _accumulate(a, g * (a.data > 0))

    out._backward = backward
    return out


def softmax(a: Tensor, axis=-1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(y, _parents=(a,), op="softmax")

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        _accumulate(a, y * (g - dot))

    out._backward = backward
    return out


_ACTIVATIONS = {"sigmoid": sigmoid, "tanh": tanh, "relu": relu, "softmax": softmax}


def activation(kind: str, a: Tensor, axis=-1) -> Tensor:
    """Dispatch by name; softmax takes the axis, the rest ignore it."""
    if kind not in _ACTIVATIONS:
        raise ShapeError(f"unknown activation {kind!r}")
    if kind == "softmax":
        return softmax(a, axis=axis)
    return _ACTIVATIONS[kind](a)


# ---------------------------------------------------------------------------
# linear / convolution / pooling


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """(n,d)@(d,h) or (d,)@(d,h); b must be a matrix."""
    if b.data.ndim != 2 or a.data.ndim not in (1, 2):
        raise ShapeError(f"matmul expects vector/matrix @ matrix, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(f"inner dimensions disagree: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, _parents=(a, b), op="matmul")

    def backward(g):
        if a.data.ndim == 1:
            _accumulate(a, g @ b.data.T)
            _accumulate(b, np.outer(a.data, g))
        else:
            _accumulate(a, g @ b.data.T)
            _accumulate(b, a.data.T @ g)

    out._backward = backward
    return out


def dense(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """x @ weights + bias."""
    return add(matmul(x, weights), bias)


def _pad_amounts(size, k, stride, padding):
    if padding == "valid":
        return 0, 0
    if padding == "same":
        out = -(-size // stride)  # ceil
        total = max((out - 1) * stride + k - size, 0)
        return total // 2, total - total // 2
    raise ShapeError(f"padding must be 'valid' or 'same', got {padding!r}")


def conv2d(x: Tensor, kernel: Tensor, stride=(1, 1), padding="valid", flip=False) -> Tensor:
    """2-D convolution over the trailing (H, W, Cin) axes.

    flip=False computes cross-correlation; flip=True flips the kernel
    spatially first (true convolution). 'same' padding pads with zeros so
    the output spatial size is ceil(size / stride).
    """
    squeeze = x.data.ndim == 3
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 4 or kernel.data.ndim != 4:
        raise ShapeError(f"conv2d expects (N,H,W,Cin) and (kh,kw,Cin,Cout), got {x.data.shape} and {kernel.data.shape}")
    if xd.shape[3] != kernel.data.shape[2]:
        raise ShapeError(f"input channels {xd.shape[3]} != kernel channels {kernel.data.shape[2]}")
    sh, sw = int(stride[0]), int(stride[1])
    if sh < 1 or sw < 1:
        raise ShapeError("stride must be >= 1")
    kh, kw = kernel.data.shape[0], kernel.data.shape[1]
    ph = _pad_amounts(xd.shape[1], kh, sh, padding)
    pw = _pad_amounts(xd.shape[2], kw, sw, padding)
    if kh > xd.shape[1] + ph[0] + ph[1] or kw > xd.shape[2] + pw[0] + pw[1]:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {xd.shape[1:3]}")

    xp = np.pad(xd, ((0, 0), ph, pw, (0, 0))) if (ph != (0, 0) or pw != (0, 0)) else xd
    kd = kernel.data[::-1, ::-1] if flip else kernel.data
    y = backend.conv2d_forward(xp, np.ascontiguousarray(kd), sh, sw)
    out = Tensor(y[0] if squeeze else y, _parents=(x, kernel), op="conv2d")

    def backward(g):
        gb = g[None] if squeeze else g
        if x.requires_grad:
            gxp = backend.conv2d_grad_input(gb, np.ascontiguousarray(kd), sh, sw,
                                            xp.shape[1], xp.shape[2])
            gx = gxp[:, ph[0]:xp.shape[1] - ph[1], pw[0]:xp.shape[2] - pw[1], :]
            _accumulate(x, gx[0] if squeeze else gx)
        if kernel.requires_grad:
            gk = backend.conv2d_grad_kernel(xp, gb, kh, kw, sh, sw)
            if flip:
                gk = gk[::-1, ::-1].copy()
            _accumulate(kernel, gk)

    out._backward = backward
    return out


def max_pool(x: Tensor, window=(2, 2)) -> Tensor:
    """Non-overlapping max pooling over the (H, W) axes."""
    squeeze = x.data.ndim == 3
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 4:
        raise ShapeError(f"max_pool expects (N,H,W,C) or (H,W,C), got {x.data.shape}")
    wh, ww = int(window[0]), int(window[1])
    n, h, w, c = xd.shape
    if wh > h or ww > w:
        raise ShapeError(f"pool window {wh}x{ww} larger than input {h}x{w}")
    ho, wo = -(-h // wh), -(-w // ww)
    ph, pw = ho * wh - h, wo * ww - w
    xp = np.pad(xd, ((0, 0), (0, ph), (0, pw), (0, 0)), constant_values=-np.inf) if ph or pw else xd
    # (n, ho, wh, wo, ww, c) -> windows flattened row-major so np.argmax's
    # first-max rule is exactly the lowest-flat-index tie break.
    win = xp.reshape(n, ho, wh, wo, ww, c).transpose(0, 1, 3, 5, 2, 4).reshape(n, ho, wo, c, wh * ww)
    idx = win.argmax(axis=-1)
    y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    out = Tensor(y[0] if squeeze else y, _parents=(x,), op="max_pool")

    def backward(g):
        gb = g[None] if squeeze else g
        gwin = np.zeros((n, ho, wo, c, wh * ww))
        np.put_along_axis(gwin, idx[..., None], gb[..., None], axis=-1)
        gp = gwin.reshape(n, ho, wo, c, wh, ww).transpose(0, 1, 4, 2, 5, 3).reshape(n, ho * wh, wo * ww, c)
        gx = gp[:, :h, :w, :]
        _accumulate(x, gx[0] if squeeze else gx)

    out._backward = backward
    return out
