"""Minimal reverse-mode autodiff over dense float64 numpy arrays.

Nodes form an implicit tape through parent links; ``backward()`` on a
scalar seeds the gradient and replays the recorded closures in reverse
topological order. Only the operations needed by the embedding models and
losses are provided.
"""

from __future__ import annotations

import numpy as np

ZERO_NORM_GUARD = 1e-12
_SQRT_GUARD = 1e-12


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcast gradient back to the parent's shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False, _parents=(), _backward_fn=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self.grad = None
        self._parents = _parents
        self._backward_fn = _backward_fn

    @property
    def shape(self):
        return self.data.shape

    def _accum(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        self.grad = g if self.grad is None else self.grad + g

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen or not node.requires_grad:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward_fn is not None:
                node._backward_fn(node.grad)

    # -- arithmetic ---------------------------------------------------------

    @staticmethod
    def _lift(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    def __add__(self, other):
        other = self._lift(other)
        out = Tensor(self.data + other.data, _parents=(self, other))

        def backward(g):
            self._accum(_unbroadcast(g, self.data.shape))
            other._accum(_unbroadcast(g, other.data.shape))

        out._backward_fn = backward
        return out

    __radd__ = __add__

    def __mul__(self, other):
        other = self._lift(other)
        out = Tensor(self.data * other.data, _parents=(self, other))

        def backward(g):
            self._accum(_unbroadcast(g * other.data, self.data.shape))
            other._accum(_unbroadcast(g * self.data, other.data.shape))

        out._backward_fn = backward
        return out

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return self._lift(other) + (-self)

    def __truediv__(self, scalar):
        return self * (1.0 / float(scalar))

    def __matmul__(self, other):
        other = self._lift(other)
        out = Tensor(self.data @ other.data, _parents=(self, other))

        def backward(g):
            self._accum(g @ other.data.T)
            other._accum(self.data.T @ g)

        out._backward_fn = backward
        return out

    # -- shape ops ----------------------------------------------------------

    def reshape(self, *shape):
        src_shape = self.data.shape
        out = Tensor(self.data.reshape(*shape), _parents=(self,))
        out._backward_fn = lambda g: self._accum(g.reshape(src_shape))
        return out

    @property
    def T(self):
        out = Tensor(self.data.T, _parents=(self,))
        out._backward_fn = lambda g: self._accum(g.T)
        return out

    def slice1d(self, start: int, stop: int):
        out = Tensor(self.data[start:stop], _parents=(self,))

        def backward(g):
            full = np.zeros_like(self.data)
            full[start:stop] = g
            self._accum(full)

        out._backward_fn = backward
        return out

    def sum(self, axis=None, keepdims=False):
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), _parents=(self,))

        def backward(g):
            if axis is None:
                self._accum(np.broadcast_to(g, self.data.shape).copy())
                return
            if not keepdims:
                g = np.expand_dims(g, axis)
            self._accum(np.broadcast_to(g, self.data.shape).copy())

        out._backward_fn = backward
        return out

    def mean(self):
        return self.sum() * (1.0 / self.data.size)

    # -- pointwise ----------------------------------------------------------

    def relu(self):
        out = Tensor(np.maximum(self.data, 0.0), _parents=(self,))
        mask = self.data > 0.0
        out._backward_fn = lambda g: self._accum(g * mask)
        return out

    def exp(self):
        out = Tensor(np.exp(self.data), _parents=(self,))
        out._backward_fn = lambda g: self._accum(g * out.data)
        return out

    def log(self):
        out = Tensor(np.log(self.data), _parents=(self,))
        out._backward_fn = lambda g: self._accum(g / self.data)
        return out

    def sqrt(self):
        out = Tensor(np.sqrt(self.data), _parents=(self,))
        # derivative clamped near zero so exact-duplicate inputs stay finite
        out._backward_fn = lambda g: self._accum(
            g * 0.5 / np.maximum(out.data, _SQRT_GUARD)
        )
        return out

    def gather2d(self, rows, cols):
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        out = Tensor(self.data[rows, cols], _parents=(self,))

        def backward(g):
            full = np.zeros_like(self.data)
            np.add.at(full, (rows, cols), g)
            self._accum(full)

        out._backward_fn = backward
        return out


# -- neural net ops ----------------------------------------------------------


def conv3x3(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """3x3 convolution, stride 1, zero padding 1 (same spatial size).

    x: (B, C, H, W), w: (O, C, 3, 3), b: (O,).
    """
    B, C, H, W = x.data.shape
    O = w.data.shape[0]
    xp = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((B, H, W, C, 9))
    for k in range(9):
        dy, dx = divmod(k, 3)
        cols[..., k] = xp[:, :, dy : dy + H, dx : dx + W].transpose(0, 2, 3, 1)
    cols2 = cols.reshape(B * H * W, C * 9)
    wmat = w.data.reshape(O, C * 9)
    y = (cols2 @ wmat.T).reshape(B, H, W, O).transpose(0, 3, 1, 2) + b.data[
        None, :, None, None
    ]
    out = Tensor(y, _parents=(x, w, b))

    def backward(g):
        gm = g.transpose(0, 2, 3, 1).reshape(B * H * W, O)
        w._accum((gm.T @ cols2).reshape(w.data.shape))
        b._accum(gm.sum(axis=0))
        if x.requires_grad:
            dcols = (gm @ wmat).reshape(B, H, W, C, 9)
            dxp = np.zeros_like(xp)
            for k in range(9):
                dy, dx = divmod(k, 3)
                dxp[:, :, dy : dy + H, dx : dx + W] += dcols[..., k].transpose(0, 3, 1, 2)
            x._accum(dxp[:, :, 1 : H + 1, 1 : W + 1])

    out._backward_fn = backward
    return out


def avgpool2(x: Tensor) -> Tensor:
    """2x2 average pooling, stride 2. Spatial dims must be even."""
    B, C, H, W = x.data.shape
    if H % 2 or W % 2:
        raise ValueError(f"avgpool2 needs even spatial dims, got {H}x{W}")
    y = x.data.reshape(B, C, H // 2, 2, W // 2, 2).mean(axis=(3, 5))
    out = Tensor(y, _parents=(x,))

    def backward(g):
        x._accum(np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25)

    out._backward_fn = backward
    return out


def l2norm_rows(x: Tensor) -> Tensor:
    """Row-wise L2 normalization with a zero-norm guard.

    Rows with norm < ZERO_NORM_GUARD map to the first basis vector and
    receive zero gradient.
    """
    norms = np.linalg.norm(x.data, axis=1, keepdims=True)
    degenerate = norms[:, 0] < ZERO_NORM_GUARD
    safe = np.where(degenerate[:, None], 1.0, norms)
    y = x.data / safe
    if degenerate.any():
        y = y.copy()
        y[degenerate] = 0.0
        y[degenerate, 0] = 1.0
    out = Tensor(y, _parents=(x,))

    def backward(g):
        dot = np.sum(g * y, axis=1, keepdims=True)
        dx = (g - y * dot) / safe
        if degenerate.any():
            dx[degenerate] = 0.0
        x._accum(dx)

    out._backward_fn = backward
    return out
