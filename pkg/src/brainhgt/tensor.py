"""A small double-precision tensor with tape-free reverse-mode autodiff.

Every operation returns a new :class:`Tensor` that remembers its parents and
a closure computing the vector-Jacobian product.  ``Tensor.backward`` walks
the graph in reverse topological order, accumulates ``.grad`` on leaves that
require it, and then frees the graph.
"""

import contextlib

import numpy as np

from . import kernels
from .errors import NotScalar

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")
    __array_priority__ = 100

    def __init__(self, data, requires_grad=False, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def numpy(self):
        return self.data

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag}, requires_grad={self.requires_grad})"

    # graph construction -------------------------------------------------

    @staticmethod
    def _make(data, parents, backward):
        parents = tuple(p for p in parents if isinstance(p, Tensor))
        need = _grad_enabled and any(p.requires_grad for p in parents)
        out = Tensor(data, requires_grad=need)
        if need:
            out._parents = parents
            out._backward = backward
        return out

    def _accum(self, g):
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad=None):
        if grad is None:
            if self.data.size != 1:
                raise NotScalar(f"backward() needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        order = []
        seen = set()
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
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accum(grad)
        for node in reversed(order):
            if node._backward is None:
                continue
            if node.grad is not None:
                node._backward(node.grad)
            node._parents = ()
            node._backward = None
            node.grad = None

    # operators ------------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, other):
        return power(self, other)

    def __rpow__(self, other):
        return power(other, self)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes or None)

    @property
    def T(self):
        return swapaxes(self, -1, -2)


def as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _data(x):
    return x.data if isinstance(x, Tensor) else np.asarray(x, dtype=np.float64)


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def back(g):
        a._accum(_unbroadcast(g, a.shape))
        b._accum(_unbroadcast(g, b.shape))
    return Tensor._make(out, (a, b), back)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def back(g):
        a._accum(_unbroadcast(g, a.shape))
        b._accum(_unbroadcast(-g, b.shape))
    return Tensor._make(out, (a, b), back)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def back(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.shape))
    return Tensor._make(out, (a, b), back)


def div(a, b):
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data

    def back(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g / b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-g * out / b.data, b.shape))
    return Tensor._make(out, (a, b), back)


def power(a, b):
    """``a ** b`` with gradients for both base and exponent.

    The exponent gradient uses ``log(a)`` and is only defined for ``a > 0``.
    """
    a, b = as_tensor(a), as_tensor(b)
    out = np.power(a.data, b.data)

    def back(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data * np.power(a.data, b.data - 1.0), a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * out * np.log(a.data), b.shape))
    return Tensor._make(out, (a, b), back)


def exp(x):
    x = as_tensor(x)
    out = np.exp(x.data)
    return Tensor._make(out, (x,), lambda g: x._accum(g * out))


def log(x):
    x = as_tensor(x)
    return Tensor._make(np.log(x.data), (x,), lambda g: x._accum(g / x.data))


def relu(x):
    x = as_tensor(x)
    mask = x.data > 0
    return Tensor._make(np.where(mask, x.data, 0.0), (x,), lambda g: x._accum(g * mask))


def sigmoid(x):
    x = as_tensor(x)
    out = _sigmoid(x.data)
    return Tensor._make(out, (x,), lambda g: x._accum(g * out * (1.0 - out)))


def _sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    ez = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))


# ---------------------------------------------------------------------------
# linear algebra and shape
# ---------------------------------------------------------------------------

def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    flat = a.ndim > 2 and b.ndim == 2
    if flat:
        # one GEMM over all leading axes instead of a batched product
        out = (a.data.reshape(-1, a.shape[-1]) @ b.data).reshape(*a.shape[:-1], b.shape[-1])
    else:
        out = a.data @ b.data

    def back(g):
        if a.requires_grad:
            ga = g @ np.swapaxes(b.data, -1, -2) if b.ndim > 1 else np.multiply.outer(g, b.data)
            a._accum(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            if flat:
                gb = a.data.reshape(-1, a.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            elif a.ndim == 1:
                gb = np.multiply.outer(a.data, g)
            else:
                gb = np.swapaxes(a.data, -1, -2) @ g
            b._accum(_unbroadcast(gb, b.shape))
    return Tensor._make(out, (a, b), back)


def reshape(x, shape):
    x = as_tensor(x)
    orig = x.shape
    return Tensor._make(x.data.reshape(shape), (x,), lambda g: x._accum(g.reshape(orig)))


def transpose(x, axes=None):
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inv = np.argsort(axes)
    return Tensor._make(np.transpose(x.data, axes), (x,),
                        lambda g: x._accum(np.transpose(g, inv)))


def swapaxes(x, a1, a2):
    x = as_tensor(x)
    return Tensor._make(np.swapaxes(x.data, a1, a2), (x,),
                        lambda g: x._accum(np.swapaxes(g, a1, a2)))


def getitem(x, idx):
    x = as_tensor(x)

    key = idx if isinstance(idx, tuple) else (idx,)
    fancy = any(isinstance(i, (list, np.ndarray)) for i in key)

    def back(g):
        full = np.zeros_like(x.data)
        if fancy:
            np.add.at(full, idx, g)
        else:
            full[idx] = g
        x._accum(full)
    return Tensor._make(x.data[idx], (x,), back)


def concat(xs, axis=0):
    xs = [as_tensor(x) for x in xs]
    out = np.concatenate([x.data for x in xs], axis=axis)
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]

    def back(g):
        for x, part in zip(xs, np.split(g, bounds, axis=axis)):
            x._accum(part)
    return Tensor._make(out, xs, back)


def tsum(x, axis=None, keepdims=False):
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accum(np.broadcast_to(g, x.shape))
    return Tensor._make(out, (x,), back)


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    out = x.data.mean(axis=axis, keepdims=keepdims)
    count = x.data.size // max(out.size, 1)

    def back(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accum(np.broadcast_to(g / count, x.shape))
    return Tensor._make(out, (x,), back)


# ---------------------------------------------------------------------------
# normalising maps
# ---------------------------------------------------------------------------

def softmax_np(z, axis=-1):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


def softmax(x, axis=-1):
    x = as_tensor(x)
    out = softmax_np(x.data, axis)

    def back(g):
        x._accum(out * (g - (g * out).sum(axis=axis, keepdims=True)))
    return Tensor._make(out, (x,), back)


def log_softmax(x, axis=-1):
    x = as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    out = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

    def back(g):
        x._accum(g - np.exp(out) * g.sum(axis=axis, keepdims=True))
    return Tensor._make(out, (x,), back)


def entmax15_np(z, axis=-1):
    """Exact 1.5-entmax along ``axis`` via the sorted-threshold solve."""
    z = np.moveaxis(np.asarray(z, dtype=np.float64), axis, -1)
    shape = z.shape
    flat = z.reshape(-1, shape[-1])
    x = (flat - flat.max(axis=1, keepdims=True)) / 2.0
    tau = kernels.entmax15_threshold(x)
    p = np.clip(x - tau[:, None], 0.0, None) ** 2
    return np.moveaxis(p.reshape(shape), -1, axis)


def entmax15(x, axis=-1):
    x = as_tensor(x)
    out = entmax15_np(x.data, axis)

    def back(g):
        # Jacobian restricted to the support: diag(s) - s s^T / sum(s), s = sqrt(p)
        s = np.sqrt(out)
        gs = g * s
        q = gs.sum(axis=axis, keepdims=True) / s.sum(axis=axis, keepdims=True)
        x._accum(gs - q * s)
    return Tensor._make(out, (x,), back)


def layer_norm(x, weight, bias, eps=1e-5):
    """Normalise over the last axis, then scale and shift."""
    x = as_tensor(x)
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    w, b = as_tensor(weight), as_tensor(bias)
    out = xhat * w.data + b.data

    def back(g):
        if w.requires_grad:
            w._accum(_unbroadcast(g * xhat, w.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.shape))
        if x.requires_grad:
            gh = g * w.data
            n = x.shape[-1]
            gx = inv / n * (n * gh - gh.sum(axis=-1, keepdims=True)
                            - xhat * (gh * xhat).sum(axis=-1, keepdims=True))
            x._accum(gx)
    return Tensor._make(out, (x, w, b), back)


def dropout(x, rate, rng, training=True):
    """Inverted dropout; identity when ``training`` is false or ``rate == 0``."""
    if not training or rate <= 0.0:
        return x
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return mul(x, keep)


def cross_entropy(logits, labels):
    """Mean negative log-likelihood of integer ``labels`` under ``logits``."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    onehot = np.zeros(logits.shape)
    onehot[np.arange(len(labels)), labels] = 1.0
    return mul(tsum(mul(log_softmax(logits, axis=-1), onehot)), -1.0 / len(labels))


# ---------------------------------------------------------------------------
# test oracle
# ---------------------------------------------------------------------------

def finite_diff_grad(f, x, h=1e-5):
    """Central-difference gradient of a scalar function of an array."""
    x = np.array(x, dtype=np.float64, copy=True)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + h
        fp = float(f(x))
        flat[i] = old - h
        fm = float(f(x))
        flat[i] = old
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad
