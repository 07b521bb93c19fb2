"""Dense tensors with a reverse-mode gradient tape.

Usage::

    W = Tensor(np.ones((3, 2)), name="W")
    with GradientTape() as tape:
        loss = dm.sum(dm.relu(dm.matmul(X, W)))
    (gW,) = tape.gradient(loss, [W])

Operations record a node on the innermost active tape.  Outside a tape they
only compute values, and when none of their inputs is a :class:`Tensor`
they return plain floats/arrays, so the same formula serves both the
training graph and scalar evaluation.

Binary elementwise ops accept equal shapes, scalars, or a trailing
row-vector (bias) operand; anything else raises ``ShapeMismatch``.
"""

from __future__ import annotations

import numpy as np
from scipy import special as sp

from gchp.errors import DetachedLoss, ShapeMismatch

_TAPES: list["GradientTape"] = []


class Tensor:
    __slots__ = ("value", "parents", "vjp", "name")

    __array_priority__ = 1000  # make ndarray <op> Tensor defer to Tensor

    def __init__(self, value, name: str | None = None):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents: tuple = ()
        self.vjp = None
        self.name = name

    shape = property(lambda self: self.value.shape)
    ndim = property(lambda self: self.value.ndim)

    def item(self) -> float:
        return float(self.value.reshape(-1)[0]) if self.value.size == 1 else float(self.value)

    def numpy(self) -> np.ndarray:
        return self.value

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{tag})"

    __add__ = lambda self, o: add(self, o)
    __radd__ = lambda self, o: add(o, self)
    __sub__ = lambda self, o: sub(self, o)
    __rsub__ = lambda self, o: sub(o, self)
    __mul__ = lambda self, o: mul(self, o)
    __rmul__ = lambda self, o: mul(o, self)
    __truediv__ = lambda self, o: div(self, o)
    __rtruediv__ = lambda self, o: div(o, self)
    __neg__ = lambda self: neg(self)
    __matmul__ = lambda self, o: matmul(self, o)
    __rmatmul__ = lambda self, o: matmul(o, self)
    __abs__ = lambda self: absolute(self)

    def __pow__(self, k):
        if k != 2:
            raise ValueError("only squaring is supported")
        return square(self)


class GradientTape:
    """Records operation nodes in creation (= topological) order."""

    def __init__(self):
        self.nodes: list[Tensor] = []

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, *exc):
        _TAPES.remove(self)
        return False

    def gradient(self, loss: Tensor, params) -> list[np.ndarray]:
        """Gradients of scalar ``loss`` w.r.t. each tensor in ``params``.

        Parameters the loss does not depend on get zero gradients.
        """
        params = list(params)
        if not isinstance(loss, Tensor):
            raise DetachedLoss("loss is not a Tensor")
        if loss.value.size != 1:
            raise ShapeMismatch(f"loss must be a scalar, got shape {loss.shape}")
        recorded = {id(n) for n in self.nodes}
        if id(loss) not in recorded and all(p is not loss for p in params):
            raise DetachedLoss("loss was not computed on this tape")
        grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.value)}
        for node in reversed(self.nodes):
            g = grads.get(id(node))
            if g is None or node.vjp is None:
                continue
            for parent, pg in zip(node.parents, node.vjp(g)):
                if parent is None or pg is None:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg
        return [grads.get(id(p), np.zeros_like(p.value)) for p in params]


# --------------------------------------------------------------- plumbing


def _val(x):
    return x.value if isinstance(x, Tensor) else x


def _any_tensor(*xs) -> bool:
    return any(isinstance(x, Tensor) for x in xs)


def _record(value, inputs, vjp) -> Tensor:
    out = Tensor(value)
    if _TAPES:
        out.parents = tuple(x if isinstance(x, Tensor) else None for x in inputs)
        out.vjp = vjp
        _TAPES[-1].nodes.append(out)
    return out


def _check_elementwise(a, b):
    sa, sb = np.shape(a), np.shape(b)
    if sa == sb or len(sa) == 0 or len(sb) == 0:
        return
    if np.size(a) == 1 or np.size(b) == 1:
        return
    if (len(sb) == 1 and sa[-1:] == sb) or (len(sa) == 1 and sb[-1:] == sa):
        return
    raise ShapeMismatch(f"incompatible shapes {sa} and {sb}")


def _unbroadcast(g, shape):
    if g.shape == tuple(shape):
        return g
    if len(shape) == 0:
        return np.asarray(g.sum())
    lead = g.ndim - len(shape)
    g = g.sum(axis=tuple(range(lead))) if lead > 0 else g
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _binary(a, b, fwd, da, db):
    _check_elementwise(_val(a), _val(b))
    va, vb = _val(a), _val(b)
    out = fwd(va, vb)
    if not _any_tensor(a, b):
        return out
    sa, sb = np.shape(va), np.shape(vb)

    def vjp(g):
        ga = _unbroadcast(da(g, va, vb, out), sa) if isinstance(a, Tensor) else None
        gb = _unbroadcast(db(g, va, vb, out), sb) if isinstance(b, Tensor) else None
        return ga, gb

    return _record(out, (a, b), vjp)


def _unary(x, fwd, dfn):
    v = _val(x)
    out = fwd(v)
    if not isinstance(x, Tensor):
        return out
    return _record(out, (x,), lambda g: (dfn(g, v, out),))


# -------------------------------------------------------------- operations


def add(a, b):
    return _binary(a, b, np.add, lambda g, *_: g, lambda g, *_: g)


def sub(a, b):
    return _binary(a, b, np.subtract, lambda g, *_: g, lambda g, *_: -g)


def mul(a, b):
    return _binary(a, b, np.multiply, lambda g, va, vb, o: g * vb, lambda g, va, vb, o: g * va)


def div(a, b):
    return _binary(
        a, b, np.divide, lambda g, va, vb, o: g / vb, lambda g, va, vb, o: -g * va / (vb * vb)
    )


def neg(x):
    return _unary(x, np.negative, lambda g, v, o: -g)


def square(x):
    return _unary(x, np.square, lambda g, v, o: 2.0 * g * v)


def absolute(x):
    # subgradient 0 at the kink
    return _unary(x, np.abs, lambda g, v, o: g * np.sign(v))


def log(x):
    return _unary(x, np.log, lambda g, v, o: g / v)


def exp(x):
    return _unary(x, np.exp, lambda g, v, o: g * o)


def relu(x):
    return _unary(x, lambda v: np.maximum(v, 0.0), lambda g, v, o: g * (v > 0))


def softplus(x):
    """log(1 + e^x), evaluated without overflow."""
    return _unary(x, lambda v: np.logaddexp(0.0, v), lambda g, v, o: g * sp.expit(v))


def lgamma(x):
    return _unary(x, sp.gammaln, lambda g, v, o: g * sp.digamma(v))


def log_softmax(x):
    """Row-wise log-softmax over the last axis."""

    def fwd(v):
        return v - sp.logsumexp(v, axis=-1, keepdims=True)

    def dfn(g, v, o):
        return g - np.exp(o) * g.sum(axis=-1, keepdims=True)

    return _unary(x, fwd, dfn)


def matmul(a, b):
    """``(m,k)@(k,n)``, batched ``(B,m,k)@(B,k,n)``, or shared weight ``(B,m,k)@(k,n)``."""
    va, vb = _val(a), _val(b)
    if va.ndim < 2 or vb.ndim < 2 or va.shape[-1] != vb.shape[-2]:
        raise ShapeMismatch(f"matmul of {va.shape} and {vb.shape}")
    if vb.ndim == 3 and va.shape[:-2] != vb.shape[:-2]:
        raise ShapeMismatch(f"batched matmul of {va.shape} and {vb.shape}")
    if va.ndim == 2 and vb.ndim == 3:
        raise ShapeMismatch(f"matmul of {va.shape} and {vb.shape}")
    out = va @ vb
    if not _any_tensor(a, b):
        return out

    def vjp(g):
        ga = g @ np.swapaxes(vb, -1, -2) if isinstance(a, Tensor) else None
        gb = None
        if isinstance(b, Tensor):
            if va.ndim == 3 and vb.ndim == 2:
                k, n = vb.shape
                gb = va.reshape(-1, k).T @ g.reshape(-1, n)
            else:
                gb = np.swapaxes(va, -1, -2) @ g
        return ga, gb

    return _record(out, (a, b), vjp)


def concat_cols(a, b):
    """Concatenate along the last axis."""
    va, vb = _val(a), _val(b)
    if va.shape[:-1] != vb.shape[:-1]:
        raise ShapeMismatch(f"cannot concatenate {va.shape} and {vb.shape}")
    out = np.concatenate([va, vb], axis=-1)
    if not _any_tensor(a, b):
        return out
    k = va.shape[-1]
    return _record(out, (a, b), lambda g: (g[..., :k], g[..., k:]))


def mean_pool_rows(x):
    """Mean over the row axis (second to last)."""
    v = _val(x)
    if v.ndim < 2:
        raise ShapeMismatch(f"mean_pool_rows needs a matrix, got {v.shape}")
    m = v.shape[-2]
    return _unary(
        x, lambda v: v.mean(axis=-2), lambda g, v, o: np.repeat(np.expand_dims(g, -2) / m, m, axis=-2)
    )


def reshape(x, shape):
    v = _val(x)
    return _unary(x, lambda v: v.reshape(shape), lambda g, v, o: g.reshape(v.shape))


def flatten_rows(x):
    """``(B, m, w) -> (B, m*w)`` (row-major)."""
    v = _val(x)
    return reshape(x, (v.shape[0], -1))


def total(x):
    """Sum of all entries, as a scalar."""
    return _unary(x, lambda v: np.asarray(v.sum()), lambda g, v, o: np.broadcast_to(g, v.shape).copy())


def pick(x, index):
    """``x[i, index[i]]`` for a ``(B, K)`` matrix."""
    v = _val(x)
    idx = np.asarray(index, dtype=np.int64)
    if v.ndim != 2 or idx.shape != (v.shape[0],):
        raise ShapeMismatch(f"pick from {v.shape} with index {idx.shape}")
    rows = np.arange(v.shape[0])

    def dfn(g, v, o):
        out = np.zeros_like(v)
        out[rows, idx] = g
        return out

    return _unary(x, lambda v: v[rows, idx], dfn)


def value(x):
    """Plain ndarray/float behind ``x``."""
    return _val(x)
