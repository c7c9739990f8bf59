"""Minimal reverse-mode differentiation over dense numpy arrays.

Holds exactly the operations the training losses need: matmul, add,
hadamard, concat/stack, relu, exp, log, l2_normalize, softmax, reductions
and indexing. Gradients are accumulated by walking the recorded operation
graph in reverse topological order; the graph is rebuilt on every forward
pass (define-by-run), so there is no hidden state between steps.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Raised when operand shapes do not conform to an operation."""


class Tensor:
    """A dense array plus an optional gradient slot.

    Arithmetic on tensors records backward rules on the implicit tape
    (parent links); ``backward`` on a scalar output fills ``grad`` on
    every reachable tensor that requires it.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad) or any(
            p.requires_grad for p in _parents
        )
        self._parents = _parents if self.requires_grad else ()
        self._backward = _backward if self.requires_grad else None

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # -- operator sugar -------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, -1.0)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __truediv__(self, other):
        if isinstance(other, Tensor):
            raise TypeError("tensor/tensor division is not a supported op")
        return mul(self, 1.0 / other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def backward(self):
        backward(self)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def _accumulate(tensor, grad):
    if not tensor.requires_grad:
        return
    if tensor.grad is None:
        tensor.grad = np.zeros_like(tensor.data)
    tensor.grad += grad


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _toposort(root):
    order, seen, stack = [], set(), [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss):
    """Fill ``grad`` on every tensor the scalar ``loss`` depends on."""
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.data.shape}")
    order = _toposort(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def grad(loss, leaves):
    """Gradient of ``loss`` for each leaf; zeros for leaves off the loss path."""
    for leaf in leaves:
        leaf.grad = None
    backward(loss)
    return [
        leaf.grad if leaf.grad is not None else np.zeros_like(leaf.data)
        for leaf in leaves
    ]


# -- primitive operations ----------------------------------------------


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out_data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add: shapes {a.data.shape} and {b.data.shape} do not broadcast")

    def rule(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=rule)


def mul(a, b):
    """Hadamard (elementwise) product, broadcasting as numpy does."""
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out_data = a.data * b.data
    except ValueError:
        raise ShapeError(f"hadamard: shapes {a.data.shape} and {b.data.shape} do not broadcast")

    def rule(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return Tensor(out_data, _parents=(a, b), _backward=rule)


def matmul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise ShapeError(f"matmul: only 1-D/2-D operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(f"matmul: inner dims differ for {a.data.shape} @ {b.data.shape}")
    out_data = a.data @ b.data

    def rule(g):
        if a.data.ndim == 1 and b.data.ndim == 2:
            _accumulate(a, b.data @ g)
            _accumulate(b, np.outer(a.data, g))
        elif a.data.ndim == 2 and b.data.ndim == 1:
            _accumulate(a, np.outer(g, b.data))
            _accumulate(b, a.data.T @ g)
        elif a.data.ndim == 1 and b.data.ndim == 1:
            _accumulate(a, g * b.data)
            _accumulate(b, g * a.data)
        else:
            _accumulate(a, g @ b.data.T)
            _accumulate(b, a.data.T @ g)

    return Tensor(out_data, _parents=(a, b), _backward=rule)


def transpose(a):
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"transpose: need a matrix, got shape {a.data.shape}")

    def rule(g):
        _accumulate(a, g.T)

    return Tensor(a.data.T, _parents=(a,), _backward=rule)


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: empty input list")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def rule(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accumulate(t, g[tuple(sl)])

    return Tensor(out_data, _parents=tuple(tensors), _backward=rule)


def stack(tensors):
    """Stack equal-shape vectors into rows of a matrix."""
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("stack: empty input list")
    shapes = {t.data.shape for t in tensors}
    if len(shapes) != 1:
        raise ShapeError(f"stack: mixed shapes {sorted(shapes)}")
    out_data = np.stack([t.data for t in tensors])

    def rule(g):
        for i, t in enumerate(tensors):
            _accumulate(t, g[i])

    return Tensor(out_data, _parents=tuple(tensors), _backward=rule)


def getitem(a, idx):
    a = _as_tensor(a)
    out_data = a.data[idx]

    def rule(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        _accumulate(a, full)

    return Tensor(out_data, _parents=(a,), _backward=rule)


def relu(a):
    a = _as_tensor(a)
    mask = a.data > 0  # subgradient at 0 is taken as 0

    def rule(g):
        _accumulate(a, g * mask)

    return Tensor(a.data * mask, _parents=(a,), _backward=rule)


def exp(a):
    a = _as_tensor(a)
    out_data = np.exp(a.data)

    def rule(g):
        _accumulate(a, g * out_data)

    return Tensor(out_data, _parents=(a,), _backward=rule)


def log(a):
    a = _as_tensor(a)

    def rule(g):
        _accumulate(a, g / a.data)

    return Tensor(np.log(a.data), _parents=(a,), _backward=rule)


def tsum(a, axis=None):
    a = _as_tensor(a)
    out_data = a.data.sum(axis=axis)

    def rule(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.data.shape).copy())
        else:
            _accumulate(a, np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    return Tensor(out_data, _parents=(a,), _backward=rule)


def mean(a):
    a = _as_tensor(a)
    n = a.data.size

    def rule(g):
        _accumulate(a, np.full_like(a.data, g / n))

    return Tensor(a.data.mean(), _parents=(a,), _backward=rule)


def dot(a, b):
    return tsum(mul(a, b))


def l2_normalize(a, axis=-1, eps=1e-12):
    """x / sqrt(sum(x^2) + eps) along ``axis``; eps guards the zero vector."""
    a = _as_tensor(a)
    ss = (a.data ** 2).sum(axis=axis, keepdims=True)
    norm = np.sqrt(ss + eps)
    out_data = a.data / norm

    def rule(g):
        gx = (g * a.data).sum(axis=axis, keepdims=True)
        _accumulate(a, g / norm - a.data * gx / norm ** 3)

    return Tensor(out_data, _parents=(a,), _backward=rule)


def softmax(a, axis=-1):
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def rule(g):
        gy = (g * out_data).sum(axis=axis, keepdims=True)
        _accumulate(a, out_data * (g - gy))

    return Tensor(out_data, _parents=(a,), _backward=rule)


def log_softmax(a, axis=-1):
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out_data = shifted - lse
    sm = np.exp(out_data)

    def rule(g):
        gs = g.sum(axis=axis, keepdims=True)
        _accumulate(a, g - sm * gs)

    return Tensor(out_data, _parents=(a,), _backward=rule)


def logsumexp_rows(a):
    """Row-wise log(sum(exp(row))) of a matrix, with max-subtraction."""
    a = _as_tensor(a)
    if a.data.ndim != 2:
        raise ShapeError(f"logsumexp_rows: need a matrix, got shape {a.data.shape}")
    m = a.data.max(axis=1, keepdims=True)
    e = np.exp(a.data - m)
    s = e.sum(axis=1)
    out_data = np.log(s) + m[:, 0]
    sm = e / s[:, None]

    def rule(g):
        _accumulate(a, sm * g[:, None])

    return Tensor(out_data, _parents=(a,), _backward=rule)


_OPS = {
    "matmul": matmul,
    "add": add,
    "hadamard": mul,
    "concat": concat,
    "stack": stack,
    "relu": relu,
    "exp": exp,
    "log": log,
    "l2_normalize": l2_normalize,
    "softmax": softmax,
    "log_softmax": log_softmax,
    "mean": mean,
    "sum": tsum,
    "transpose": transpose,
}


def forward(op_name, inputs):
    """Name-dispatched forward, for generic checking harnesses."""
    if op_name not in _OPS:
        raise ValueError(f"unsupported op {op_name!r}; know {sorted(_OPS)}")
    fn = _OPS[op_name]
    if op_name in ("concat", "stack"):
        return fn(inputs)
    return fn(*inputs)


def finite_diff_check(f, inputs, epsilon=1e-5):
    """Max relative error between analytic and central-difference gradients.

    ``f`` maps the tensors in ``inputs`` to a scalar Tensor; every input
    with requires_grad is perturbed coordinate-wise. The error at each
    coordinate is |a - n| / max(1, |a|, |n|).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    out = f(*inputs)
    leaves = [t for t in inputs if t.requires_grad]
    analytic = grad(out, leaves)
    max_err = 0.0
    for tensor, a_grad in zip(leaves, analytic):
        flat = tensor.data.reshape(-1)
        a_flat = a_grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + epsilon
            f_plus = float(f(*inputs).data)
            flat[i] = orig - epsilon
            f_minus = float(f(*inputs).data)
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2 * epsilon)
            if not (np.isfinite(numeric) and np.isfinite(a_flat[i])):
                raise FloatingPointError(
                    f"non-finite gradient at coordinate {i}: "
                    f"analytic={a_flat[i]}, numeric={numeric}"
                )
            err = abs(a_flat[i] - numeric) / max(1.0, abs(a_flat[i]), abs(numeric))
            max_err = max(max_err, err)
    return max_err
