"""Reverse-mode automatic differentiation over numpy arrays.

A ``Tensor`` wraps an ndarray, a gradient accumulator, and a requires-grad
flag.  Operations build a graph of parents and vector-Jacobian products;
``Tensor.backward()`` walks it in reverse topological order and accumulates
gradients additively.  Gradient arrays are never mutated in place, so vjps
may safely return views or shared arrays.

Precision follows the data: parameters created as float32 keep the whole
graph in float32; float64 is used for gradient checking and bit-exact
reproducibility tests.
"""

from __future__ import annotations

import numpy as np

_grad_enabled = True


class no_grad:
    """Context manager that disables graph construction (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        if not isinstance(data, np.ndarray):
            data = np.asarray(data, dtype=np.float64)
        self.data = data
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._vjp = None

    # -- construction -------------------------------------------------------

    @staticmethod
    def _result(data: np.ndarray, parents: tuple, vjp) -> "Tensor":
        out = Tensor(data)
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._vjp = vjp
        return out

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> "Tensor":
        if isinstance(other, Tensor):
            return other
        # scalar constants adopt this tensor's dtype so float32 graphs stay float32
        return Tensor(np.asarray(other, dtype=self.data.dtype))

    def __add__(self, other):
        other = self._coerce(other)
        data = self.data + other.data
        return Tensor._result(
            data,
            (self, other),
            lambda g: (_unbroadcast(g, self.data.shape), _unbroadcast(g, other.data.shape)),
        )

    __radd__ = __add__

    def __neg__(self):
        return Tensor._result(-self.data, (self,), lambda g: (-g,))

    def __sub__(self, other):
        other = self._coerce(other)
        data = self.data - other.data
        return Tensor._result(
            data,
            (self, other),
            lambda g: (_unbroadcast(g, self.data.shape), _unbroadcast(-g, other.data.shape)),
        )

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        data = self.data * other.data
        return Tensor._result(
            data,
            (self, other),
            lambda g: (
                _unbroadcast(g * other.data, self.data.shape),
                _unbroadcast(g * self.data, other.data.shape),
            ),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        data = self.data / other.data
        return Tensor._result(
            data,
            (self, other),
            lambda g: (
                _unbroadcast(g / other.data, self.data.shape),
                _unbroadcast(-g * self.data / (other.data**2), other.data.shape),
            ),
        )

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, exponent: float):
        data = self.data**exponent
        return Tensor._result(
            data, (self,), lambda g: (g * exponent * self.data ** (exponent - 1),)
        )

    def __matmul__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(np.asarray(other))
        if self.data.ndim < 2 or other.data.ndim < 2:
            raise ValueError("matmul requires arrays with at least 2 dimensions")
        data = self.data @ other.data

        def vjp(g):
            ga = _unbroadcast(g @ other.data.swapaxes(-1, -2), self.data.shape)
            gb = _unbroadcast(self.data.swapaxes(-1, -2) @ g, other.data.shape)
            return ga, gb

        return Tensor._result(data, (self, other), vjp)

    # -- elementwise non-linearities ----------------------------------------

    def exp(self):
        data = np.exp(self.data)
        return Tensor._result(data, (self,), lambda g: (g * data,))

    def log(self):
        return Tensor._result(np.log(self.data), (self,), lambda g: (g / self.data,))

    def tanh(self):
        data = np.tanh(self.data)
        return Tensor._result(data, (self,), lambda g: (g * (1.0 - data**2),))

    def sigmoid(self):
        data = 1.0 / (1.0 + np.exp(-self.data))
        return Tensor._result(data, (self,), lambda g: (g * data * (1.0 - data),))

    def relu(self):
        mask = self.data > 0
        return Tensor._result(self.data * mask, (self,), lambda g: (g * mask,))

    def sqrt(self):
        data = np.sqrt(self.data)
        return Tensor._result(data, (self,), lambda g: (g * 0.5 / data,))

    # -- reductions ---------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False):
        data = self.data.sum(axis=axis, keepdims=keepdims)

        def vjp(g):
            g = np.asarray(g)
            if axis is None:
                return (np.broadcast_to(g, self.data.shape),)
            ax = axis if isinstance(axis, tuple) else (axis,)
            if not keepdims:
                g = np.expand_dims(g, ax)
            return (np.broadcast_to(g, self.data.shape),)

        return Tensor._result(data, (self,), vjp)

    def mean(self, axis=None, keepdims: bool = False):
        count = self.data.size if axis is None else np.prod(
            [self.data.shape[a] for a in (axis if isinstance(axis, tuple) else (axis,))]
        )
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / float(count))

    def amax(self, axis: int, keepdims: bool = False):
        """Max along one axis; ties send the gradient to the first maximum."""
        idx = np.argmax(self.data, axis=axis)
        data = np.take_along_axis(self.data, np.expand_dims(idx, axis), axis=axis)
        if not keepdims:
            data = np.squeeze(data, axis=axis)

        def vjp(g):
            g = np.asarray(g)
            if not keepdims:
                g = np.expand_dims(g, axis)
            out = np.zeros_like(self.data)
            np.put_along_axis(out, np.expand_dims(idx, axis), g, axis=axis)
            return (out,)

        return Tensor._result(data, (self,), vjp)

    # -- shape manipulation --------------------------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        return Tensor._result(
            self.data.reshape(shape), (self,), lambda g: (g.reshape(old),)
        )

    def transpose(self, *axes):
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        inv = np.argsort(axes)
        return Tensor._result(
            self.data.transpose(axes), (self,), lambda g: (g.transpose(inv),)
        )

    def __getitem__(self, index):
        data = self.data[index]

        def vjp(g):
            out = np.zeros_like(self.data)
            np.add.at(out, index, g)
            return (out,)

        return Tensor._result(data, (self,), vjp)

    # -- backward ------------------------------------------------------------

    def backward(self, grad: np.ndarray | None = None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self.grad = grad if self.grad is None else self.grad + grad
        for node in reversed(topo):
            if node._vjp is None or node.grad is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(node.grad)):
                if pg is None or not parent.requires_grad:
                    continue
                parent.grad = pg if parent.grad is None else parent.grad + pg


# ---------------------------------------------------------------------------
# Free functions
# ---------------------------------------------------------------------------


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        slicer = [slice(None)] * g.ndim
        outs = []
        for k in range(len(sizes)):
            slicer[axis] = slice(offsets[k], offsets[k + 1])
            outs.append(g[tuple(slicer)])
        return tuple(outs)

    return Tensor._result(data, tuple(tensors), vjp)


def stack(tensors: list[Tensor], axis: int = 0) -> Tensor:
    expanded = [t.reshape(t.shape[:axis] + (1,) + t.shape[axis:]) for t in tensors]
    return concat(expanded, axis=axis)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def vjp(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        return (data * (g - dot),)

    return Tensor._result(data, (x,), vjp)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse
    soft = np.exp(data)

    def vjp(g):
        return (g - soft * g.sum(axis=axis, keepdims=True),)

    return Tensor._result(data, (x,), vjp)


def gumbel_noise(shape, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(shape)
    return -np.log(-np.log(u + 1e-20) + 1e-20)


def gumbel_softmax(
    logits: Tensor,
    tau: float,
    hard: bool,
    rng: np.random.Generator,
) -> Tensor:
    """Gumbel-softmax sample on the last axis.

    Soft mode returns ``softmax((logits + g) / tau)`` with standard Gumbel
    noise ``g``.  Hard mode returns a one-hot forward value at the sample's
    argmax while gradients follow the soft sample (straight-through).
    """
    if tau <= 0:
        raise ValueError("gumbel_softmax temperature must be positive")
    if not isinstance(logits, Tensor):
        logits = Tensor(logits)
    noise = gumbel_noise(logits.shape, rng).astype(logits.data.dtype)
    y = softmax((logits + Tensor(noise)) * (1.0 / tau), axis=-1)
    if hard:
        return straight_through_onehot(y)
    return y


def straight_through_onehot(y: Tensor, index: int | None = None) -> Tensor:
    """One-hot forward value with identity gradient into the soft input.

    ``index`` overrides the argmax, which implements teacher-forced hard
    selection while keeping the gradient path of the sampled relaxation.
    """
    if y.ndim != 1:
        raise ValueError("straight_through_onehot expects a 1-d simplex vector")
    idx = int(np.argmax(y.data)) if index is None else int(index)
    hard = np.zeros_like(y.data)
    hard[idx] = 1.0
    return Tensor._result(hard, (y,), lambda g: (g,))
