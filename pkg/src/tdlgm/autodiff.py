"""Small reverse-mode differentiation engine.

Values are float64 numpy arrays wrapped in :class:`Node` objects. Every
primitive application records its parents and a backward rule; calling
:func:`backward` on a scalar root walks the graph in reverse topological
order and accumulates gradients.

Random draws never become nodes. Anything sampled enters the graph through
:func:`constant`, so a loss closure with frozen noise is a deterministic
function of its parameters and can be checked with :func:`grad_check`.
"""

from __future__ import annotations

from typing import Callable, Iterable, Mapping

import numpy as np

__all__ = [
    "ShapeError",
    "DomainError",
    "Node",
    "ParamSet",
    "constant",
    "as_nodes",
    "apply_primitive",
    "backward",
    "grad_check",
    "PRIMITIVES",
]


class ShapeError(ValueError):
    pass


class DomainError(ValueError):
    pass


class Node:
    """An immutable value on the tape together with how it was produced."""

    __slots__ = ("value", "parents", "kind", "attrs")
    __array_priority__ = 1000

    def __init__(self, value, parents=(), kind="leaf", attrs=None):
        # read-only view; the caller's array keeps its own flags
        value = np.asarray(value, dtype=np.float64).view()
        value.setflags(write=False)
        self.value = value
        self.parents = tuple(parents)
        self.kind = kind
        self.attrs = attrs or {}

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self):
        return self.value.size

    def item(self) -> float:
        if self.value.size != 1:
            raise ShapeError(f"item: node has shape {self.shape}")
        return float(self.value.reshape(-1)[0])

    def __repr__(self):
        return f"Node(kind={self.kind!r}, shape={self.shape})"

    def __add__(self, other):
        return apply_primitive("add", [self, _as_node(other)])

    def __radd__(self, other):
        return apply_primitive("add", [_as_node(other), self])

    def __sub__(self, other):
        return apply_primitive("sub", [self, _as_node(other)])

    def __rsub__(self, other):
        return apply_primitive("sub", [_as_node(other), self])

    def __mul__(self, other):
        if np.isscalar(other):
            return apply_primitive("scale", [self], factor=float(other))
        return apply_primitive("mul", [self, _as_node(other)])

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return apply_primitive("scale", [self], factor=-1.0)

    def __matmul__(self, other):
        return apply_primitive("matmul", [self, _as_node(other)])

    def __rmatmul__(self, other):
        return apply_primitive("matmul", [_as_node(other), self])

    def __getitem__(self, index):
        return apply_primitive("slice", [self], index=index)


def constant(value) -> Node:
    """Wrap a value as a graph constant (no gradient is requested for it)."""
    return Node(value)


def _as_node(x) -> Node:
    return x if isinstance(x, Node) else Node(x)


def as_nodes(params: Mapping) -> dict[str, Node]:
    """Wrap every array in ``params`` as a Node, keeping existing Nodes."""
    return {k: _as_node(v) for k, v in params.items()}


class ParamSet(dict):
    """Named trainable arrays; iteration order is insertion order."""

    def copy(self) -> "ParamSet":
        return ParamSet((k, np.array(v, dtype=np.float64, copy=True)) for k, v in self.items())

    def leaves(self) -> dict[str, Node]:
        return {k: Node(v) for k, v in self.items()}

    def constants(self) -> dict[str, Node]:
        return self.leaves()

    def num_values(self) -> int:
        return int(np.sum([v.size for v in self.values()]))

    def subset(self, prefix: str) -> "ParamSet":
        return ParamSet((k, v) for k, v in self.items() if k.startswith(prefix))


# --------------------------------------------------------------------------
# primitives: each entry is (forward(values, attrs), backward(grad, values, out, attrs))


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    ndiff = grad.ndim - len(shape)
    if ndiff > 0:
        grad = grad.sum(axis=tuple(range(ndiff)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(kind, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{kind}: incompatible shapes {a.shape} and {b.shape}") from None


def _fwd_add(vals, attrs):
    a, b = vals
    _check_broadcast("add", a, b)
    return a + b


def _bwd_add(g, vals, out, attrs):
    return _unbroadcast(g, vals[0].shape), _unbroadcast(g, vals[1].shape)


def _fwd_sub(vals, attrs):
    a, b = vals
    _check_broadcast("sub", a, b)
    return a - b


def _bwd_sub(g, vals, out, attrs):
    return _unbroadcast(g, vals[0].shape), -_unbroadcast(g, vals[1].shape)


def _fwd_mul(vals, attrs):
    a, b = vals
    _check_broadcast("mul", a, b)
    return a * b


def _bwd_mul(g, vals, out, attrs):
    a, b = vals
    return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)


def _fwd_matmul(vals, attrs):
    a, b = vals
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    return a @ b


def _bwd_matmul(g, vals, out, attrs):
    a, b = vals
    return g @ b.T, a.T @ g


def _fwd_scale(vals, attrs):
    return vals[0] * attrs["factor"]


def _bwd_scale(g, vals, out, attrs):
    return (g * attrs["factor"],)


def _fwd_sigmoid(vals, attrs):
    x = vals[0]
    # two-branch form avoids exp overflow
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def _bwd_sigmoid(g, vals, out, attrs):
    return (g * out * (1.0 - out),)


def _fwd_tanh(vals, attrs):
    return np.tanh(vals[0])


def _bwd_tanh(g, vals, out, attrs):
    return (g * (1.0 - out * out),)


def _fwd_exp(vals, attrs):
    return np.exp(vals[0])


def _bwd_exp(g, vals, out, attrs):
    return (g * out,)


def _fwd_log(vals, attrs):
    x = vals[0]
    if np.any(x <= 0):
        raise DomainError(f"log: non-positive input (min {x.min()!r})")
    return np.log(x)


def _bwd_log(g, vals, out, attrs):
    return (g / vals[0],)


def _fwd_softplus(vals, attrs):
    x = vals[0]
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _bwd_softplus(g, vals, out, attrs):
    return (g * _fwd_sigmoid(vals, attrs),)


def _fwd_square(vals, attrs):
    return vals[0] * vals[0]


def _bwd_square(g, vals, out, attrs):
    return (2.0 * g * vals[0],)


def _fwd_sum(vals, attrs):
    axis = attrs.get("axis")
    return np.sum(vals[0], axis=axis, keepdims=axis is not None)


def _bwd_sum(g, vals, out, attrs):
    return (np.broadcast_to(g, vals[0].shape).copy(),)


def _fwd_mean(vals, attrs):
    axis = attrs.get("axis")
    return np.mean(vals[0], axis=axis, keepdims=axis is not None)


def _bwd_mean(g, vals, out, attrs):
    x = vals[0]
    axis = attrs.get("axis")
    n = x.size if axis is None else x.shape[axis]
    return (np.broadcast_to(g, x.shape) / n,)


def _fwd_concat(vals, attrs):
    axis = attrs.get("axis", -1)
    ref = vals[0]
    for v in vals[1:]:
        if v.ndim != ref.ndim or any(
            v.shape[i] != ref.shape[i] for i in range(ref.ndim) if i != axis % ref.ndim
        ):
            raise ShapeError(f"concat: incompatible shapes {ref.shape} and {v.shape}")
    return np.concatenate(vals, axis=axis)


def _bwd_concat(g, vals, out, attrs):
    axis = attrs.get("axis", -1)
    bounds = np.cumsum([v.shape[axis] for v in vals])[:-1]
    return tuple(np.split(g, bounds, axis=axis))


def _fwd_slice(vals, attrs):
    return vals[0][attrs["index"]]


def _bwd_slice(g, vals, out, attrs):
    full = np.zeros_like(vals[0])
    np.add.at(full, attrs["index"], g)
    return (full,)


PRIMITIVES: dict[str, tuple[Callable, Callable, int | None]] = {
    "add": (_fwd_add, _bwd_add, 2),
    "sub": (_fwd_sub, _bwd_sub, 2),
    "mul": (_fwd_mul, _bwd_mul, 2),
    "matmul": (_fwd_matmul, _bwd_matmul, 2),
    "scale": (_fwd_scale, _bwd_scale, 1),
    "sigmoid": (_fwd_sigmoid, _bwd_sigmoid, 1),
    "tanh": (_fwd_tanh, _bwd_tanh, 1),
    "exp": (_fwd_exp, _bwd_exp, 1),
    "log": (_fwd_log, _bwd_log, 1),
    "softplus": (_fwd_softplus, _bwd_softplus, 1),
    "square": (_fwd_square, _bwd_square, 1),
    "sum": (_fwd_sum, _bwd_sum, 1),
    "mean": (_fwd_mean, _bwd_mean, 1),
    "concat": (_fwd_concat, _bwd_concat, None),
    "slice": (_fwd_slice, _bwd_slice, 1),
}


def apply_primitive(kind: str, inputs: Iterable[Node], **attrs) -> Node:
    """Apply primitive ``kind`` to ``inputs`` and record it on the graph.

    Raises
    ------
    ShapeError
        If the input shapes do not satisfy the primitive's shape rule.
    DomainError
        If ``log`` receives a non-positive value.
    """
    try:
        fwd, _, arity = PRIMITIVES[kind]
    except KeyError:
        raise ValueError(f"unknown primitive {kind!r}") from None
    inputs = [_as_node(x) for x in inputs]
    if arity is not None and len(inputs) != arity:
        raise ValueError(f"{kind}: expected {arity} inputs, got {len(inputs)}")
    if not inputs:
        raise ValueError(f"{kind}: no inputs")
    out = fwd([n.value for n in inputs], attrs)
    return Node(out, inputs, kind, attrs)


# convenience wrappers used throughout the models
def add(a, b):
    return apply_primitive("add", [a, b])


def sub(a, b):
    return apply_primitive("sub", [a, b])


def mul(a, b):
    return apply_primitive("mul", [a, b])


def matmul(a, b):
    return apply_primitive("matmul", [a, b])


def scale(a, factor):
    return apply_primitive("scale", [a], factor=float(factor))


def sigmoid(a):
    return apply_primitive("sigmoid", [a])


def tanh(a):
    return apply_primitive("tanh", [a])


def exp(a):
    return apply_primitive("exp", [a])


def log(a):
    return apply_primitive("log", [a])


def softplus(a):
    return apply_primitive("softplus", [a])


def square(a):
    return apply_primitive("square", [a])


def sum(a, axis=None):  # noqa: A001
    return apply_primitive("sum", [a], axis=axis)


def mean(a, axis=None):
    return apply_primitive("mean", [a], axis=axis)


def concat(nodes, axis=-1):
    return apply_primitive("concat", list(nodes), axis=axis)


def slice(a, index):  # noqa: A001
    return apply_primitive("slice", [a], index=index)


def _topological_order(root: Node) -> list[Node]:
    order: list[Node] = []
    seen: set[int] = set()
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
        for p in reversed(node.parents):
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Node, params: Mapping[str, Node]) -> dict[str, np.ndarray]:
    """Gradients of scalar ``root`` with respect to every node in ``params``.

    Parameters not reachable from ``root`` get zero gradients.
    """
    if root.size != 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.shape}")
    grads: dict[int, np.ndarray] = {id(root): np.ones_like(root.value)}
    for node in reversed(_topological_order(root)):
        g = grads.pop(id(node), None) if node.parents else grads.get(id(node))
        if g is None or not node.parents:
            continue
        _, bwd, _ = PRIMITIVES[node.kind]
        parent_grads = bwd(g, [p.value for p in node.parents], node.value, node.attrs)
        for p, pg in zip(node.parents, parent_grads):
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = np.asarray(pg, dtype=np.float64)
    return {
        name: np.array(grads.get(id(node), np.zeros_like(node.value)), dtype=np.float64)
        for name, node in params.items()
    }


def grad_check(
    loss_fn: Callable[[Mapping[str, Node]], Node],
    params: Mapping[str, np.ndarray],
    epsilon: float = 1e-5,
) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    ``loss_fn`` receives a mapping of name -> Node and must return a scalar
    Node; any randomness must be frozen by the caller. Each coordinate's
    error is ``|a - n| / max(|a|, |n|, 1e-8)``.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    leaves = {k: Node(v) for k, v in base.items()}
    analytic = backward(loss_fn(leaves), leaves)

    def evaluate(name, flat_index, delta):
        perturbed = dict(base)
        arr = base[name].copy()
        arr.reshape(-1)[flat_index] += delta
        perturbed[name] = arr
        return float(loss_fn({k: Node(v) for k, v in perturbed.items()}).value.reshape(-1)[0])

    worst = 0.0
    for name, value in base.items():
        a_flat = analytic[name].reshape(-1)
        for i in range(value.size):
            numeric = (evaluate(name, i, epsilon) - evaluate(name, i, -epsilon)) / (2.0 * epsilon)
            a = a_flat[i]
            denom = max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, abs(a - numeric) / denom)
    return worst
