"""Reverse-mode automatic differentiation over scalars.

The graph is built dynamically: every operation returns a new `Var` holding
its value, its parents, and the local partial derivatives computed at forward
time. `backward` then walks the graph once in reverse topological order.
Nodes are scalar; `vsum` and `dot` provide the vector layer as single n-ary
nodes so graphs stay shallow.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np


class NonFiniteError(ArithmeticError):
    """A value or adjoint left the finite float range; carries a node label."""


class DomainError(ValueError):
    """An operand violates an operation's domain (log of non-positive, x/0)."""


class Var:
    """One scalar node in the differentiation graph."""

    __slots__ = ("value", "adjoint", "parents", "partials", "op", "label")

    def __init__(self, value, parents=(), partials=(), op="const", label=""):
        value = float(value)
        if not math.isfinite(value):
            raise NonFiniteError(_describe("non-finite value", op, label, parents))
        self.value = value
        self.adjoint = 0.0
        self.parents = parents
        self.partials = partials
        self.op = op
        self.label = label

    def __repr__(self):
        tag = self.label or self.op
        return f"Var({self.value!r}, {tag})"

    # arithmetic builds the graph; float operands become constant nodes

    def __add__(self, other):
        other = _coerce(other)
        return Var(self.value + other.value, (self, other), (1.0, 1.0), "add")

    __radd__ = __add__

    def __sub__(self, other):
        other = _coerce(other)
        return Var(self.value - other.value, (self, other), (1.0, -1.0), "sub")

    def __rsub__(self, other):
        return _coerce(other) - self

    def __mul__(self, other):
        other = _coerce(other)
        return Var(
            self.value * other.value, (self, other), (other.value, self.value), "mul"
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _coerce(other)
        if other.value == 0.0:
            raise DomainError(_describe("division by zero", "div", other.label, ()))
        inv = 1.0 / other.value
        return Var(
            self.value * inv,
            (self, other),
            (inv, -self.value * inv * inv),
            "div",
        )

    def __rtruediv__(self, other):
        return _coerce(other) / self

    def __neg__(self):
        return Var(-self.value, (self,), (-1.0,), "neg")


def _coerce(x) -> Var:
    if isinstance(x, Var):
        return x
    return Var(x)


def _describe(problem, op, label, parents):
    where = f"'{label}'" if label else f"op '{op}'"
    if parents:
        args = ", ".join(repr(p.value) for p in parents)
        return f"{problem} at {where} (inputs: {args})"
    return f"{problem} at {where}"


def exp(x) -> Var:
    x = _coerce(x)
    try:
        v = math.exp(x.value)
    except OverflowError:
        raise NonFiniteError(_describe("exp overflow", "exp", x.label, (x,))) from None
    return Var(v, (x,), (v,), "exp")


def log(x) -> Var:
    x = _coerce(x)
    if x.value <= 0.0:
        raise DomainError(
            _describe("log of non-positive value", "log", x.label, (x,))
        )
    return Var(math.log(x.value), (x,), (1.0 / x.value,), "log")


def tanh(x) -> Var:
    x = _coerce(x)
    t = math.tanh(x.value)
    return Var(t, (x,), (1.0 - t * t,), "tanh")


def square(x) -> Var:
    x = _coerce(x)
    return Var(x.value * x.value, (x,), (2.0 * x.value,), "square")


def vsum(xs: Sequence) -> Var:
    """Sum of a sequence as a single n-ary node (fixed left-to-right order)."""
    xs = tuple(_coerce(x) for x in xs)
    if not xs:
        return Var(0.0)
    total = 0.0
    for x in xs:
        total += x.value
    return Var(total, xs, (1.0,) * len(xs), "sum")


def dot(xs: Sequence, ys: Sequence) -> Var:
    """Inner product as a single node with 2n parents."""
    if len(xs) != len(ys):
        raise ValueError(f"dot length mismatch: {len(xs)} vs {len(ys)}")
    xs = tuple(_coerce(x) for x in xs)
    ys = tuple(_coerce(y) for y in ys)
    total = 0.0
    for x, y in zip(xs, ys):
        total += x.value * y.value
    return Var(
        total,
        xs + ys,
        tuple(y.value for y in ys) + tuple(x.value for x in xs),
        "dot",
    )


_UNARY = {"neg": lambda x: -x, "exp": exp, "log": log, "tanh": tanh, "square": square}
_BINARY = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "mul": lambda a, b: a * b,
    "div": lambda a, b: a / b,
}


def apply(kind: str, inputs: Sequence) -> Var:
    """Apply an operation by name; the op set is fixed."""
    if kind in _UNARY:
        (x,) = inputs
        return _UNARY[kind](_coerce(x))
    if kind in _BINARY:
        a, b = inputs
        return _BINARY[kind](_coerce(a), _coerce(b))
    if kind == "sum":
        return vsum(inputs)
    if kind == "dot":
        half = len(inputs) // 2
        if len(inputs) != 2 * half:
            raise ValueError("dot expects an even number of inputs")
        return dot(inputs[:half], inputs[half:])
    raise ValueError(f"unknown op kind: {kind!r}")


def _topo(root: Var) -> list[Var]:
    """Iterative post-order over the graph reachable from root."""
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(root: Var) -> None:
    """Populate adjoints of every node reachable from `root`.

    Reachable adjoints are reset first, so repeated calls on the same graph
    are idempotent. After the call, root.adjoint == 1 and each node's adjoint
    is the derivative of root with respect to it.
    """
    order = _topo(root)
    for node in order:
        node.adjoint = 0.0
    root.adjoint = 1.0
    for node in reversed(order):
        a = node.adjoint
        if a == 0.0:
            continue
        for p, d in zip(node.parents, node.partials):
            acc = p.adjoint + a * d
            if not math.isfinite(acc):
                raise NonFiniteError(
                    _describe("non-finite adjoint", node.op, node.label, (node,))
                )
            p.adjoint = acc


class ParamVector:
    """Ordered, uniquely named parameter leaves shared by a whole experiment.

    Components (posterior means, net weights) register entries once at
    construction; values are mutated in place by the optimizer and every
    evaluation builds a fresh graph on top of the same leaf nodes.
    """

    def __init__(self):
        self.names: list[str] = []
        self._leaves: list[Var] = []
        self._index: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self._leaves)

    def append(self, name: str, value: float) -> int:
        if name in self._index:
            raise ValueError(f"duplicate parameter name: {name!r}")
        leaf = Var(value, op="param", label=name)
        self._index[name] = len(self._leaves)
        self.names.append(name)
        self._leaves.append(leaf)
        return self._index[name]

    def extend(self, names: Sequence[str], values) -> list[int]:
        return [self.append(n, v) for n, v in zip(names, values, strict=True)]

    def leaf(self, key) -> Var:
        if isinstance(key, str):
            key = self._index[key]
        return self._leaves[key]

    @property
    def leaves(self) -> list[Var]:
        return list(self._leaves)

    @property
    def values(self) -> np.ndarray:
        return np.array([leaf.value for leaf in self._leaves], dtype=float)

    def set_values(self, values) -> None:
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self._leaves),):
            raise ValueError(
                f"expected {len(self._leaves)} values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            bad = self.names[int(np.flatnonzero(~np.isfinite(values))[0])]
            raise NonFiniteError(f"non-finite value assigned to '{bad}'")
        for leaf, v in zip(self._leaves, values):
            leaf.value = float(v)

    def zero_adjoints(self) -> None:
        for leaf in self._leaves:
            leaf.adjoint = 0.0

    def grad(self) -> np.ndarray:
        return np.array([leaf.adjoint for leaf in self._leaves], dtype=float)

    def copy_values(self) -> np.ndarray:
        return self.values


def gradient(f: Callable[[ParamVector], Var], params: ParamVector) -> np.ndarray:
    """Evaluate f and return d f / d params via one reverse pass."""
    params.zero_adjoints()
    root = f(params)
    backward(root)
    return params.grad()


def fd_check(
    f: Callable[[ParamVector], Var], params: ParamVector, step: float = 1e-5
) -> float:
    """Max relative gap between the reverse-mode gradient of f and central
    finite differences: max_i |g_ad - g_fd| / max(1, |g_ad|)."""
    if step <= 0:
        raise ValueError("step must be positive")
    g_ad = gradient(f, params)
    base = params.copy_values()
    g_fd = np.empty_like(g_ad)
    try:
        for i in range(len(base)):
            shifted = base.copy()
            shifted[i] = base[i] + step
            params.set_values(shifted)
            hi = f(params).value
            shifted[i] = base[i] - step
            params.set_values(shifted)
            lo = f(params).value
            g_fd[i] = (hi - lo) / (2.0 * step)
    finally:
        params.set_values(base)
    denom = np.maximum(1.0, np.abs(g_ad))
    return float(np.max(np.abs(g_ad - g_fd) / denom)) if len(base) else 0.0
