"""A small tape-based reverse-mode autodiff and the dense ReLU networks it drives.

Nodes hold numpy arrays (a minibatch is one graph, not one graph per datum).
Binary ops broadcast like numpy; the backward pass sums gradients back down to
each parent's shape. Subgradients at relu/abs/floor kinks are 0.

    g = Graph()
    x = g.leaf(np.array(3.0), "x")
    y = x * x
    g.backward(y)["x"]   # -> 6.0
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from . import special_fn
from .errors import ShapeError, UsageError


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    ndim_extra = grad.ndim - len(shape)
    if ndim_extra > 0:
        grad = grad.sum(axis=tuple(range(ndim_extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


class Var:
    """A node on a :class:`Graph`."""

    __slots__ = ("value", "graph", "parents", "op", "name", "index", "grad")
    __array_priority__ = 100

    def __init__(self, graph, value, parents=(), op="leaf", name=None):
        self.graph = graph
        self.value = value
        self.parents = parents
        self.op = op
        self.name = name
        self.grad = None
        self.index = len(graph.nodes)
        graph.nodes.append(self)

    @property
    def shape(self):
        return np.shape(self.value)

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

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def __repr__(self):
        return f"Var(op={self.op}, shape={self.shape})"


class Graph:
    """Topologically ordered tape: every node is appended after its parents."""

    def __init__(self):
        self.nodes: List[Var] = []
        self.kinks: List[np.ndarray] = []

    def leaf(self, value, name=None) -> Var:
        return Var(self, np.asarray(value, dtype=float), (), "leaf", name)

    def constant(self, value) -> Var:
        return Var(self, np.asarray(value, dtype=float), (), "constant")

    def lift(self, x) -> Var:
        if isinstance(x, Var):
            if x.graph is not self:
                raise UsageError("mixing nodes from different graphs")
            return x
        return self.constant(x)

    def kink_signature(self) -> bytes:
        """Which side of every relu/abs/floor kink each input sits on."""
        if not self.kinks:
            return b""
        return b"".join(np.packbits(k.ravel()).tobytes() + b"|" for k in self.kinks)

    def backward(self, out: Var) -> Dict[str, np.ndarray]:
        """Reverse pass from scalar ``out``; returns gradients of named leaves.

        Every leaf also gets its gradient stored on ``.grad`` (zeros when the
        output does not depend on it).
        """
        if out.graph is not self:
            raise UsageError("output node belongs to another graph")
        if np.size(out.value) != 1:
            raise UsageError(f"backward needs a scalar seed, got shape {out.shape}")
        grads: List[Optional[np.ndarray]] = [None] * (out.index + 1)
        grads[out.index] = np.ones_like(out.value)
        for node in reversed(self.nodes[: out.index + 1]):
            g = grads[node.index]
            if g is None or not node.parents:
                continue
            for parent, vjp in node.parents:
                pg = _unbroadcast(np.asarray(vjp(g), dtype=float), parent.shape)
                if grads[parent.index] is None:
                    grads[parent.index] = pg
                else:
                    grads[parent.index] = grads[parent.index] + pg
        result = {}
        for node in self.nodes:
            if node.op != "leaf":
                continue
            g = grads[node.index] if node.index <= out.index else None
            node.grad = np.zeros_like(node.value) if g is None else g
            if node.name is not None:
                result[node.name] = node.grad
        return result


def _pair(a, b):
    graph = a.graph if isinstance(a, Var) else b.graph
    return graph, graph.lift(a), graph.lift(b)


def _unary(x: Var, value, op, vjp):
    return Var(x.graph, value, ((x, vjp),), op)


def add(a, b):
    g, a, b = _pair(a, b)
    return Var(g, a.value + b.value, ((a, lambda t: t), (b, lambda t: t)), "add")


def sub(a, b):
    g, a, b = _pair(a, b)
    return Var(g, a.value - b.value, ((a, lambda t: t), (b, lambda t: -t)), "sub")


def mul(a, b):
    g, a, b = _pair(a, b)
    av, bv = a.value, b.value
    return Var(g, av * bv, ((a, lambda t: t * bv), (b, lambda t: t * av)), "mul")


def div(a, b):
    g, a, b = _pair(a, b)
    av, bv = a.value, b.value
    out = av / bv
    return Var(g, out, ((a, lambda t: t / bv), (b, lambda t: -t * out / bv)), "div")


def neg(x: Var):
    return _unary(x, -x.value, "neg", lambda t: -t)


def matmul(x, w):
    """Row-batched x @ W."""
    g, x, w = _pair(x, w)
    xv, wv = x.value, w.value
    if wv.ndim != 2 or xv.shape[-1] != wv.shape[0]:
        raise ShapeError(f"matmul: {xv.shape} @ {wv.shape}")
    return Var(
        g,
        xv @ wv,
        ((x, lambda t: t @ wv.T), (w, lambda t: np.atleast_2d(xv).T @ np.atleast_2d(t))),
        "matmul",
    )


def relu(x: Var):
    mask = x.value > 0
    x.graph.kinks.append(mask)
    return _unary(x, np.where(mask, x.value, 0.0), "relu", lambda t: t * mask)


def absolute(x: Var):
    s = np.sign(x.value)
    x.graph.kinks.append(s > 0)
    x.graph.kinks.append(s < 0)
    return _unary(x, np.abs(x.value), "abs", lambda t: t * s)


def floor(x: Var, eps: float):
    """max(x, eps); gradient passes only where x > eps."""
    mask = x.value > eps
    x.graph.kinks.append(mask)
    return _unary(x, np.where(mask, x.value, eps), "floor", lambda t: t * mask)


def exp(x: Var):
    out = np.exp(x.value)
    return _unary(x, out, "exp", lambda t: t * out)


def log(x: Var):
    xv = x.value
    return _unary(x, np.log(xv), "log", lambda t: t / xv)


def square(x: Var):
    xv = x.value
    return _unary(x, xv * xv, "square", lambda t: 2.0 * t * xv)


def reciprocal(x: Var):
    out = 1.0 / x.value
    return _unary(x, out, "reciprocal", lambda t: -t * out * out)


def lgamma(x: Var):
    xv = x.value
    return _unary(x, special_fn.log_gamma(xv), "log_gamma", lambda t: t * special_fn.digamma(xv))


def digamma(x: Var):
    xv = x.value
    return _unary(x, special_fn.digamma(xv), "digamma", lambda t: t * special_fn.trigamma(xv))


def sum_(x: Var, axis=None):
    xv = x.value
    shape = xv.shape

    def vjp(t):
        if axis is None:
            return np.broadcast_to(t, shape)
        return np.broadcast_to(np.expand_dims(t, axis), shape)

    return _unary(x, xv.sum(axis=axis), "sum", vjp)


def mean(x: Var, axis=None):
    n = x.value.size if axis is None else x.value.shape[axis]
    return sum_(x, axis) * (1.0 / n)


def getitem(x: Var, key):
    shape = x.value.shape

    def vjp(t):
        out = np.zeros(shape)
        np.add.at(out, key, t)
        return out

    return _unary(x, x.value[key], "getitem", vjp)


def reshape(x: Var, shape):
    old = x.value.shape
    return _unary(x, x.value.reshape(shape), "reshape", lambda t: t.reshape(old))


def concat(parts, axis=-1):
    """Concatenate along ``axis``; constants may be mixed with nodes."""
    graph = next(p.graph for p in parts if isinstance(p, Var))
    nodes = [graph.lift(p) for p in parts]
    values = [n.value for n in nodes]
    out = np.concatenate(values, axis=axis)
    bounds = np.cumsum([0] + [v.shape[axis] for v in values])
    parents = []
    for node, lo, hi in zip(nodes, bounds[:-1], bounds[1:]):
        parents.append((node, lambda t, lo=lo, hi=hi: np.take(t, np.arange(lo, hi), axis=axis)))
    return Var(graph, out, tuple(parents), "concat")


def implicit_gamma(shape: Var, draws, diagnostics: Optional[dict] = None):
    """Node whose value is a given unit-rate Gamma(shape) draw.

    The backward applies the implicit reparameterization
    dy/da = -(∂P/∂a)(a, y) / (∂P/∂y)(a, y); where the density underflows the
    gradient is clamped to 0 and counted under ``diagnostics['degenerate']``.
    """
    a = np.broadcast_to(shape.value, np.shape(draws))
    y = np.asarray(draws, dtype=float)
    dens = special_fn.gamma_density_std(a, y)
    ok = dens >= 1e-300
    dyda = np.zeros(y.shape)
    dyda[ok] = -special_fn.inc_gamma_d_da(a[ok], y[ok]) / dens[ok]
    if diagnostics is not None:
        diagnostics["degenerate"] = diagnostics.get("degenerate", 0) + int((~ok).sum())
    return _unary(shape, y, "implicit_gamma", lambda t: t * dyda)


# ---------------------------------------------------------------------------
# dense networks

ACTIVATIONS = ("relu", "identity")


@dataclass
class Layer:
    weight: np.ndarray  # (in_dim, out_dim)
    bias: np.ndarray  # (out_dim,)
    activation: str = "relu"

    def __post_init__(self):
        self.weight = np.asarray(self.weight, dtype=float)
        self.bias = np.asarray(self.bias, dtype=float)
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ShapeError(f"layer shapes {self.weight.shape} / {self.bias.shape}")


@dataclass
class DenseNet:
    layers: List[Layer] = field(default_factory=list)

    def __post_init__(self):
        for prev, nxt in zip(self.layers[:-1], self.layers[1:]):
            if prev.weight.shape[1] != nxt.weight.shape[0]:
                raise ShapeError("adjacent layer dimensions do not chain")

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[1]

    def params(self, prefix: str) -> Dict[str, np.ndarray]:
        """Named references to the live weight/bias arrays."""
        out = {}
        for i, layer in enumerate(self.layers):
            out[f"{prefix}.{i}.W"] = layer.weight
            out[f"{prefix}.{i}.b"] = layer.bias
        return out

    def trace(self, graph: Graph, x, prefix: str, leaves: Optional[dict] = None) -> Var:
        """Record the forward pass on ``graph``.

        ``leaves`` optionally maps parameter names to existing leaf nodes (as
        built by a caller that needs gradients); missing names become constants.
        """
        h = graph.lift(x)
        if h.value.shape[-1] != self.input_dim:
            raise ShapeError(f"input dim {h.value.shape[-1]} != {self.input_dim}")
        for i, layer in enumerate(self.layers):
            w = _param_node(graph, leaves, f"{prefix}.{i}.W", layer.weight)
            b = _param_node(graph, leaves, f"{prefix}.{i}.b", layer.bias)
            h = matmul(h, w) + b
            if layer.activation == "relu":
                h = relu(h)
        return h

    def copy(self) -> "DenseNet":
        return DenseNet([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])


def _param_node(graph, leaves, name, value):
    if leaves is not None and name in leaves:
        return leaves[name]
    return graph.constant(value)


def forward(net: DenseNet, x) -> np.ndarray:
    """Plain numpy evaluation of ``net`` on a vector or a (batch, in) array."""
    h = np.asarray(x, dtype=float)
    if h.shape[-1] != net.input_dim:
        raise ShapeError(f"input dim {h.shape[-1]} != {net.input_dim}")
    for layer in net.layers:
        h = h @ layer.weight + layer.bias
        if layer.activation == "relu":
            h = np.maximum(h, 0.0)
    return h


def operator_norm_product(net: DenseNet) -> float:
    """Product of layer spectral norms, a Lipschitz bound for ``net`` in L2."""
    return float(np.prod([np.linalg.norm(l.weight, 2) for l in net.layers]))


def build_net(sizes, rng=None, hidden="relu", output="identity", init="glorot") -> DenseNet:
    """Fully connected net with the given layer widths.

    ``init='glorot'`` is Glorot-uniform kernels and zero biases; ``init='zeros'``
    zeroes everything (callers then overwrite what they need).
    """
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        act = output if i == len(sizes) - 2 else hidden
        if init == "glorot":
            lim = np.sqrt(6.0 / (n_in + n_out))
            w = rng.uniform(-lim, lim, size=(n_in, n_out))
        elif init == "normal":
            w = rng.standard_normal((n_in, n_out)) / np.sqrt(n_in)
        else:
            w = np.zeros((n_in, n_out))
        layers.append(Layer(w, np.zeros(n_out), act))
    return DenseNet(layers)


# ---------------------------------------------------------------------------
# gradient checking


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    checked: int
    excluded: List[tuple]
    worst: Optional[tuple] = None


def gradient_check(
    f: Callable[[Graph, Dict[str, Var]], Var],
    point,
    h: float = 1e-5,
    tol: float = 1e-4,
    abs_floor: float = 1e-6,
) -> GradCheckReport:
    """Compare backward() against central differences, coordinate by coordinate.

    ``f(graph, leaves)`` must build a scalar from the leaf dict. ``point`` is an
    array or a dict of named arrays. The relative error of a coordinate is
    |ad - fd| / max(|ad|, |fd|, abs_floor). A coordinate is excluded when the
    perturbation moves any relu/abs/floor input across its kink (or the point
    sits exactly on one), since the one-sided slopes then disagree.
    """
    named = {"x": np.asarray(point, dtype=float)} if not isinstance(point, dict) else {
        k: np.asarray(v, dtype=float) for k, v in point.items()
    }

    def evaluate(values):
        g = Graph()
        leaves = {k: g.leaf(v, k) for k, v in values.items()}
        out = f(g, leaves)
        return g, out, leaves

    g0, out0, _ = evaluate(named)
    sig0 = g0.kink_signature()
    grads = g0.backward(out0)

    worst, max_err, checked, excluded = None, 0.0, 0, []
    for name, base in named.items():
        for idx in np.ndindex(base.shape if base.ndim else ()):
            vals = []
            sigs = []
            for step in (h, -h):
                pert = dict(named)
                arr = base.copy()
                arr[idx] = arr[idx] + step
                pert[name] = arr
                g, out, _ = evaluate(pert)
                vals.append(float(out.value))
                sigs.append(g.kink_signature())
            if sigs[0] != sig0 or sigs[1] != sig0:
                excluded.append((name, idx))
                continue
            fd = (vals[0] - vals[1]) / (2.0 * h)
            ad = float(np.asarray(grads[name])[idx])
            err = abs(ad - fd) / max(abs(ad), abs(fd), abs_floor)
            checked += 1
            if err > max_err:
                max_err, worst = err, (name, idx, ad, fd)
    return GradCheckReport(max_err, max_err <= tol, checked, excluded, worst)

