"""Small reverse-mode differentiation engine over float64 numpy arrays.

Every op returns a new :class:`Tensor` and, when any input requires a
gradient, attaches a :class:`TapeNode` holding the backward rule.  Nodes are
numbered at creation, so creation order is a topological order of the graph
and :func:`backward` only has to visit reachable nodes by decreasing index.
There is no global tape: each forward pass owns its graph, which keeps
independent explanation/training contexts free of shared mutable state.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

_node_ids = itertools.count()


class ShapeError(ValueError):
    pass


@dataclass
class TapeNode:
    op: str
    inputs: tuple["Tensor", ...]
    backward_rule: Callable[[np.ndarray], Sequence[np.ndarray | None]]
    index: int


class Tensor:
    __slots__ = ("values", "grad", "requires_grad", "node", "name")

    def __init__(self, values, requires_grad: bool = False, name: str | None = None):
        self.values = np.asarray(values, dtype=np.float64)
        self.grad = np.zeros_like(self.values)
        self.requires_grad = requires_grad
        self.node: TapeNode | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.values)

    def backward(self) -> None:
        backward(self)

    def __repr__(self) -> str:
        label = f" {self.name!r}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(op: str, values: np.ndarray, inputs: tuple[Tensor, ...], rule) -> Tensor:
    out = Tensor(values)
    if any(t.requires_grad for t in inputs):
        out.requires_grad = True
        out.node = TapeNode(op, inputs, rule, next(_node_ids))
    return out


def _require_shape(op: str, cond: bool, *tensors: Tensor) -> None:
    if not cond:
        shapes = ", ".join(str(t.shape) for t in tensors)
        raise ShapeError(f"{op}: incompatible shapes {shapes}")


def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(t) into ``t.grad`` for every reachable tensor
    that requires a gradient.  Repeated calls accumulate."""
    if root.values.size != 1:
        raise ShapeError(f"backward needs a scalar root, got shape {root.shape}")
    if not root.requires_grad:
        return

    # collect reachable nodes
    seen: dict[int, Tensor] = {}
    stack = [root]
    while stack:
        t = stack.pop()
        if id(t) in seen:
            continue
        seen[id(t)] = t
        if t.node is not None:
            stack.extend(x for x in t.node.inputs if x.requires_grad)

    adjoint: dict[int, np.ndarray] = {id(root): np.ones_like(root.values)}
    ordered = sorted(
        (t for t in seen.values() if t.node is not None),
        key=lambda t: t.node.index,
        reverse=True,
    )
    for t in ordered:
        upstream = adjoint.get(id(t))
        if upstream is None:
            continue
        grads = t.node.backward_rule(upstream)
        for inp, g in zip(t.node.inputs, grads):
            if g is None or not inp.requires_grad:
                continue
            key = id(inp)
            adjoint[key] = adjoint[key] + g if key in adjoint else g

    for key, t in seen.items():
        if key in adjoint:
            t.grad = t.grad + adjoint[key]


# ----------------------------------------------------------------------------
# ops


def add(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _require_shape("add", a.shape == b.shape, a, b)
    return _make("add", a.values + b.values, (a, b), lambda g: (g, g))


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """``x`` of shape (C, T) plus a per-channel bias of shape (C,)."""
    x, b = as_tensor(x), as_tensor(b)
    _require_shape("add_bias", x.values.ndim == 2 and b.shape == (x.shape[0],), x, b)
    return _make(
        "add_bias", x.values + b.values[:, None], (x, b), lambda g: (g, g.sum(axis=1))
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """(m, n) @ (n, p) or (m, n) @ (n,)."""
    a, b = as_tensor(a), as_tensor(b)
    _require_shape(
        "matmul",
        a.values.ndim == 2 and b.values.ndim in (1, 2) and a.shape[1] == b.shape[0],
        a,
        b,
    )
    av, bv = a.values, b.values

    def rule(g):
        if bv.ndim == 1:
            return np.outer(g, bv), av.T @ g
        return g @ bv.T, av.T @ g

    return _make("matmul", av @ bv, (a, b), rule)


def conv1d(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Stride-1, same-padded 1-D convolution (cross-correlation).

    x: (C_in, T), w: (C_out, C_in, K) with odd K, b: (C_out,).  Output (C_out, T).
    """
    x, w = as_tensor(x), as_tensor(w)
    _require_shape(
        "conv1d",
        x.values.ndim == 2 and w.values.ndim == 3 and w.shape[1] == x.shape[0],
        x,
        w,
    )
    c_out, c_in, k = w.shape
    if k % 2 != 1:
        raise ShapeError(f"conv1d: kernel size must be odd, got {k}")
    t_len = x.shape[1]
    pad = k // 2
    xp = np.pad(x.values, ((0, 0), (pad, pad)))
    # cols[j*C_in + c, t] = xp[c, t + j]
    cols = np.concatenate([xp[:, j : j + t_len] for j in range(k)], axis=0)
    w2 = w.values.transpose(0, 2, 1).reshape(c_out, k * c_in)
    out = w2 @ cols
    inputs: tuple[Tensor, ...] = (x, w)
    if b is not None:
        b = as_tensor(b)
        _require_shape("conv1d bias", b.shape == (c_out,), w, b)
        out = out + b.values[:, None]
        inputs = (x, w, b)

    def rule(g):
        dw2 = g @ cols.T
        dw = dw2.reshape(c_out, k, c_in).transpose(0, 2, 1)
        dcols = w2.T @ g
        dxp = np.zeros_like(xp)
        for j in range(k):
            dxp[:, j : j + t_len] += dcols[j * c_in : (j + 1) * c_in]
        dx = dxp[:, pad : pad + t_len]
        if b is None:
            return dx, dw
        return dx, dw, g.sum(axis=1)

    return _make("conv1d", out, inputs, rule)


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    mask = x.values > 0
    return _make("relu", np.where(mask, x.values, 0.0), (x,), lambda g: (g * mask,))


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    v = x.values
    # split by sign to avoid overflow in exp
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return _make("sigmoid", out, (x,), lambda g: (g * out * (1.0 - out),))


def softmax(x: Tensor) -> Tensor:
    """Softmax of a 1-D tensor."""
    x = as_tensor(x)
    _require_shape("softmax", x.values.ndim == 1, x)
    z = x.values - x.values.max()
    e = np.exp(z)
    p = e / e.sum()
    return _make("softmax", p, (x,), lambda g: (p * (g - np.dot(g, p)),))


def mean_over_time(x: Tensor) -> Tensor:
    """Mean along the last (time) axis: (C, T) -> (C,)."""
    x = as_tensor(x)
    _require_shape("mean_over_time", x.values.ndim >= 1 and x.shape[-1] > 0, x)
    t_len = x.shape[-1]
    return _make(
        "mean_over_time",
        x.values.mean(axis=-1),
        (x,),
        lambda g: (np.repeat(g[..., None], t_len, axis=-1) / t_len,),
    )


def global_avg_pool_time(x: Tensor) -> Tensor:
    """Temporal pooling ahead of the classifier head: (C, T) -> (C,)."""
    x = as_tensor(x)
    _require_shape("global_avg_pool_time", x.values.ndim == 2 and x.shape[1] > 0, x)
    t_len = x.shape[1]
    return _make(
        "global_avg_pool_time",
        x.values.sum(axis=1) / t_len,
        (x,),
        lambda g: (np.broadcast_to(g[:, None] / t_len, x.shape).copy(),),
    )


def channel_scale(x: Tensor, s: Tensor) -> Tensor:
    """Scale each channel (row) of a (C, T) tensor by s[c]."""
    x, s = as_tensor(x), as_tensor(s)
    _require_shape("channel_scale", x.values.ndim == 2 and s.shape == (x.shape[0],), x, s)
    xv, sv = x.values, s.values
    return _make(
        "channel_scale",
        xv * sv[:, None],
        (x, s),
        lambda g: (g * sv[:, None], (g * xv).sum(axis=1)),
    )


def mse_loss(pred: Tensor, target) -> Tensor:
    """Mean squared error; ``target`` may be a constant array."""
    pred, target = as_tensor(pred), as_tensor(target)
    _require_shape("mse_loss", pred.shape == target.shape, pred, target)
    diff = pred.values - target.values
    n = diff.size
    return _make(
        "mse_loss",
        np.array((diff**2).sum() / n),
        (pred, target),
        lambda g: (2.0 * g * diff / n, -2.0 * g * diff / n),
    )


def sum_all(x: Tensor) -> Tensor:
    x = as_tensor(x)
    return _make("sum", np.array(x.values.sum()), (x,), lambda g: (np.full(x.shape, g),))


def select(x: Tensor, index: int) -> Tensor:
    """Pick one element of a 1-D tensor as a scalar."""
    x = as_tensor(x)
    _require_shape("select", x.values.ndim == 1 and 0 <= index < x.shape[0], x)

    def rule(g):
        out = np.zeros_like(x.values)
        out[index] = g
        return (out,)

    return _make("select", np.array(x.values[index]), (x,), rule)


def dot(x: Tensor, weights) -> Tensor:
    """Scalar sum(x * weights) against a constant array of the same shape."""
    x = as_tensor(x)
    w = np.asarray(weights, dtype=np.float64)
    _require_shape("dot", x.shape == w.shape, x, Tensor(w))
    return _make("dot", np.array((x.values * w).sum()), (x,), lambda g: (g * w,))


# ----------------------------------------------------------------------------
# gradient checking


def _default_sampler(rng: np.random.Generator, shape) -> np.ndarray:
    return rng.standard_normal(shape)


def grad_check(
    op: Callable[..., Tensor],
    input_shapes: Sequence[tuple[int, ...]],
    seed: int = 0,
    eps: float = 1e-5,
    sampler: Callable[[np.random.Generator, tuple[int, ...]], np.ndarray] | None = None,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    The op output is projected onto a fixed random direction so that every
    op, scalar or not, is checked through a scalar root.  Relative error per
    element is ``|analytic - numeric| / max(|numeric|, 1e-8)``.
    """
    rng = np.random.default_rng(seed)
    sampler = sampler or _default_sampler
    arrays = [np.asarray(sampler(rng, tuple(s)), dtype=np.float64) for s in input_shapes]
    probe = op(*[Tensor(a) for a in arrays])
    direction = rng.standard_normal(probe.shape)

    def scalar(vals) -> float:
        return float((op(*[Tensor(v) for v in vals]).values * direction).sum())

    inputs = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    backward(dot(op(*inputs), direction))

    worst = 0.0
    for i, a in enumerate(arrays):
        analytic = inputs[i].grad
        for idx in np.ndindex(a.shape):
            plus = [v.copy() for v in arrays]
            minus = [v.copy() for v in arrays]
            plus[i][idx] += eps
            minus[i][idx] -= eps
            numeric = (scalar(plus) - scalar(minus)) / (2 * eps)
            err = abs(analytic[idx] - numeric) / max(abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst

