"""Dense tensors with reverse-mode automatic differentiation.

Implements exactly the operations the stance-comparison network needs:
matrix products, elementwise arithmetic, tanh/sigmoid/relu, masked
column softmax, max-pooling over a set of vectors, and scalar reductions.
Tensors wrap float64 numpy arrays; every op records its parents and a
backward rule, and ``backward`` replays them in reverse topological order.

No general broadcasting: shapes must line up except where an op documents
a specific rule (``add_bias`` broadcasts a vector over rows). Tensors are
treated as immutable once created; optimizers mutate leaf ``.data`` in
place between graph builds.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateInputError, GraphError, ShapeError

DTYPE = np.float64

# Additive mask surrogate: large enough that exp() underflows to exactly 0
# after max-subtraction, small enough to stay finite in float64.
NEG_INF = -1e30


class Tensor:
    """A dense array plus the bookkeeping needed for reverse-mode autodiff.

    ``requires_grad`` marks trainable leaves; interior nodes inherit it from
    their parents. ``grad`` is populated by ``backward`` for leaves only.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn: Callable[[np.ndarray], tuple] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def is_leaf(self) -> bool:
        return self._backward_fn is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        grad = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape, dtype=DTYPE))


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    """Wrap an op result; record the edge only if a parent needs gradients."""
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward_fn = backward_fn
    return out


# ---------------------------------------------------------------------------
# matrix products


def _ordered_matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product accumulated in ascending contraction order.

    einsum walks the contracted index sequentially, which makes the result
    bit-for-bit reproducible against naive reference loops; numpy dispatches
    size-1 output columns to a different (dot) kernel, so pad those to 2 and
    slice back.
    """
    padded = b.shape[-1] == 1
    if padded:
        b = np.concatenate([b, b], axis=-1)
    # einsum picks stride-dependent kernels; contiguous operands pin the
    # ascending-index accumulation this function promises
    a = np.ascontiguousarray(a)
    b = np.ascontiguousarray(b)
    if a.ndim == 2 and b.ndim == 2:
        out = np.einsum("ik,kj->ij", a, b)
    elif b.ndim == 2:
        out = np.einsum("...ik,kj->...ij", a, b)
    else:
        out = np.einsum("...ik,...kj->...ij", a, b)
    return out[..., :1] if padded else out


def matmul(a, b, ordered: bool = False) -> Tensor:
    """Matrix product.

    Supports 2-D x 2-D, N-D x 2-D (shared right factor, gradient summed over
    leading axes) and N-D x N-D with identical leading axes. ``ordered=True``
    pins the accumulation order for reproducibility against reference loops.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs matrices, got shapes {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul inner dimensions differ: {a.shape} x {b.shape}")
    if b.ndim > 2 and a.shape[:-2] != b.shape[:-2]:
        raise ShapeError(f"matmul leading dimensions differ: {a.shape} x {b.shape}")
    data = _ordered_matmul(a.data, b.data) if ordered else a.data @ b.data

    def backward_fn(g: np.ndarray):
        ga = gb = None
        if a.requires_grad:
            ga = g @ b.data.swapaxes(-1, -2)
        if b.requires_grad:
            if b.ndim == 2 and a.ndim > 2:
                n_lead = a.ndim - 2
                axes = tuple(range(n_lead + 1))
                gb = np.tensordot(a.data, g, axes=(axes, axes))
            else:
                gb = a.data.swapaxes(-1, -2) @ g
        return ga, gb

    return _node(data, (a, b), backward_fn)


def transpose_last2(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim < 2:
        raise ShapeError(f"transpose_last2 needs >=2 dims, got shape {x.shape}")

    def backward_fn(g):
        return (g.swapaxes(-1, -2),)

    return _node(x.data.swapaxes(-1, -2), (x,), backward_fn)


# ---------------------------------------------------------------------------
# elementwise arithmetic


def _check_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op} needs equal shapes, got {a.shape} and {b.shape}")


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape("add", a, b)
    return _node(a.data + b.data, (a, b), lambda g: (g, g))


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape("sub", a, b)
    return _node(a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_same_shape("mul", a, b)

    def backward_fn(g):
        return (g * b.data if a.requires_grad else None,
                g * a.data if b.requires_grad else None)

    return _node(a.data * b.data, (a, b), backward_fn)


def scale(x, c: float) -> Tensor:
    x = as_tensor(x)
    c = float(c)
    return _node(x.data * c, (x,), lambda g: (g * c,))


def add_bias(x, b) -> Tensor:
    """Add a vector to every row of x (broadcast over leading axes)."""
    x, b = as_tensor(x), as_tensor(b)
    if b.ndim != 1 or x.shape[-1] != b.shape[0]:
        raise ShapeError(f"add_bias needs a last-axis vector, got {x.shape} and {b.shape}")

    def backward_fn(g):
        gb = g.reshape(-1, b.shape[0]).sum(axis=0) if b.requires_grad else None
        return g, gb

    return _node(x.data + b.data, (x, b), backward_fn)


def elementwise_binary(kind: str, a, b) -> Tensor:
    """The two comparison primitives: ``mul`` -> a*b, ``sub_square`` -> (a-b)*(a-b)."""
    if kind == "mul":
        return mul(a, b)
    if kind == "sub_square":
        d = sub(a, b)
        return mul(d, d)
    raise ValueError(f"unknown elementwise kind {kind!r}")


def sub_square(a, b) -> Tensor:
    return elementwise_binary("sub_square", a, b)


# ---------------------------------------------------------------------------
# activations


def tanh_map(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    return _node(y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid_map(x) -> Tensor:
    x = as_tensor(x)
    d = x.data
    y = np.empty_like(d)
    pos = d >= 0
    y[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ex = np.exp(d[~pos])
    y[~pos] = ex / (1.0 + ex)
    return _node(y, (x,), lambda g: (g * y * (1.0 - y),))


def relu_map(x) -> Tensor:
    x = as_tensor(x)
    y = np.maximum(x.data, 0.0)
    return _node(y, (x,), lambda g: (g * (x.data > 0),))


def log_clamped(x, floor: float = 1e-12) -> Tensor:
    """log(max(x, floor)); gradient is 1/x where x > floor, 0 where clamped."""
    x = as_tensor(x)
    clamped = np.maximum(x.data, floor)
    active = x.data > floor

    def backward_fn(g):
        return (np.where(active, g / clamped, 0.0),)

    return _node(np.log(clamped), (x,), backward_fn)


# ---------------------------------------------------------------------------
# softmax


def _masked_softmax(e: np.ndarray, mask: np.ndarray | None, axis: int) -> np.ndarray:
    if mask is None:
        shifted = e - e.max(axis=axis, keepdims=True)
        z = np.exp(shifted)
    else:
        keep = np.expand_dims(mask, -1) if axis == -2 else mask
        masked = np.where(keep, e, -np.inf)
        top = masked.max(axis=axis, keepdims=True)
        z = np.exp(masked - top)
    return z / z.sum(axis=axis, keepdims=True)


def _softmax_node(e: Tensor, mask: np.ndarray | None, axis: int) -> Tensor:
    a = _masked_softmax(e.data, mask, axis)

    def backward_fn(g):
        inner = (g * a).sum(axis=axis, keepdims=True)
        return (a * (g - inner),)

    return _node(a, (e,), backward_fn)


def softmax_cols(e, mask=None) -> Tensor:
    """Column-wise softmax over positions with masking.

    ``e`` has shape (..., n, k); ``mask`` is boolean (..., n) with True
    marking real positions. Masked positions come out exactly 0 and each
    column sums to 1 over the unmasked ones. Stabilized by per-column max
    subtraction.
    """
    e = as_tensor(e)
    if e.ndim < 2:
        raise ShapeError(f"softmax_cols needs (..., n, k), got shape {e.shape}")
    if mask is None:
        return _softmax_node(e, None, -2)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != e.shape[:-1]:
        raise ShapeError(f"mask shape {mask.shape} does not match positions of {e.shape}")
    if not mask.any(axis=-1).all():
        raise DegenerateInputError("softmax_cols: an instance has every position masked")
    return _softmax_node(e, mask, -2)


def softmax_rows(x) -> Tensor:
    """Softmax over the last axis (class probabilities)."""
    return _softmax_node(as_tensor(x), None, -1)


# ---------------------------------------------------------------------------
# pooling, reshaping, reductions


def global_max_pool(tensors: Sequence) -> Tensor:
    """Per-dimension maximum over a set of same-shaped tensors.

    Gradient flows only to the argmax element per dimension; ties go to the
    first tensor in iteration order.
    """
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise DegenerateInputError("global_max_pool of an empty set")
    for t in ts[1:]:
        _check_same_shape("global_max_pool", ts[0], t)
    stacked = np.stack([t.data for t in ts], axis=0)
    winner = np.argmax(stacked, axis=0)

    def backward_fn(g):
        return tuple(g * (winner == k) if t.requires_grad else None
                     for k, t in enumerate(ts))

    return _node(stacked.max(axis=0), tuple(ts), backward_fn)


def masked_max_positions(x, mask) -> Tensor:
    """Per-dimension max over the position axis of (..., L, d), masked."""
    x = as_tensor(x)
    mask = np.asarray(mask, dtype=bool)
    if x.ndim < 2 or mask.shape != x.shape[:-1]:
        raise ShapeError(f"masked_max_positions: shapes {x.shape} and {mask.shape}")
    if not mask.any(axis=-1).all():
        raise DegenerateInputError("masked_max_positions: an instance has no real positions")
    hidden = np.where(mask[..., None], x.data, -np.inf)
    winner = np.argmax(hidden, axis=-2)

    def backward_fn(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, winner[..., None, :], g[..., None, :], axis=-2)
        return (gx,)

    return _node(hidden.max(axis=-2), (x,), backward_fn)


def concat_last(tensors: Sequence) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise DegenerateInputError("concat_last of an empty sequence")
    widths = [t.shape[-1] for t in ts]
    splits = np.cumsum(widths)[:-1]

    def backward_fn(g):
        pieces = np.split(g, splits, axis=-1)
        return tuple(p if t.requires_grad else None for p, t in zip(pieces, ts))

    return _node(np.concatenate([t.data for t in ts], axis=-1), tuple(ts), backward_fn)


def stack_positions(tensors: Sequence) -> Tensor:
    """Stack per-position tensors of shape (..., d) into (..., L, d) on axis -2."""
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise DegenerateInputError("stack_positions of an empty sequence")

    def backward_fn(g):
        return tuple(g[..., t, :] if ts[t].requires_grad else None
                     for t in range(len(ts)))

    return _node(np.stack([t.data for t in ts], axis=-2), tuple(ts), backward_fn)


def index_last(x, k: int) -> Tensor:
    """Select index k of the last axis: (..., d, n) -> (..., d)."""
    x = as_tensor(x)
    if not -x.shape[-1] <= k < x.shape[-1]:
        raise ShapeError(f"index {k} out of range for shape {x.shape}")

    def backward_fn(g):
        gx = np.zeros_like(x.data)
        gx[..., k] = g
        return (gx,)

    return _node(x.data[..., k].copy(), (x,), backward_fn)


def unsqueeze_last(x) -> Tensor:
    x = as_tensor(x)
    return _node(x.data[..., None], (x,), lambda g: (g[..., 0],))


def sum_all(x) -> Tensor:
    x = as_tensor(x)

    def backward_fn(g):
        return (np.full_like(x.data, float(g.reshape(()))),)

    return _node(np.asarray(x.data.sum()), (x,), backward_fn)


# ---------------------------------------------------------------------------
# reverse pass


def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative post-order DFS; parents precede children in the result."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params: Sequence[Tensor] | None = None) -> dict[Tensor, np.ndarray]:
    """Accumulate gradients of a scalar loss.

    Returns a mapping from every requires_grad leaf reached by the graph to
    its gradient array (also mirrored on ``leaf.grad``). If ``params`` is
    given, parameters not reachable from the loss get explicit zero entries.
    """
    if loss.size != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {loss.shape}")
    order = _topo_order(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    result: dict[Tensor, np.ndarray] = {}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if node._backward_fn is None:
            if node.requires_grad:
                node.grad = g
                result[node] = g
            continue
        for parent, contrib in zip(node._parents, node._backward_fn(g)):
            if contrib is None or not parent.requires_grad:
                continue
            held = grads.get(id(parent))
            grads[id(parent)] = contrib if held is None else held + contrib
    if params is not None:
        for p in params:
            if p not in result:
                z = np.zeros_like(p.data)
                p.grad = z
                result[p] = z
    return result


def grad_check(build_loss: Callable[[], Tensor], params: Sequence[Tensor],
               epsilon: float = 1e-5, atol: float = 1e-8) -> float:
    """Compare analytic gradients with central finite differences.

    ``build_loss`` must rebuild the scalar loss from the given parameter
    tensors on every call (it is invoked twice up front to detect
    non-determinism). Returns the worst relative error over all parameter
    components, measured against the finite-difference value. Components
    where the two sides already agree within ``atol`` are not scored;
    central differences carry roundoff noise of order |loss|*eps_mach/epsilon,
    which would otherwise dominate near-zero gradients.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    first = build_loss().item()
    second = build_loss().item()
    if first != second:
        raise GraphError("grad_check: builder is not deterministic "
                         f"({first!r} vs {second!r})")
    params = list(params)
    if not params:
        return 0.0
    analytic = backward(build_loss(), params=params)
    worst = 0.0
    for p in params:
        ana = analytic[p].reshape(-1)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + epsilon
            up = build_loss().item()
            flat[i] = saved - epsilon
            down = build_loss().item()
            flat[i] = saved
            numeric = (up - down) / (2.0 * epsilon)
            diff = abs(ana[i] - numeric)
            if diff <= atol or max(abs(ana[i]), abs(numeric)) <= 1e-7:
                continue
            worst = max(worst, diff / max(abs(numeric), 1e-7))
    return worst
