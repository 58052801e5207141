"""Dense float64 tensors with reverse-mode automatic differentiation.

Define-by-run tape: every op that touches a tracked tensor records a node
holding its parents and a backward closure.  backward() linearizes the DAG
reachable from a scalar loss into topological order and sweeps it in
reverse, accumulating gradients into leaf tensors that require them.

Values are always float64 and always finite; NaN or Inf appearing at any
op boundary raises immediately rather than propagating.
"""

from __future__ import annotations

import contextvars
import math

import numpy as np

from .errors import InvalidArgument, ShapeError

__all__ = [
    "Tensor",
    "TapeNode",
    "no_grad",
    "as_tensor",
    "matmul",
    "leaky_relu",
    "concat",
    "softmax",
    "log_softmax",
    "take_rows",
    "broadcast_to",
    "cosine_similarity",
    "dropout",
    "backward",
    "trace",
    "finite_diff_grad",
    "uniform_init",
    "Linear",
    "AdamState",
    "adam_step",
    "Adam",
]


def _ensure_finite(arr: np.ndarray, op: str = "tensor"):
    # fast path: a single reduction; sum is non-finite whenever any element is
    s = arr.sum()
    if not math.isfinite(s):
        if not np.isfinite(arr).all():
            raise InvalidArgument(f"{op}: non-finite value (NaN or Inf) in result")
        # sum overflowed on finite inputs; values this large are out of scope
        raise InvalidArgument(f"{op}: values overflow float64 range")


class TapeNode:
    """One recorded primitive op: parent tensors plus a backward closure.

    The closure maps the gradient at this node's output to a tuple of
    gradients aligned with ``parents`` (None for entries that need none).
    """

    __slots__ = ("op", "parents", "backward")

    def __init__(self, op, parents, backward):
        self.op = op
        self.parents = parents
        self.backward = backward


class Tensor:
    """Immutable-by-convention float64 array, optionally on the tape.

    ``requires_grad`` marks a leaf parameter; ``node`` is set on op results
    whose inputs are tracked.  ``grad`` is populated by backward().
    """

    __slots__ = ("data", "requires_grad", "grad", "name", "node")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.asarray(data, dtype=np.float64)
        _ensure_finite(arr, "tensor")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self.name = name
        self.node = None

    # -- introspection -------------------------------------------------

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
        if self.data.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.data.shape}")
        return float(self.data.reshape(()))

    def __float__(self):
        return self.item()

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"

    # -- operators -----------------------------------------------------

    def __add__(self, other):
        return _elementwise_bin(
            "add", self, as_tensor(other), np.add, lambda a, b, g: g, lambda a, b, g: g
        )

    __radd__ = __add__

    def __sub__(self, other):
        return _elementwise_bin(
            "sub", self, as_tensor(other), np.subtract, lambda a, b, g: g, lambda a, b, g: -g
        )

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        return _elementwise_bin(
            "mul",
            self,
            as_tensor(other),
            np.multiply,
            lambda a, b, g: g * b,
            lambda a, b, g: g * a,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        return _elementwise_bin(
            "div",
            self,
            as_tensor(other),
            np.divide,
            lambda a, b, g: g / b,
            lambda a, b, g: -g * a / (b * b),
        )

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __neg__(self):
        return _unary("neg", self, -self.data, lambda g: -g)

    def __matmul__(self, other):
        return matmul(self, other)

    # -- shape and reduction methods ----------------------------------

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        old = self.data.shape
        out = self.data.reshape(shape)
        return _unary("reshape", self, out, lambda g: g.reshape(old))

    def abs(self):
        sign = np.sign(self.data)  # 0 at 0: subgradient
        return _unary("abs", self, np.abs(self.data), lambda g: g * sign)

    def sqrt(self):
        """Elementwise square root; derivative at exactly 0 is locked to 0."""
        y = np.sqrt(self.data)
        safe = np.where(y > 0.0, y, 1.0)
        zero = y == 0.0
        return _unary("sqrt", self, y, lambda g: np.where(zero, 0.0, 0.5 * g / safe))

    def sum(self, axis=None, keepdims: bool = False):
        shape = self.data.shape
        out = self.data.sum(axis=axis, keepdims=keepdims)

        def bwd(g):
            return _spread_reduction_grad(g, shape, axis, keepdims)

        return _unary("sum", self, out, bwd)

    def mean(self, axis=None, keepdims: bool = False):
        shape = self.data.shape
        out = self.data.mean(axis=axis, keepdims=keepdims)
        n = self.data.size if axis is None else shape[axis]

        def bwd(g):
            return _spread_reduction_grad(g, shape, axis, keepdims) / n

        return _unary("mean", self, out, bwd)

    def max(self, axis: int):
        """Max along one axis; gradient flows to the first argmax only."""
        idx = np.argmax(self.data, axis=axis)
        out = np.take_along_axis(self.data, np.expand_dims(idx, axis), axis=axis).squeeze(axis)
        shape = self.data.shape

        def bwd(g):
            gz = np.zeros(shape)
            np.put_along_axis(gz, np.expand_dims(idx, axis), np.expand_dims(g, axis), axis=axis)
            return gz

        return _unary("max", self, out, bwd)


def as_tensor(x) -> Tensor:
    """Wrap an array or scalar as a constant Tensor; pass Tensors through."""
    if isinstance(x, Tensor):
        return x
    return Tensor(x)


# ---------------------------------------------------------------------------
# op plumbing


_grad_enabled = contextvars.ContextVar("sfagc_grad_enabled", default=True)


class no_grad:
    """Context manager suppressing tape recording, for cheap inference."""

    def __enter__(self):
        self._token = _grad_enabled.set(False)
        return self

    def __exit__(self, *exc):
        _grad_enabled.reset(self._token)
        return False


def _tracked(t: Tensor) -> bool:
    return t.requires_grad or t.node is not None


def _wrap(op: str, parents, data: np.ndarray, backward) -> Tensor:
    _ensure_finite(data, op)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = False
    out.grad = None
    out.name = None
    out.node = (
        TapeNode(op, tuple(parents), backward)
        if _grad_enabled.get() and any(_tracked(p) for p in parents)
        else None
    )
    return out


def _unary(op, x, data, grad_fn):
    return _wrap(op, (x,), data, lambda g: (grad_fn(g),))


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    """Sum g over the axes numpy broadcast to reach g's shape from shape."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _elementwise_bin(op, a, b, fwd, grad_a, grad_b):
    try:
        # non-finite results raise InvalidArgument below; keep numpy quiet here
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            data = fwd(a.data, b.data)
    except ValueError as e:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from e
    ta, tb = _tracked(a), _tracked(b)

    def bwd(g):
        return (
            _unbroadcast(grad_a(a.data, b.data, g), a.data.shape) if ta else None,
            _unbroadcast(grad_b(a.data, b.data, g), b.data.shape) if tb else None,
        )

    return _wrap(op, (a, b), data, bwd)


def _spread_reduction_grad(g, shape, axis, keepdims):
    if axis is None:
        return np.broadcast_to(g, shape).copy() if np.ndim(g) == 0 else np.full(shape, g)
    if not keepdims:
        g = np.expand_dims(g, axis)
    return np.broadcast_to(g, shape).copy()


# ---------------------------------------------------------------------------
# primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """a @ b with b two-dimensional; a may carry leading batch axes.

    The trailing axis of a contracts with the first axis of b.
    """
    a, b = as_tensor(a), as_tensor(b)
    if b.ndim != 2:
        raise ShapeError(f"matmul: right operand must be 2-D, got {b.shape}")
    if a.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")
    data = a.data @ b.data
    k, n = b.shape
    ta, tb = _tracked(a), _tracked(b)

    def bwd(g):
        ga = g @ b.data.T if ta else None
        gb = a.data.reshape(-1, k).T @ g.reshape(-1, n) if tb else None
        return ga, gb

    return _wrap("matmul", (a, b), data, bwd)


def leaky_relu(x: Tensor, alpha: float = 0.2) -> Tensor:
    """max(x, alpha*x); the derivative at exactly 0 takes the slope-1 side."""
    x = as_tensor(x)
    # single ufunc picks the right branch for any slope; the mask is only
    # materialized if backward actually runs
    pick = np.maximum if alpha <= 1.0 else np.minimum
    data = pick(x.data, alpha * x.data)
    return _unary("leaky_relu", x, data, lambda g: np.where(x.data < 0.0, alpha * g, g))


def concat(parts, axis: int = -1) -> Tensor:
    """Concatenate tensors along one axis; all other extents must agree."""
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise InvalidArgument("concat: empty part list")
    try:
        data = np.concatenate([p.data for p in parts], axis=axis)
    except ValueError as e:
        raise ShapeError(f"concat: non-axis extents differ: {[p.shape for p in parts]}") from e
    ax = axis % data.ndim
    widths = [p.data.shape[ax] for p in parts]
    offsets = np.cumsum(widths)[:-1]

    def bwd(g):
        return tuple(np.split(g, offsets, axis=ax))

    return _wrap("concat", parts, data, bwd)


def softmax(x: Tensor, axis: int = -1, scale: float = 1.0) -> Tensor:
    """Shift-stable softmax of x/scale along one axis."""
    x = as_tensor(x)
    if x.data.shape == () or x.data.shape[axis] == 0:
        raise InvalidArgument("softmax: empty or scalar input")
    if scale <= 0.0:
        raise InvalidArgument(f"softmax: scale must be positive, got {scale}")
    z = (x.data - x.data.max(axis=axis, keepdims=True)) / scale
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)) / scale,)

    return _wrap("softmax", (x,), y, bwd)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    x = as_tensor(x)
    if x.data.shape == () or x.data.shape[axis] == 0:
        raise InvalidArgument("log_softmax: empty or scalar input")
    z = x.data - x.data.max(axis=axis, keepdims=True)
    ls = z - np.log(np.exp(z).sum(axis=axis, keepdims=True))
    p = np.exp(ls)

    def bwd(g):
        return (g - p * g.sum(axis=axis, keepdims=True),)

    return _wrap("log_softmax", (x,), ls, bwd)


def take_rows(x: Tensor, idx) -> Tensor:
    """Gather leading-axis rows by an integer index array.

    Output shape is idx.shape + x.shape[1:].  The gradient scatter-adds,
    so repeated indices accumulate.
    """
    x = as_tensor(x)
    idx = np.asarray(idx)
    if not np.issubdtype(idx.dtype, np.integer):
        raise InvalidArgument("take_rows: index array must be integer")
    if x.ndim < 1:
        raise ShapeError("take_rows: input must have a leading axis")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise InvalidArgument(
            f"take_rows: index out of range for leading extent {x.shape[0]}"
        )
    data = x.data[idx]
    shape = x.data.shape

    def bwd(g):
        gz = np.zeros(shape)
        np.add.at(gz, idx, g)
        return (gz,)

    return _wrap("take_rows", (x,), data, bwd)


def broadcast_to(x: Tensor, shape) -> Tensor:
    x = as_tensor(x)
    try:
        data = np.broadcast_to(x.data, shape).copy()
    except ValueError as e:
        raise ShapeError(f"broadcast_to: {x.shape} does not broadcast to {tuple(shape)}") from e
    src = x.data.shape
    return _unary("broadcast_to", x, data, lambda g: _unbroadcast(g, src))


def cosine_similarity(a: Tensor, b: Tensor, axis: int = -1, eps: float = 1e-12) -> Tensor:
    """Cosine of the angle between a and b along one axis, same shapes.

    Degenerate pairs (either norm below eps) evaluate to 0 and block the
    gradient, keeping the backward pass free of 0/0 artifacts.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeError(f"cosine_similarity: shapes differ, {a.shape} vs {b.shape}")
    dot = (a.data * b.data).sum(axis=axis)
    na = np.sqrt((a.data * a.data).sum(axis=axis))
    nb = np.sqrt((b.data * b.data).sum(axis=axis))
    ok = (na >= eps) & (nb >= eps)
    denom = np.where(ok, na * nb, 1.0)
    # rounding can push exactly-parallel pairs to 1 + O(eps); keep the bound hard
    out = np.clip(np.where(ok, dot / denom, 0.0), -1.0, 1.0)
    ta, tb = _tracked(a), _tracked(b)

    def bwd(g):
        gm = np.expand_dims(np.where(ok, g, 0.0), axis)
        d = np.expand_dims(denom, axis)
        c = np.expand_dims(out, axis)
        ga = gb = None
        if ta:
            na2 = np.expand_dims(np.where(ok, na * na, 1.0), axis)
            ga = gm * (b.data / d - c * a.data / na2)
        if tb:
            nb2 = np.expand_dims(np.where(ok, nb * nb, 1.0), axis)
            gb = gm * (a.data / d - c * b.data / nb2)
        return ga, gb

    return _wrap("cosine_similarity", (a, b), out, bwd)


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero with probability rate, scale survivors by 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise InvalidArgument(f"dropout: rate must be in [0, 1), got {rate}")
    x = as_tensor(x)
    if rate == 0.0:
        return x
    mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _unary("dropout", x, x.data * mask, lambda g: g * mask)


# ---------------------------------------------------------------------------
# backward


def trace(loss: Tensor) -> list[TapeNode]:
    """Linearize the op DAG below loss into topological order.

    Every node's parents appear before it (leaves have no node at all);
    backward() consumes this list in reverse.
    """
    order: list[TapeNode] = []
    seen: set[int] = set()
    if loss.node is None:
        return order
    stack: list[tuple[TapeNode, bool]] = [(loss.node, False)]
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
            if p.node is not None and id(p.node) not in seen:
                stack.append((p.node, False))
    return order


def backward(loss: Tensor, params=None, accumulate: bool = False):
    """Populate .grad for every requires_grad leaf reachable from loss.

    loss must be scalar.  With params given, parameters the loss never
    touched get explicit zero gradients.  accumulate=True adds into
    existing .grad buffers instead of replacing them.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
    if params is not None and not accumulate:
        for p in params:
            p.grad = None

    node_grads: dict[int, np.ndarray] = {}
    leaf_grads: dict[int, np.ndarray] = {}
    leaves: dict[int, Tensor] = {}

    order = trace(loss)
    if order:
        node_grads[id(order[-1])] = np.ones_like(loss.data)
        for node in reversed(order):
            g = node_grads.pop(id(node), None)
            if g is None:
                continue
            grads = node.backward(g)
            for parent, pg in zip(node.parents, grads):
                if pg is None:
                    continue
                if parent.node is not None:
                    key = id(parent.node)
                    if key in node_grads:
                        node_grads[key] = node_grads[key] + pg
                    else:
                        node_grads[key] = pg
                elif parent.requires_grad:
                    key = id(parent)
                    leaves[key] = parent
                    if key in leaf_grads:
                        leaf_grads[key] = leaf_grads[key] + pg
                    else:
                        leaf_grads[key] = np.array(pg, copy=True)
    elif loss.requires_grad:
        leaves[id(loss)] = loss
        leaf_grads[id(loss)] = np.ones_like(loss.data)

    for key, leaf in leaves.items():
        g = np.broadcast_to(leaf_grads[key], leaf.data.shape)
        if accumulate and leaf.grad is not None:
            leaf.grad = leaf.grad + g
        else:
            leaf.grad = np.array(g, copy=True)

    if params is not None:
        for p in params:
            if p.grad is None:
                p.grad = np.zeros_like(p.data)


# ---------------------------------------------------------------------------
# numerical oracle


def finite_diff_grad(f, theta: Tensor, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of scalar f with respect to theta.

    f is re-evaluated with theta perturbed one element at a time; it must
    be deterministic.  theta's values are restored afterwards.
    """
    flat = theta.data.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(theta))
        flat[i] = orig - h
        fm = float(f(theta))
        flat[i] = orig
        grad[i] = (fp - fm) / (2.0 * h)
    return grad.reshape(theta.data.shape)


# ---------------------------------------------------------------------------
# parameters and optimizer


def uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    """Uniform in [-sqrt(1/fan_in), +sqrt(1/fan_in)], the package-wide init."""
    bound = math.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Linear:
    """Weight matrix (in, out) applied as x @ w, with an opt-in bias."""

    def __init__(self, rng, d_in: int, d_out: int, name: str, bias: bool = False):
        self.w = Tensor(uniform_init(rng, d_in, (d_in, d_out)), requires_grad=True, name=name)
        self.b = None
        if bias:
            self.b = Tensor(
                uniform_init(rng, d_in, (d_out,)), requires_grad=True, name=name + ".bias"
            )

    def __call__(self, x: Tensor) -> Tensor:
        y = matmul(x, self.w)
        if self.b is not None:
            y = y + self.b
        return y

    def parameters(self) -> list[Tensor]:
        return [self.w] if self.b is None else [self.w, self.b]


class AdamState:
    """First/second moment buffers plus the shared step counter."""

    def __init__(self, params):
        self.m = [np.zeros_like(p.data) for p in params]
        self.v = [np.zeros_like(p.data) for p in params]
        self.t = 0


def adam_step(
    params,
    grads,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One bias-corrected Adam update, applied to params in place."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("adam_step: params, grads and state lengths differ")
    state.t += 1
    t = state.t
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for i, (p, g) in enumerate(zip(params, grads)):
        g = np.asarray(g)
        if g.shape != p.data.shape:
            raise ShapeError(
                f"adam_step: grad shape {g.shape} does not match param {p.data.shape}"
            )
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * g
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * (g * g)
        m_hat = state.m[i] / c1
        v_hat = state.v[i] / c2
        p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)


class Adam:
    """Convenience wrapper reading gradients straight off the parameters."""

    def __init__(self, params, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.state = AdamState(self.params)

    def step(self, scale: float = 1.0):
        grads = [
            (p.grad if p.grad is not None else np.zeros_like(p.data)) * scale
            for p in self.params
        ]
        adam_step(self.params, grads, self.state, self.lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
