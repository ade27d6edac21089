"""Dense float64 tensors with reverse-mode autodiff and the Adam optimizer.

Everything is desk-scale: values are numpy float64 arrays, the graph is a
plain list of (parent, vector-Jacobian-product) pairs per node, and the
backward pass walks a topological order iteratively so long sequences do
not hit the recursion limit.
"""
from __future__ import annotations

import math

import numpy as np

LOG_FLOOR = -700.0  # exp(LOG_FLOOR) is the smallest probability log() will see


class ShapeError(ValueError):
    """Raised when operand shapes are incompatible; names both shapes."""


class NumericsError(RuntimeError):
    """Raised on non-finite values where the contract demands finiteness."""


class Tensor:
    """A node in the computation graph wrapping a float64 array.

    ``parents`` holds (parent, vjp) pairs; vjp maps the gradient w.r.t.
    this node to the gradient contribution for that parent.
    """

    __slots__ = ("value", "parents")

    def __init__(self, value, parents=()):
        self.value = np.asarray(value, dtype=np.float64)
        self.parents = parents

    @property
    def shape(self):
        return self.value.shape

    def item(self) -> float:
        return float(self.value)

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __repr__(self):
        return f"Tensor(shape={self.value.shape})"


class Parameter(Tensor):
    """A trainable leaf tensor with a persistent gradient buffer and a scope.

    ``scope`` is one of ``shared``, ``discriminator``, ``private:<task>``,
    ``task_head:<task>``. ``freeze_rows`` lists row indices whose gradient
    is discarded (used for the PAD embedding row).
    """

    __slots__ = ("grad", "scope", "name", "freeze_rows")

    def __init__(self, value, scope: str, name: str, freeze_rows=()):
        super().__init__(value)
        self.grad = np.zeros_like(self.value)
        self.scope = scope
        self.name = name
        self.freeze_rows = tuple(freeze_rows)

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, scope={self.scope!r}, shape={self.value.shape})"


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_same_shape(op: str, a: Tensor, b: Tensor):
    if a.value.shape != b.value.shape:
        raise ShapeError(f"{op}: shape mismatch {a.value.shape} vs {b.value.shape}")


# ---------------------------------------------------------------------------
# forward ops


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_same_shape("add", a, b)
    return Tensor(a.value + b.value, ((a, lambda g: g), (b, lambda g: g)))


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_same_shape("sub", a, b)
    return Tensor(a.value - b.value, ((a, lambda g: g), (b, lambda g: -g)))


def mul(a, b) -> Tensor:
    """Elementwise product; the second operand may be a python scalar."""
    a = _wrap(a)
    if isinstance(b, (int, float)):
        c = float(b)
        return Tensor(a.value * c, ((a, lambda g: g * c),))
    b = _wrap(b)
    _check_same_shape("mul", a, b)
    return Tensor(
        a.value * b.value,
        ((a, lambda g: g * b.value), (b, lambda g: g * a.value)),
    )


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product covering (m,n)@(n,k), (m,n)@(n,) and (n,)@(n,k)."""
    a, b = _wrap(a), _wrap(b)
    av, bv = a.value, b.value
    if av.ndim == 2 and bv.ndim == 1:
        if av.shape[1] != bv.shape[0]:
            raise ShapeError(f"matmul: shape mismatch {av.shape} vs {bv.shape}")
        return Tensor(
            av @ bv,
            ((a, lambda g: np.outer(g, bv)), (b, lambda g: av.T @ g)),
        )
    if av.ndim == 1 and bv.ndim == 2:
        if av.shape[0] != bv.shape[0]:
            raise ShapeError(f"matmul: shape mismatch {av.shape} vs {bv.shape}")
        return Tensor(
            av @ bv,
            ((a, lambda g: bv @ g), (b, lambda g: np.outer(av, g))),
        )
    if av.ndim == 2 and bv.ndim == 2:
        if av.shape[1] != bv.shape[0]:
            raise ShapeError(f"matmul: shape mismatch {av.shape} vs {bv.shape}")
        return Tensor(
            av @ bv,
            ((a, lambda g: g @ bv.T), (b, lambda g: av.T @ g)),
        )
    raise ShapeError(f"matmul: unsupported ranks {av.shape} vs {bv.shape}")


def dot(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.value.ndim != 1 or b.value.ndim != 1 or a.value.shape != b.value.shape:
        raise ShapeError(f"dot: shape mismatch {a.value.shape} vs {b.value.shape}")
    return Tensor(
        a.value @ b.value,
        ((a, lambda g: g * b.value), (b, lambda g: g * a.value)),
    )


def concat(parts) -> Tensor:
    """Concatenate vectors (scalars are promoted to length-1 vectors)."""
    parts = [_wrap(p) for p in parts]
    if not parts:
        raise ShapeError("concat: empty input")
    vecs = []
    for p in parts:
        if p.value.ndim > 1:
            raise ShapeError(f"concat: expected vector or scalar, got {p.value.shape}")
        vecs.append(np.atleast_1d(p.value))
    out = np.concatenate(vecs)
    parents = []
    offset = 0
    for p, v in zip(parts, vecs):
        n = v.shape[0]
        lo, hi = offset, offset + n
        scalar = p.value.ndim == 0
        parents.append(
            (p, (lambda g, lo=lo, hi=hi, scalar=scalar: g[lo:hi].reshape(()) if scalar else g[lo:hi]))
        )
        offset += n
    return Tensor(out, tuple(parents))


def row(a: Tensor, i: int) -> Tensor:
    """Extract row i of a 2-D tensor."""
    a = _wrap(a)
    if a.value.ndim != 2:
        raise ShapeError(f"row: expected 2-D tensor, got {a.value.shape}")
    if not 0 <= i < a.value.shape[0]:
        raise ShapeError(f"row: index {i} out of range for shape {a.value.shape}")

    def vjp(g, i=i, shape=a.value.shape):
        full = np.zeros(shape)
        full[i] = g
        return full

    return Tensor(a.value[i], ((a, vjp),))


def pick(a: Tensor, i: int) -> Tensor:
    """Extract element i of a vector as a scalar."""
    a = _wrap(a)
    if a.value.ndim != 1:
        raise ShapeError(f"pick: expected vector, got {a.value.shape}")
    if not 0 <= i < a.value.shape[0]:
        raise ShapeError(f"pick: index {i} out of range for shape {a.value.shape}")

    def vjp(g, i=i, n=a.value.shape[0]):
        full = np.zeros(n)
        full[i] = g
        return full

    return Tensor(a.value[i], ((a, vjp),))


def gather_rows(a: Tensor, ids) -> Tensor:
    """Gather rows of a 2-D tensor into a (len(ids), d) tensor."""
    a = _wrap(a)
    if a.value.ndim != 2:
        raise ShapeError(f"gather_rows: expected 2-D tensor, got {a.value.shape}")
    ids = list(ids)
    for i in ids:
        if not 0 <= i < a.value.shape[0]:
            raise ShapeError(f"gather_rows: index {i} out of range for shape {a.value.shape}")

    def vjp(g, ids=ids, shape=a.value.shape):
        full = np.zeros(shape)
        np.add.at(full, ids, g)
        return full

    return Tensor(a.value[ids], ((a, vjp),))


def tanh(a: Tensor) -> Tensor:
    a = _wrap(a)
    y = np.tanh(a.value)
    return Tensor(y, ((a, lambda g: g * (1.0 - y * y)),))


def sigmoid(a: Tensor) -> Tensor:
    a = _wrap(a)
    y = 1.0 / (1.0 + np.exp(-a.value))
    return Tensor(y, ((a, lambda g: g * y * (1.0 - y)),))


def relu(a: Tensor) -> Tensor:
    """max(x, 0); subgradient at the kink is 0."""
    a = _wrap(a)
    mask = a.value > 0.0
    return Tensor(np.where(mask, a.value, 0.0), ((a, lambda g: g * mask),))


def log(a: Tensor) -> Tensor:
    """Natural log with the value clamped at LOG_FLOOR (numerical guard)."""
    a = _wrap(a)
    floor = math.exp(LOG_FLOOR)
    clamped = np.maximum(a.value, floor)
    return Tensor(np.log(clamped), ((a, lambda g: g / clamped),))


def softmax(a: Tensor) -> Tensor:
    a = _wrap(a)
    if a.value.ndim != 1:
        raise ShapeError(f"softmax: expected vector, got {a.value.shape}")
    if a.value.shape[0] == 0:
        raise ShapeError("softmax: empty axis")
    shifted = a.value - a.value.max()
    e = np.exp(shifted)
    s = e / e.sum()
    return Tensor(s, ((a, lambda g: s * (g - g @ s)),))


def tsum(a: Tensor) -> Tensor:
    """Sum of all elements, as a scalar tensor."""
    a = _wrap(a)
    return Tensor(a.value.sum(), ((a, lambda g: np.full(a.value.shape, g)),))


def add_n(tensors) -> Tensor:
    """Sum a non-empty list of same-shape tensors."""
    tensors = [_wrap(t) for t in tensors]
    if not tensors:
        raise ShapeError("add_n: empty input")
    for t in tensors[1:]:
        _check_same_shape("add_n", tensors[0], t)
    out = np.zeros_like(tensors[0].value)
    for t in tensors:
        out = out + t.value
    return Tensor(out, tuple((t, lambda g: g) for t in tensors))


def mean_n(tensors) -> Tensor:
    return mul(add_n(tensors), 1.0 / len(tensors))


def constant(value) -> Tensor:
    """A detached copy: same values, no parents."""
    v = value.value if isinstance(value, Tensor) else value
    return Tensor(np.array(v, dtype=np.float64))


def zeros(*shape) -> Tensor:
    return Tensor(np.zeros(shape))


# ---------------------------------------------------------------------------
# reverse pass


def _topo_order(loss: Tensor):
    order = []
    seen = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Tensor):
    """Accumulate d(loss)/d(p) into p.grad for every reachable Parameter.

    Gradients are added, not overwritten; callers clear them between steps.
    """
    if loss.value.shape != ():
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.value.shape}")
    order = _topo_order(loss)
    grads = {id(loss): np.ones(())}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        if isinstance(node, Parameter):
            if node.freeze_rows:
                g = np.array(g)
                g[list(node.freeze_rows)] = 0.0
            node.grad += g
        for parent, vjp in node.parents:
            contrib = vjp(g)
            key = id(parent)
            if key in grads:
                grads[key] = grads[key] + contrib
            else:
                grads[key] = contrib


# ---------------------------------------------------------------------------
# Adam


class AdamState:
    """Per-parameter Adam moments, keyed by parameter name.

    Each parameter keeps its own step counter so that groups updated at
    different cadences (discriminator vs shared vs per-task) all get the
    correct bias correction.
    """

    def __init__(self, lr: float = 0.001, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t: dict[str, int] = {}


def adam_step(params, state: AdamState):
    """Apply one Adam update to each parameter, then clear its gradient."""
    for p in params:
        if not np.isfinite(p.grad).all():
            raise NumericsError(f"non-finite gradient on parameter {p.name!r}")
        m = state.m.get(p.name)
        if m is None:
            m = state.m[p.name] = np.zeros_like(p.value)
            state.v[p.name] = np.zeros_like(p.value)
            state.t[p.name] = 0
        v = state.v[p.name]
        state.t[p.name] += 1
        t = state.t[p.name]
        m[...] = state.beta1 * m + (1.0 - state.beta1) * p.grad
        v[...] = state.beta2 * v + (1.0 - state.beta2) * p.grad**2
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        p.value -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        p.zero_grad()


# ---------------------------------------------------------------------------
# gradient checking


def finite_difference_check(f, params, h: float = 1e-5) -> float:
    """Compare analytic gradients of scalar f() against central differences.

    ``f`` must rebuild its graph from the current parameter values on every
    call. Returns the worst relative error over all coordinates, with the
    denominator floored at 1 so near-zero gradients are compared absolutely.
    """
    params = list(params)
    for p in params:
        p.zero_grad()
    loss = f()
    if not np.isfinite(loss.value):
        raise NumericsError("finite_difference_check: non-finite loss")
    backward(loss)
    analytic = [p.grad.copy() for p in params]
    for p in params:
        p.zero_grad()

    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.value.reshape(-1)
        for i in range(flat.shape[0]):
            orig = flat[i]
            flat[i] = orig + h
            fp = f().item()
            flat[i] = orig - h
            fm = f().item()
            flat[i] = orig
            if not (math.isfinite(fp) and math.isfinite(fm)):
                raise NumericsError("finite_difference_check: non-finite loss")
            numeric = (fp - fm) / (2.0 * h)
            ai = a.reshape(-1)[i]
            err = abs(ai - numeric) / max(1.0, abs(ai), abs(numeric))
            if err > worst:
                worst = err
    return worst
