"""Reverse-mode differentiation core, Adam, and a finite-difference checker.

Everything is float64 on numpy storage. Ops record (output, parent, vjp)
triples on the active Tape; ``backward`` replays the tape once in reverse,
accumulating into leaf ``grad`` buffers. A Tape is confined to one thread
and is single-use.

The op set is intentionally small: exactly what the query encoder, the
query-conditioned GRU, the contrastive losses and the two classification
heads need.
"""

from __future__ import annotations

import threading

import numpy as np

from .errors import NumericError, ShapeError

Array = np.ndarray

_TAPES = threading.local()  # .active: the thread's currently recording Tape


def _active_tape() -> "Tape | None":
    return getattr(_TAPES, "active", None)


class Tensor:
    __slots__ = ("data", "requires_grad", "grad", "_is_leaf")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if not _measuring and not np.all(np.isfinite(arr)):
            raise NumericError("tensor initialized with non-finite values")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad: Array | None = None
        self._is_leaf = True

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.shape != ():
            raise ShapeError(f"item() needs a scalar, got shape {self.data.shape}")
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # small sugar; everything routes through the module-level ops
    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return elementwise_mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)


class Tape:
    """Forward-order op recording; single-use for one backward pass."""

    def __init__(self) -> None:
        self._entries: list[tuple[Tensor, list[tuple[Tensor, object]]]] = []
        self._on_tape: set[int] = set()
        self._consumed = False

    def __enter__(self) -> "Tape":
        if _active_tape() is not None:
            raise RuntimeError("a Tape is already active; tapes do not nest")
        _TAPES.active = self
        return self

    def __exit__(self, *exc) -> None:
        _TAPES.active = None

    def _record(self, out: Tensor, parents: list[tuple[Tensor, object]]) -> None:
        self._entries.append((out, parents))
        self._on_tape.add(id(out))


def backward(tape: Tape, loss: Tensor) -> None:
    """Populate leaf gradients with d(loss)/d(leaf).

    Gradients accumulate additively, both across multiple uses of a tensor
    inside the graph and across repeated backward calls on fresh tapes.
    """
    if loss.data.shape != ():
        raise ShapeError(f"loss must be scalar, got shape {loss.data.shape}")
    if id(loss) not in tape._on_tape:
        raise RuntimeError("loss was not recorded on this tape")
    if tape._consumed:
        raise RuntimeError("tape already consumed; rebuild the forward pass")
    tape._consumed = True
    grads: dict[int, Array] = {id(loss): np.ones(())}
    for out, parents in reversed(tape._entries):
        gout = grads.pop(id(out), None)
        if gout is None:
            continue
        for parent, vjp in parents:
            contrib = vjp(gout)
            if parent._is_leaf:
                if parent.grad is None:
                    parent.grad = np.zeros_like(parent.data)
                parent.grad += contrib
            else:
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + contrib
                else:
                    grads[key] = contrib


# When true, _make skips finiteness checks and tape bookkeeping. Only
# grad_check flips this, around its finite-difference probes: those evaluate
# the loss tens of thousands of times with no tape active, and the per-op
# overhead would otherwise dominate the measurement. Process-wide, so
# grad_check must not run concurrently with taped forward passes.
_measuring = False


def _make(data: Array, parents: list[tuple[Tensor, object]], op: str) -> Tensor:
    if _measuring:
        out = Tensor.__new__(Tensor)
        out.data = data
        out.grad = None
        out.requires_grad = False
        out._is_leaf = True
        return out
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite output from {op}")
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    tape = _active_tape()
    tracked = [(p, vjp) for p, vjp in parents if p.requires_grad]
    if tape is not None and tracked:
        out.requires_grad = True
        out._is_leaf = False
        tape._record(out, tracked)
    else:
        out.requires_grad = False
        out._is_leaf = True
    return out


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def zeros(shape) -> Tensor:
    return Tensor(np.zeros(shape), requires_grad=False)


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ")


def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    return _make(a.data + b.data, [(a, lambda g: g), (b, lambda g: g)], "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    return _make(a.data - b.data, [(a, lambda g: g), (b, lambda g: -g)], "sub")


def elementwise_mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "elementwise_mul")
    ad, bd = a.data, b.data
    return _make(
        ad * bd, [(a, lambda g: g * bd), (b, lambda g: g * ad)], "elementwise_mul"
    )


def affine(t: Tensor, scale: float = 1.0, shift: float = 0.0) -> Tensor:
    """scale * t + shift with constant coefficients."""
    return _make(scale * t.data + shift, [(t, lambda g: scale * g)], "affine")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    ad, bd = a.data, b.data
    if ad.ndim == 1 and bd.ndim == 2:
        if ad.shape[0] != bd.shape[0]:
            raise ShapeError(f"matmul: shapes {ad.shape} and {bd.shape} misaligned")
        parents = [(a, lambda g: bd @ g), (b, lambda g: np.outer(ad, g))]
    elif ad.ndim == 2 and bd.ndim == 1:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: shapes {ad.shape} and {bd.shape} misaligned")
        parents = [(a, lambda g: np.outer(g, bd)), (b, lambda g: ad.T @ g)]
    elif ad.ndim == 2 and bd.ndim == 2:
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"matmul: shapes {ad.shape} and {bd.shape} misaligned")
        parents = [(a, lambda g: g @ bd.T), (b, lambda g: ad.T @ g)]
    else:
        raise ShapeError(f"matmul: unsupported ranks {ad.shape} @ {bd.shape}")
    return _make(ad @ bd, parents, "matmul")


def transpose(t: Tensor) -> Tensor:
    if t.data.ndim != 2:
        raise ShapeError(f"transpose: need a matrix, got shape {t.data.shape}")
    return _make(t.data.T.copy(), [(t, lambda g: g.T)], "transpose")


def concat(parts: list[Tensor]) -> Tensor:
    """Concatenate 1-D tensors."""
    offsets = [0]
    for p in parts:
        if p.data.ndim != 1:
            raise ShapeError(f"concat: need vectors, got shape {p.data.shape}")
        offsets.append(offsets[-1] + p.data.shape[0])
    parents = []
    for p, lo, hi in zip(parts, offsets, offsets[1:]):
        parents.append((p, lambda g, lo=lo, hi=hi: g[lo:hi]))
    return _make(np.concatenate([p.data for p in parts]), parents, "concat")


def stack_rows(rows: list[Tensor]) -> Tensor:
    """Stack 1-D tensors into a matrix, one per row."""
    for r in rows:
        if r.data.ndim != 1 or r.data.shape != rows[0].data.shape:
            raise ShapeError("stack_rows: rows must be equal-length vectors")
    parents = [(r, lambda g, i=i: g[i]) for i, r in enumerate(rows)]
    return _make(np.stack([r.data for r in rows]), parents, "stack_rows")


def embedding_lookup(table: Tensor, indices) -> Tensor:
    """Select rows of a 2-D table; int -> vector, list of ints -> matrix."""
    if table.data.ndim != 2:
        raise ShapeError(f"embedding_lookup: table must be 2-D, got {table.data.shape}")
    if isinstance(indices, (int, np.integer)):
        idx = int(indices)

        def vjp_one(g, idx=idx):
            out = np.zeros_like(table.data)
            out[idx] = g
            return out

        return _make(table.data[idx].copy(), [(table, vjp_one)], "embedding_lookup")
    idx = np.asarray(indices, dtype=np.intp)

    def vjp_many(g, idx=idx):
        out = np.zeros_like(table.data)
        np.add.at(out, idx, g)
        return out

    return _make(table.data[idx].copy(), [(table, vjp_many)], "embedding_lookup")


def take(t: Tensor, index: int) -> Tensor:
    if t.data.ndim != 1:
        raise ShapeError(f"take: need a vector, got shape {t.data.shape}")

    def vjp(g):
        out = np.zeros_like(t.data)
        out[index] = g
        return out

    return _make(t.data[index].copy(), [(t, vjp)], "take")


def diag_part(t: Tensor) -> Tensor:
    if t.data.ndim != 2 or t.data.shape[0] != t.data.shape[1]:
        raise ShapeError(f"diag_part: need a square matrix, got {t.data.shape}")

    def vjp(g):
        out = np.zeros_like(t.data)
        np.fill_diagonal(out, g)
        return out

    return _make(np.diagonal(t.data).copy(), [(t, vjp)], "diag_part")


def sigmoid(t: Tensor) -> Tensor:
    x = t.data
    # exp only ever sees non-positive arguments, so it cannot overflow.
    z = np.exp(-np.abs(x))
    out = np.where(x >= 0.0, 1.0 / (1.0 + z), z / (1.0 + z))
    return _make(out, [(t, lambda g: g * out * (1.0 - out))], "sigmoid")


def tanh(t: Tensor) -> Tensor:
    out = np.tanh(t.data)
    return _make(out, [(t, lambda g: g * (1.0 - out * out))], "tanh")


def leaky_relu(t: Tensor, slope: float = 0.01) -> Tensor:
    mask = np.where(t.data > 0.0, 1.0, slope)
    return _make(t.data * mask, [(t, lambda g: g * mask)], "leaky_relu")


def softmax(t: Tensor) -> Tensor:
    if t.data.ndim != 1:
        raise ShapeError(f"softmax: need a vector, got shape {t.data.shape}")
    shifted = t.data - t.data.max()
    e = np.exp(shifted)
    out = e / e.sum()

    def vjp(g):
        return out * (g - np.dot(g, out))

    return _make(out, [(t, vjp)], "softmax")


def log_softmax(t: Tensor) -> Tensor:
    """Row-wise log softmax; accepts a vector or a matrix."""
    x = t.data
    if x.ndim == 1:
        shifted = x - x.max()
        lse = np.log(np.exp(shifted).sum())
        out = shifted - lse
        sm = np.exp(out)
        return _make(out, [(t, lambda g: g - sm * g.sum())], "log_softmax")
    if x.ndim == 2:
        shifted = x - x.max(axis=1, keepdims=True)
        lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
        out = shifted - lse
        sm = np.exp(out)
        return _make(
            out, [(t, lambda g: g - sm * g.sum(axis=1, keepdims=True))], "log_softmax"
        )
    raise ShapeError(f"log_softmax: need rank 1 or 2, got shape {x.shape}")


def logsumexp(t: Tensor) -> Tensor:
    if t.data.ndim != 1:
        raise ShapeError(f"logsumexp: need a vector, got shape {t.data.shape}")
    m = t.data.max()
    e = np.exp(t.data - m)
    s = e.sum()
    return _make(np.asarray(m + np.log(s)), [(t, lambda g: g * e / s)], "logsumexp")


def sum_all(t: Tensor) -> Tensor:
    return _make(
        np.asarray(t.data.sum()), [(t, lambda g: np.full_like(t.data, g))], "sum_all"
    )


def mean(t: Tensor) -> Tensor:
    n = t.data.size
    return _make(
        np.asarray(t.data.mean()),
        [(t, lambda g: np.full_like(t.data, g / n))],
        "mean",
    )


_COS_EPS = 1e-12


def cosine_similarity(a: Tensor, b: Tensor) -> Tensor:
    """cos(a, b) for vectors, or row-wise cos(a_i, b) for matrix ``a``.

    Denominator carries a 1e-12 guard; an exactly zero-norm operand is a
    numeric error.
    """
    bd = b.data
    if bd.ndim != 1:
        raise ShapeError(f"cosine_similarity: second arg must be a vector, got {bd.shape}")
    nb = np.linalg.norm(bd)
    if nb == 0.0:
        raise NumericError("cosine_similarity: zero-norm vector")
    if a.data.ndim == 1:
        ad = a.data
        if ad.shape != bd.shape:
            raise ShapeError(f"cosine_similarity: shapes {ad.shape} and {bd.shape} differ")
        na = np.linalg.norm(ad)
        if na == 0.0:
            raise NumericError("cosine_similarity: zero-norm vector")
        dot = float(ad @ bd)
        denom = na * nb + _COS_EPS
        s = dot / denom

        def vjp_a(g):
            return g * (bd / denom - dot * nb / (na * denom * denom) * ad)

        def vjp_b(g):
            return g * (ad / denom - dot * na / (nb * denom * denom) * bd)

        return _make(np.asarray(s), [(a, vjp_a), (b, vjp_b)], "cosine_similarity")
    if a.data.ndim == 2:
        ad = a.data
        if ad.shape[1] != bd.shape[0]:
            raise ShapeError(f"cosine_similarity: shapes {ad.shape} and {bd.shape} misaligned")
        na = np.linalg.norm(ad, axis=1)
        if np.any(na == 0.0):
            raise NumericError("cosine_similarity: zero-norm row")
        dots = ad @ bd
        denom = na * nb + _COS_EPS
        s = dots / denom

        def vjp_rows(g):
            coeff = g * dots * nb / (na * denom * denom)
            return (g / denom)[:, None] * bd[None, :] - coeff[:, None] * ad

        def vjp_vec(g):
            # d s_i / d b = a_i / denom_i - dots_i * na_i * b / (nb * denom_i^2)
            w = (g * dots * na / (denom * denom)).sum() / nb
            return ad.T @ (g / denom) - w * bd

        return _make(s, [(a, vjp_rows), (b, vjp_vec)], "cosine_similarity")
    raise ShapeError(f"cosine_similarity: unsupported rank {a.data.shape}")


def row_normalize(t: Tensor) -> Tensor:
    """Rows scaled to unit norm (with the cosine epsilon guard)."""
    if t.data.ndim != 2:
        raise ShapeError(f"row_normalize: need a matrix, got shape {t.data.shape}")
    x = t.data
    norms = np.linalg.norm(x, axis=1)
    if np.any(norms == 0.0):
        raise NumericError("row_normalize: zero-norm row")
    denom = norms + _COS_EPS
    out = x / denom[:, None]

    def vjp(g):
        dots = (g * x).sum(axis=1)
        return g / denom[:, None] - (dots / (norms * denom * denom))[:, None] * x

    return _make(out, [(t, vjp)], "row_normalize")


def bilinear_form(a: Tensor, k: Tensor, b: Tensor) -> Tensor:
    """out_r = sum_ij a_i K[i,j,r] b_j for a 3-axis tensor K."""
    ad, kd, bd = a.data, k.data, b.data
    if kd.ndim != 3 or ad.ndim != 1 or bd.ndim != 1:
        raise ShapeError(
            f"bilinear_form: need vector, 3-tensor, vector;"
            f" got {ad.shape}, {kd.shape}, {bd.shape}"
        )
    if kd.shape[0] != ad.shape[0] or kd.shape[1] != bd.shape[0]:
        raise ShapeError(
            f"bilinear_form: K axes {kd.shape} misaligned with {ad.shape}, {bd.shape}"
        )
    p, q, r = kd.shape
    # Contract as one GEMM: tensordot is disproportionately slow at these sizes.
    t = (ad @ kd.reshape(p, q * r)).reshape(q, r)  # t[j, r] = sum_i a_i K[i, j, r]
    out = bd @ t

    def vjp_a(g):
        return kd.reshape(ad.shape[0], -1) @ np.outer(bd, g).ravel()

    def vjp_k(g):
        return ad[:, None, None] * np.outer(bd, g)[None, :, :]

    def vjp_b(g):
        return t @ g

    return _make(out, [(a, vjp_a), (k, vjp_k), (b, vjp_b)], "bilinear_form")


class Parameter:
    """Named trainable tensor."""

    __slots__ = ("name", "tensor")

    def __init__(self, name: str, value: Array):
        self.name = name
        self.tensor = Tensor(np.array(value, dtype=np.float64), requires_grad=True)

    @property
    def data(self) -> Array:
        return self.tensor.data

    @property
    def grad(self) -> Array | None:
        return self.tensor.grad

    def zero_grad(self) -> None:
        self.tensor.zero_grad()

    def __repr__(self) -> str:
        return f"Parameter({self.name!r}, shape={self.tensor.data.shape})"


class AdamState:
    """First/second moment buffers plus the shared step counter."""

    def __init__(self, params: list[Parameter], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in optimizer: {sorted(names)}")
        self.m = {p.name: np.zeros_like(p.data) for p in params}
        self.v = {p.name: np.zeros_like(p.data) for p in params}


def adam_step(params: list[Parameter], state: AdamState) -> None:
    """One bias-corrected Adam update; zeroes gradients afterwards."""
    state.step += 1
    b1, b2, t = state.beta1, state.beta2, state.step
    for p in params:
        g = p.grad
        if g is None:
            continue
        m = state.m[p.name]
        v = state.v[p.name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p.tensor.data = p.tensor.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        p.zero_grad()


def grad_check(loss_fn, params: list[Parameter], epsilon: float = 1e-5) -> float:
    """Max relative error between tape gradients and central differences.

    ``loss_fn`` must be deterministic (freeze any sampling). Relative error
    is |analytic - numeric| / max(1e-8, |analytic| + |numeric|), elementwise
    over every parameter.

    Central differences at one step size cannot resolve components whose
    derivative sits near the roundoff floor u*|loss|/epsilon, so components
    that disagree at the base step are re-measured at 10x, 100x and 1000x
    the step and the best agreement is kept. A wrong gradient disagrees at
    every step size; only noise-limited components are rescued.

    The numeric probes run with per-op finiteness checks and tape lookups
    suspended (see ``_measuring``), so do not call this concurrently with a
    taped forward pass on another thread.
    """

    def central_diff(flat: Array, i: int, eps: float) -> float:
        orig = flat[i]
        flat[i] = orig + eps
        plus = loss_fn().item()
        flat[i] = orig - eps
        minus = loss_fn().item()
        flat[i] = orig
        return (plus - minus) / (2.0 * eps)

    def rel_error(a: float, n: float) -> float:
        return abs(a - n) / max(1e-8, abs(a) + abs(n))

    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    backward(tape, loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy()
                for p in params]
    for p in params:
        p.zero_grad()

    global _measuring
    worst = 0.0
    _measuring = True
    try:
        for p, grad in zip(params, analytic):
            flat = p.tensor.data.ravel()
            ana = grad.ravel()
            for i in range(flat.size):
                err = rel_error(ana[i], central_diff(flat, i, epsilon))
                for scale in (10.0, 100.0, 1000.0):
                    if err <= 1e-5:
                        break
                    err = min(
                        err, rel_error(ana[i], central_diff(flat, i, epsilon * scale))
                    )
                if err > worst:
                    worst = err
    finally:
        _measuring = False
    return worst
