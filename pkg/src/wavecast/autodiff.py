"""Dense float64 tensors with tape-based reverse-mode differentiation.

Operations record themselves on the innermost active :class:`Tape` whenever
one of their operands requires a gradient.  Outside a tape everything runs as
plain numpy, which is what inference uses.

    with Tape() as tape:
        loss = mean(square(matmul(x, w)))
    backward(loss, tape)
    w.grad  # dloss/dw
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

__all__ = [
    "DimensionError",
    "ContractError",
    "EvaluationError",
    "UnsupportedLengthError",
    "Tensor",
    "Tape",
    "backward",
    "zero_grad",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "transpose",
    "reshape",
    "permute",
    "concat",
    "take",
    "square",
    "tsum",
    "mean",
    "softmax_rows",
    "layer_norm",
    "rdft",
    "mask_multiply",
    "gradient_check",
    "GradCheckReport",
]


class DimensionError(ValueError):
    pass


class ContractError(ValueError):
    pass


class EvaluationError(ArithmeticError):
    pass


class UnsupportedLengthError(ValueError):
    pass


ArrayLike = Union[np.ndarray, float, int, Sequence]


class Tensor:
    """A float64 array plus an optional gradient slot.

    ``data`` is treated as immutable once the tensor is produced; ops always
    allocate new output arrays.
    """

    __slots__ = ("data", "requires_grad", "grad", "_node", "__weakref__")

    def __init__(self, data: ArrayLike, requires_grad: bool = False):
        self.data = np.array(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self._node: Optional[_Node] = None

    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def values(self) -> np.ndarray:
        """Row-major flat view of the data."""
        return self.data.reshape(-1)

    @property
    def is_leaf(self) -> bool:
        return self._node is None

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> "Tensor":
        return transpose(self)


@dataclass(eq=False)
class _Node:
    out: Tensor
    parents: tuple
    backward: Callable[[np.ndarray], tuple]


class Tape:
    """Ordered record of differentiable operations.

    Nodes are appended as ops execute, so the list is topologically ordered
    by construction.  Tapes nest; ops record on the innermost one.
    """

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.nodes)

    def backward(self, loss: Tensor) -> None:
        backward(loss, self)


_local = threading.local()


def _tape_stack() -> list:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def _active_tape() -> Optional[Tape]:
    stack = _tape_stack()
    return stack[-1] if stack else None


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _record(out_data: np.ndarray, parents: tuple, backward_fn) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out._node = None
    tape = _active_tape()
    needs = any(p.requires_grad for p in parents)
    out.requires_grad = needs and tape is not None
    if out.requires_grad:
        node = _Node(out, parents, backward_fn)
        out._node = node
        tape.nodes.append(node)
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def backward(loss: Tensor, tape: Tape) -> None:
    """Accumulate d(loss)/d(leaf) into ``leaf.grad`` for every leaf on the tape.

    Gradients add onto whatever is already in ``leaf.grad``; call
    :func:`zero_grad` first for a fresh pass.  Leaves that appear on the tape
    but do not influence the loss receive zeros.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    leaves: dict[int, Tensor] = {}
    for node in tape.nodes:
        for p in node.parents:
            if p.requires_grad and p._node is None:
                leaves[id(p)] = p
    if loss.requires_grad and loss._node is None:
        leaves[id(loss)] = loss

    for node in reversed(tape.nodes):
        g = grads.pop(id(node.out), None)
        if g is None:
            continue
        pgrads = node.backward(g)
        for p, pg in zip(node.parents, pgrads):
            if pg is None or not p.requires_grad:
                continue
            key = id(p)
            if key in grads:
                grads[key] = grads[key] + pg
            else:
                grads[key] = pg

    for key, leaf in leaves.items():
        g = grads.get(key)
        if g is None:
            g = np.zeros_like(leaf.data)
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def zero_grad(tensors) -> None:
    for t in tensors:
        t.grad = None


# --- elementwise -----------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    sa, sb = a.shape, b.shape
    return _record(
        a.data + b.data,
        (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)),
    )


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    sa, sb = a.shape, b.shape
    return _record(
        a.data - b.data,
        (a, b),
        lambda g: (_unbroadcast(g, sa), _unbroadcast(-g, sb)),
    )


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    ad, bd = a.data, b.data
    return _record(
        ad * bd,
        (a, b),
        lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)),
    )


def neg(a) -> Tensor:
    a = _wrap(a)
    return _record(-a.data, (a,), lambda g: (-g,))


def square(a) -> Tensor:
    a = _wrap(a)
    ad = a.data
    return _record(ad * ad, (a,), lambda g: (2.0 * ad * g,))


def mask_multiply(a, mask: np.ndarray) -> Tensor:
    """Multiply by a constant mask (dropout); the mask gets no gradient."""
    a = _wrap(a)
    m = np.asarray(mask, dtype=np.float64)
    return _record(a.data * m, (a,), lambda g: (_unbroadcast(g * m, a.shape),))


# --- shape ----------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product over the last two axes; leading axes broadcast."""
    a, b = _wrap(a), _wrap(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise DimensionError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    if ad.ndim > 2 and bd.ndim == 2:
        # stacked rows times one matrix: a single GEMM each way
        a2 = ad.reshape(-1, ad.shape[-1])

        def _back_flat(g):
            g2 = g.reshape(-1, g.shape[-1])
            ga = (g2 @ bd.T).reshape(ad.shape) if a.requires_grad else None
            gb = a2.T @ g2 if b.requires_grad else None
            return ga, gb

        return _record((a2 @ bd).reshape(ad.shape[:-1] + bd.shape[-1:]), (a, b), _back_flat)

    def _back(g):
        ga = g @ np.swapaxes(bd, -1, -2) if a.requires_grad else None
        gb = np.swapaxes(ad, -1, -2) @ g if b.requires_grad else None
        return (
            None if ga is None else _unbroadcast(ga, ad.shape),
            None if gb is None else _unbroadcast(gb, bd.shape),
        )

    return _record(ad @ bd, (a, b), _back)


def transpose(a) -> Tensor:
    a = _wrap(a)
    return _record(np.swapaxes(a.data, -1, -2), (a,), lambda g: (np.swapaxes(g, -1, -2),))


def permute(a, axes) -> Tensor:
    a = _wrap(a)
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    return _record(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    old = a.shape
    return _record(a.data.reshape(shape), (a,), lambda g: (g.reshape(old),))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    ts = tuple(_wrap(t) for t in tensors)
    sizes = [t.shape[axis] for t in ts]
    cuts = np.cumsum(sizes)[:-1]

    def _back(g):
        return tuple(np.split(g, cuts, axis=axis))

    return _record(np.concatenate([t.data for t in ts], axis=axis), ts, _back)


def take(a, indices, axis: int) -> Tensor:
    """Gather along ``axis`` (duplicate indices accumulate in backward)."""
    a = _wrap(a)
    idx = np.asarray(indices, dtype=np.intp)
    shape = a.shape

    def _back(g):
        out = np.zeros(shape)
        moved = np.moveaxis(out, axis, 0)
        np.add.at(moved, idx, np.moveaxis(g, axis, 0))
        return (out,)

    return _record(np.take(a.data, idx, axis=axis), (a,), _back)


# --- reductions -----------------------------------------------------------


def tsum(a) -> Tensor:
    a = _wrap(a)
    shape = a.shape
    return _record(np.asarray(a.data.sum()), (a,), lambda g: (np.broadcast_to(g, shape).copy(),))


def mean(a) -> Tensor:
    a = _wrap(a)
    shape, n = a.shape, a.data.size
    return _record(
        np.asarray(a.data.mean()),
        (a,),
        lambda g: (np.full(shape, float(g) / n),),
    )


# --- normalisers ----------------------------------------------------------


def softmax_rows(x) -> Tensor:
    """Softmax over the last axis with max subtraction."""
    x = _wrap(x)
    s = x.data - x.data.max(axis=-1, keepdims=True)
    np.exp(s, out=s)
    s /= s.sum(axis=-1, keepdims=True)

    def _back(g):
        gs = g * s
        gs -= s * gs.sum(axis=-1, keepdims=True)
        return (gs,)

    return _record(s, (x,), _back)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Normalise each row (last axis) with population variance, then affine."""
    if eps <= 0:
        raise ValueError("layer_norm eps must be positive")
    x, gain, bias = _wrap(x), _wrap(gain), _wrap(bias)
    n = x.shape[-1]
    if gain.shape != (n,) or bias.shape != (n,):
        raise DimensionError(f"layer_norm affine shapes {gain.shape}, {bias.shape} do not match width {n}")
    xhat = x.data - x.data.mean(axis=-1, keepdims=True)
    var = np.einsum("...i,...i->...", xhat, xhat)[..., None] / n
    inv = 1.0 / np.sqrt(var + eps)
    xhat *= inv
    gd = gain.data
    out = xhat * gd
    out += bias.data

    def _back(g):
        gx = g * gd
        proj = np.einsum("...i,...i->...", gx, xhat)[..., None] / n
        dx = gx - gx.mean(axis=-1, keepdims=True)
        dx -= xhat * proj
        dx *= inv
        lead = tuple(range(g.ndim - 1))
        return dx, (g * xhat).sum(axis=lead), g.sum(axis=lead)

    return _record(out, (x, gain, bias), _back)


# --- spectral -------------------------------------------------------------

_DFT_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def dft_matrices(L: int) -> tuple[np.ndarray, np.ndarray]:
    """Real/imaginary forward-DFT matrices of shape (L/2+1, L)."""
    if L < 2 or L % 2:
        raise UnsupportedLengthError(f"rdft needs an even length >= 2, got {L}")
    mats = _DFT_CACHE.get(L)
    if mats is None:
        k = np.arange(L // 2 + 1)[:, None]
        n = np.arange(L)[None, :]
        # integer product mod L keeps the angles exact for large k*n
        ang = 2.0 * np.pi * ((k * n) % L) / L
        mats = (np.cos(ang), -np.sin(ang))
        for m in mats:
            m.setflags(write=False)
        _DFT_CACHE[L] = mats
    return mats


def rdft(x) -> tuple[Tensor, Tensor]:
    """Half-spectrum DFT along the time axis.

    A vector ``[L]`` gives ``([L/2+1], [L/2+1])``.  For ``[..., L, D]`` the
    transform runs down axis -2 independently for every column.
    """
    x = _wrap(x)
    L = x.shape[0] if x.ndim == 1 else x.shape[-2]
    cm, sm = dft_matrices(L)
    if x.ndim == 1:
        re = _record(cm @ x.data, (x,), lambda g: (cm.T @ g,))
        im = _record(sm @ x.data, (x,), lambda g: (sm.T @ g,))
        return re, im
    return matmul(Tensor(cm), x), matmul(Tensor(sm), x)


# --- gradient checking ----------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    n_checked: int

    # lets `if report:` read naturally
    def __bool__(self) -> bool:
        return self.passed


def gradient_check(
    f: Callable,
    x: Union[Tensor, Sequence[Tensor]],
    h: float = 1e-5,
    tol: float = 1e-4,
) -> GradCheckReport:
    """Compare reverse-mode gradients of scalar ``f`` with central differences.

    ``x`` may be one tensor or a sequence; ``f`` is called with the same
    structure.  Relative error per element is ``|a-b| / max(|a|, |b|, 1e-8)``.
    """
    if h <= 0:
        raise ValueError("finite-difference step must be positive")
    single = isinstance(x, Tensor)
    xs = [x] if single else list(x)
    call = (lambda: f(xs[0])) if single else (lambda: f(xs))

    for t in xs:
        t.requires_grad = True
        t.grad = None
    with Tape() as tape:
        out = call()
    if not np.all(np.isfinite(out.data)):
        raise EvaluationError("function value is not finite at the check point")
    backward(out, tape)
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in xs]

    def value() -> float:
        v = call().data
        if not np.all(np.isfinite(v)):
            raise EvaluationError("function value is not finite during differencing")
        return float(v.reshape(-1)[0])

    worst = 0.0
    count = 0
    for t, ga in zip(xs, analytic):
        flat = t.data.reshape(-1)
        gflat = ga.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = value()
            flat[i] = orig - h
            fm = value()
            flat[i] = orig
            num = (fp - fm) / (2.0 * h)
            a = gflat[i]
            err = abs(a - num) / max(abs(a), abs(num), 1e-8)
            worst = max(worst, err)
            count += 1
    passed = worst < tol if tol > 0 else worst == 0.0
    return GradCheckReport(max_rel_err=worst, passed=bool(passed), n_checked=count)
