"""Dense float tensors with a minimal reverse-mode gradient engine.

A :class:`Tensor` wraps a numpy array (row-major, float32 by default) and
records the op that produced it plus its parent tensors, so every result
is a node in an implicit acyclic computation graph.  Calling
:func:`backward` on a scalar loss walks that graph in reverse topological
order and accumulates gradients into the parameter leaves.

Every op validates shapes up front and checks its result for NaN/Inf;
non-finite values raise :class:`NonFiniteError` rather than propagating.
Reductions and the Fourier ops accumulate in float64 regardless of the
storage dtype.  There is no general broadcasting: the only broadcast-like
ops are the explicit bias adds and the channel-gate multiply.
"""

from __future__ import annotations

import contextlib
from typing import Iterable, Sequence

import numpy as np

from . import _accel

DEFAULT_DTYPE = np.float32

_GRAD_ENABLED = True


class ShapeError(ValueError):
    """Raised when operand shapes do not satisfy an op's contract."""


class NonFiniteError(ArithmeticError):
    """Raised when an op produces NaN or Inf values."""


def set_default_dtype(dtype) -> type:
    """Set the dtype new tensors are stored in; returns the previous one."""
    global DEFAULT_DTYPE
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be float32 or float64")
    old = DEFAULT_DTYPE
    DEFAULT_DTYPE = dtype
    return old


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (pure inference)."""
    global _GRAD_ENABLED
    old = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = old


def _ensure_finite(arr: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"op '{op}' produced non-finite values")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "op", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, *, _parents=(), _backward=None, op="leaf"):
        arr = np.asarray(data).astype(DEFAULT_DTYPE, copy=False)
        _ensure_finite(arr, op)
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self.op = op
        self._parents = _parents
        self._backward = _backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into .grad over the whole graph."""
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")
        order = _topo_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None:
                node._backward()

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        if isinstance(other, Tensor):
            return mul(self, other)
        return scale(self, float(other))

    def __rmul__(self, other):
        return scale(self, float(other))

    def __neg__(self):
        return scale(self, -1.0)

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.shape}, requires_grad={self.requires_grad})"


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False, op="const")


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True, op="param")


def _topo_order(root: Tensor) -> list[Tensor]:
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


def _accum(t: Tensor, g: np.ndarray) -> None:
    g = np.asarray(g).astype(t.data.dtype, copy=False)
    # updates always build a new array, so sharing g with another node is safe
    t.grad = g if t.grad is None else t.grad + g


def _make(data, parents, bwd, op) -> Tensor:
    req = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    return Tensor(
        data,
        requires_grad=req,
        _parents=tuple(parents) if req else (),
        _backward=bwd if req else None,
        op=op,
    )


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# arithmetic
# ---------------------------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")
    out = _make(a.data + b.data, (a, b), None, "add")

    def bwd():
        _accum(a, out.grad)
        _accum(b, out.grad)

    out._backward = bwd if out.requires_grad else None
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")
    out = _make(a.data - b.data, (a, b), None, "sub")

    def bwd():
        _accum(a, out.grad)
        _accum(b, -out.grad)

    out._backward = bwd if out.requires_grad else None
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")
    out = _make(a.data * b.data, (a, b), None, "mul")

    def bwd():
        _accum(a, out.grad * b.data)
        _accum(b, out.grad * a.data)

    out._backward = bwd if out.requires_grad else None
    return out


def scale(a: Tensor, s: float) -> Tensor:
    out = _make(a.data * a.data.dtype.type(s), (a,), None, "scale")

    def bwd():
        _accum(a, out.grad * a.data.dtype.type(s))

    out._backward = bwd if out.requires_grad else None
    return out


def square(a: Tensor) -> Tensor:
    out = _make(a.data * a.data, (a,), None, "square")

    def bwd():
        _accum(a, 2.0 * out.grad * a.data)

    out._backward = bwd if out.requires_grad else None
    return out


def absolute(a: Tensor) -> Tensor:
    out = _make(np.abs(a.data), (a,), None, "abs")

    def bwd():
        _accum(a, out.grad * np.sign(a.data))

    out._backward = bwd if out.requires_grad else None
    return out


def bias_add(x: Tensor, b: Tensor, axis: int = -1) -> Tensor:
    """Add a 1-D bias along one axis; the single sanctioned broadcast add."""
    ax = axis % x.data.ndim
    if b.data.ndim != 1 or b.data.shape[0] != x.data.shape[ax]:
        raise ShapeError(f"bias_add: bias {b.shape} does not match axis {axis} of {x.shape}")
    view = [1] * x.data.ndim
    view[ax] = b.data.shape[0]
    out = _make(x.data + b.data.reshape(view), (x, b), None, "bias_add")

    def bwd():
        _accum(x, out.grad)
        other = tuple(i for i in range(x.data.ndim) if i != ax)
        _accum(b, out.grad.sum(axis=other, dtype=np.float64))

    out._backward = bwd if out.requires_grad else None
    return out


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    out = _make(x.data.reshape(shape), (x,), None, "reshape")

    def bwd():
        _accum(x, out.grad.reshape(x.data.shape))

    out._backward = bwd if out.requires_grad else None
    return out


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    out = _make(np.ascontiguousarray(x.data.transpose(axes)), (x,), None, "transpose")
    inv = tuple(int(i) for i in np.argsort(axes))

    def bwd():
        _accum(x, out.grad.transpose(inv))

    out._backward = bwd if out.requires_grad else None
    return out


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    if not parts:
        raise ShapeError("concat: need at least one tensor")
    out = _make(np.concatenate([p.data for p in parts], axis=axis), tuple(parts), None, "concat")
    sizes = [p.data.shape[axis] for p in parts]

    def bwd():
        offs = np.cumsum([0] + sizes)
        for p, lo, hi in zip(parts, offs[:-1], offs[1:]):
            idx = [slice(None)] * out.grad.ndim
            idx[axis] = slice(lo, hi)
            _accum(p, out.grad[tuple(idx)])

    out._backward = bwd if out.requires_grad else None
    return out


# ---------------------------------------------------------------------------
# reductions and nonlinearities
# ---------------------------------------------------------------------------

def mean_all(x: Tensor) -> Tensor:
    val = np.mean(x.data, dtype=np.float64)
    out = _make(np.asarray(val, dtype=x.data.dtype), (x,), None, "mean")

    def bwd():
        g = out.grad / x.data.dtype.type(x.data.size)
        _accum(x, np.full_like(x.data, g))

    out._backward = bwd if out.requires_grad else None
    return out


def sum_all(x: Tensor) -> Tensor:
    val = np.sum(x.data, dtype=np.float64)
    out = _make(np.asarray(val, dtype=x.data.dtype), (x,), None, "sum")

    def bwd():
        _accum(x, np.full_like(x.data, out.grad))

    out._backward = bwd if out.requires_grad else None
    return out


SIGMOID_CLAMP = 30.0


def sigmoid(x: Tensor) -> Tensor:
    """Elementwise logistic function.

    The input is clamped to [-30, 30] before exponentiation and the output
    is nudged into the open interval (0, 1) by one ULP so saturated values
    never round to exactly 0 or 1.
    """
    z = np.clip(x.data, -SIGMOID_CLAMP, SIGMOID_CLAMP)
    y = 1.0 / (1.0 + np.exp(-z, dtype=np.float64))
    dt = x.data.dtype
    lo = np.nextafter(dt.type(0), dt.type(1))
    hi = np.nextafter(dt.type(1), dt.type(0))
    y = np.clip(y.astype(dt), lo, hi)
    out = _make(y, (x,), None, "sigmoid")

    def bwd():
        _accum(x, out.grad * y * (1.0 - y))

    out._backward = bwd if out.requires_grad else None
    return out


def relu(x: Tensor) -> Tensor:
    out = _make(np.maximum(x.data, 0), (x,), None, "relu")

    def bwd():
        _accum(x, out.grad * (x.data > 0))

    out._backward = bwd if out.requires_grad else None
    return out


def softmax_lastdim(x: Tensor) -> Tensor:
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z.astype(np.float64))
    y = (e / e.sum(axis=-1, keepdims=True)).astype(x.data.dtype)
    out = _make(y, (x,), None, "softmax")

    def bwd():
        gy = out.grad
        dot = np.sum(gy * y, axis=-1, keepdims=True, dtype=np.float64).astype(x.data.dtype)
        _accum(x, y * (gy - dot))

    out._backward = bwd if out.requires_grad else None
    return out


# ---------------------------------------------------------------------------
# linear maps
# ---------------------------------------------------------------------------

def linear(x: Tensor, w: Tensor) -> Tensor:
    """Contract the last axis of x with a 2-D weight: (..., k) @ (k, m)."""
    if w.data.ndim != 2 or x.data.shape[-1] != w.data.shape[0]:
        raise ShapeError(f"linear: {x.shape} @ {w.shape}")
    out = _make(x.data @ w.data, (x, w), None, "linear")

    def bwd():
        _accum(x, out.grad @ w.data.T)
        lead = tuple(range(x.data.ndim - 1))
        _accum(w, np.tensordot(x.data, out.grad, axes=(lead, lead)))

    out._backward = bwd if out.requires_grad else None
    return out


def bmm(a: Tensor, b: Tensor) -> Tensor:
    """Batched matmul: (..., n, k) @ (..., k, m) with identical leading dims."""
    if a.data.shape[:-2] != b.data.shape[:-2] or a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(f"bmm: {a.shape} @ {b.shape}")
    out = _make(a.data @ b.data, (a, b), None, "bmm")

    def bwd():
        _accum(a, out.grad @ b.data.swapaxes(-1, -2))
        _accum(b, a.data.swapaxes(-1, -2) @ out.grad)

    out._backward = bwd if out.requires_grad else None
    return out


# ---------------------------------------------------------------------------
# image ops
# ---------------------------------------------------------------------------

def conv2d_3x3(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """Same-size zero-padded 3x3 convolution over (..., C, H, W)."""
    if kernel.data.ndim != 4 or kernel.data.shape[2:] != (3, 3):
        raise ShapeError(f"conv2d_3x3: kernel must be (Cout, Cin, 3, 3), got {kernel.shape}")
    if x.data.ndim < 3:
        raise ShapeError(f"conv2d_3x3: input must be (..., C, H, W), got {x.shape}")
    cout, cin = kernel.data.shape[:2]
    if x.data.shape[-3] != cin:
        raise ShapeError(
            f"conv2d_3x3: input has {x.data.shape[-3]} channels, kernel expects {cin}"
        )
    if bias.data.shape != (cout,):
        raise ShapeError(f"conv2d_3x3: bias must be ({cout},), got {bias.shape}")
    lead = x.data.shape[:-3]
    c, h, w = x.data.shape[-3:]
    xb = np.ascontiguousarray(x.data.reshape((-1, c, h, w)))
    y = _accel.conv3x3_forward(xb, kernel.data, bias.data)
    out = _make(y.reshape(lead + (cout, h, w)), (x, kernel, bias), None, "conv2d_3x3")

    def bwd():
        gy = np.ascontiguousarray(out.grad.reshape((-1, cout, h, w)))
        gx, gw, gb = _accel.conv3x3_backward(xb, kernel.data, gy)
        _accum(x, gx.reshape(x.data.shape))
        _accum(kernel, gw)
        _accum(bias, gb)

    out._backward = bwd if out.requires_grad else None
    return out


def channel_pool(x: Tensor, kind: str) -> Tensor:
    """Pool (..., C, H, W) over the channel axis to (..., 1, H, W)."""
    if x.data.ndim < 3:
        raise ShapeError(f"channel_pool: input must be (..., C, H, W), got {x.shape}")
    if x.data.shape[-3] < 1:
        raise ShapeError("channel_pool: empty channel dimension")
    if kind == "average":
        y = np.mean(x.data, axis=-3, keepdims=True, dtype=np.float64).astype(x.data.dtype)
        out = _make(y, (x,), None, "channel_pool_avg")

        def bwd():
            c = x.data.shape[-3]
            _accum(x, np.repeat(out.grad / c, c, axis=-3))

    elif kind == "max":
        y = np.max(x.data, axis=-3, keepdims=True)
        out = _make(y, (x,), None, "channel_pool_max")
        idx = np.argmax(x.data, axis=-3)

        def bwd():
            gx = np.zeros_like(x.data)
            np.put_along_axis(gx, np.expand_dims(idx, -3), out.grad, axis=-3)
            _accum(x, gx)

    else:
        raise ValueError(f"channel_pool: unknown kind {kind!r}")
    out._backward = bwd if out.requires_grad else None
    return out


def channel_gate(x: Tensor, gate: Tensor) -> Tensor:
    """Multiply (..., C, H, W) features by a (..., 1, H, W) gate map."""
    if gate.data.shape != x.data.shape[:-3] + (1,) + x.data.shape[-2:]:
        raise ShapeError(f"channel_gate: gate {gate.shape} does not match {x.shape}")
    out = _make(x.data * gate.data, (x, gate), None, "channel_gate")

    def bwd():
        _accum(x, out.grad * gate.data)
        _accum(gate, np.sum(out.grad * x.data, axis=-3, keepdims=True, dtype=np.float64))

    out._backward = bwd if out.requires_grad else None
    return out


# ---------------------------------------------------------------------------
# Fourier op
# ---------------------------------------------------------------------------

def dft2_reim(x: Tensor) -> Tensor:
    """Unnormalized 2-D DFT over the trailing axes of (..., H, W).

    Returns a tensor of shape (2, ..., H, W): index 0 is the real part,
    index 1 the imaginary part.  Computed in float64, stored in x's dtype.
    """
    if x.data.ndim < 2:
        raise ShapeError(f"dft2_reim: input must be (..., H, W), got {x.shape}")
    h, w = x.data.shape[-2:]
    spec = np.fft.fft2(x.data.astype(np.float64), axes=(-2, -1))
    y = np.stack([spec.real, spec.imag]).astype(x.data.dtype)
    out = _make(y, (x,), None, "dft2_reim")

    def bwd():
        gc = out.grad[0].astype(np.float64) + 1j * out.grad[1].astype(np.float64)
        gx = np.fft.ifft2(gc, axes=(-2, -1)).real * (h * w)
        _accum(x, gx)

    out._backward = bwd if out.requires_grad else None
    return out


# ---------------------------------------------------------------------------
# parameter plumbing
# ---------------------------------------------------------------------------

def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.grad = None


def backward(loss: Tensor, params: Sequence[Tensor]) -> np.ndarray:
    """Run reverse-mode on a scalar loss; return the flat parameter gradient.

    Parameters the loss does not depend on get zero entries.  Existing
    .grad values on the parameters are cleared first.
    """
    zero_grads(params)
    loss.backward()
    chunks = []
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        chunks.append(np.asarray(g, dtype=np.float64).ravel())
    return np.concatenate(chunks) if chunks else np.zeros(0)


def init_conv_kernel(rng: np.random.Generator, cout: int, cin: int) -> np.ndarray:
    """Fan-in-scaled uniform init for a 3x3 conv kernel."""
    bound = 1.0 / np.sqrt(cin * 9)
    return rng.uniform(-bound, bound, size=(cout, cin, 3, 3)).astype(DEFAULT_DTYPE)


def init_linear_weight(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    """Fan-in-scaled uniform init for a dense weight matrix."""
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(DEFAULT_DTYPE)
