"""Reverse-mode differentiation over dense float64 arrays.

Define-by-run: ops execute eagerly on numpy values and, when a Tape is
active, append themselves to it. Creation order is already a topological
order, so the backward pass simply walks the records in exact reverse.
Without an active tape the same ops run as plain numpy (inference mode).

The fused ops (convolution, pooling, recurrent scans, the loss) delegate
their inner loops to the selected kernel backend; everything else is plain
numpy arithmetic.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import SeqBindError, ShapeMismatch

_active_tape = None

CLIP_EPS = 1e-12  # probability clamp used by the cross-entropy loss


class Tape:
    """Ordered record of operations for one forward pass."""

    def __init__(self):
        self.nodes = []

    def __enter__(self):
        global _active_tape
        if _active_tape is not None:
            raise SeqBindError("a tape is already active; tapes do not nest")
        _active_tape = self
        return self

    def __exit__(self, *exc):
        global _active_tape
        _active_tape = None
        return False

    def backward(self, loss):
        """Propagate d(loss)/d(node) to every recorded node and parameter."""
        if loss.value.shape != ():
            raise SeqBindError(f"backward needs a scalar loss, got shape {loss.value.shape}")
        loss.grad = np.ones(())
        for node in reversed(self.nodes):
            if node.grad is not None and node._backward is not None:
                node._backward(node.grad)


class Tensor:
    """A value in the graph. Gradients accumulate into .grad lazily."""

    __slots__ = ("value", "grad", "needs_grad", "_backward")

    def __init__(self, value, needs_grad=False):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self.needs_grad = needs_grad
        self._backward = None

    @property
    def shape(self):
        return self.value.shape


class Parameter(Tensor):
    """Named trainable leaf with a persistent gradient buffer."""

    __slots__ = ("name",)

    def __init__(self, name, value):
        super().__init__(value, needs_grad=True)
        self.name = name
        self.grad = np.zeros_like(self.value)

    def zero_grad(self):
        self.grad[...] = 0.0


def _accumulate(t, g):
    # closures hand over freshly allocated arrays, so adoption is safe
    if not t.needs_grad:
        return
    if t.grad is None:
        t.grad = g
    else:
        t.grad += g


def _make(value, backward, *parents):
    out = Tensor(value)
    out.needs_grad = any(p.needs_grad for p in parents)
    if _active_tape is not None and out.needs_grad:
        out._backward = backward
        _active_tape.nodes.append(out)
    return out


def constant(value):
    return Tensor(value)


# ---------------------------------------------------------------------------
# Elementwise and structural primitives
# ---------------------------------------------------------------------------

def add(a, b):
    if a.value.shape != b.value.shape:
        raise ShapeMismatch("add", a.value.shape, b.value.shape)

    def backward(g):
        _accumulate(a, g.copy())
        _accumulate(b, g.copy())

    return _make(a.value + b.value, backward, a, b)


def bias_add(x, b):
    """Add a per-channel bias; channels live on axis 1 of a 2-D or 3-D input."""
    if x.value.ndim not in (2, 3) or b.value.ndim != 1 or x.value.shape[1] != b.value.shape[0]:
        raise ShapeMismatch("bias_add", x.value.shape, b.value.shape)
    if x.value.ndim == 2:
        value = x.value + b.value[None, :]
        axes = (0,)
    else:
        value = x.value + b.value[None, :, None]
        axes = (0, 2)

    def backward(g):
        _accumulate(x, g.copy())
        _accumulate(b, g.sum(axis=axes))

    return _make(value, backward, x, b)


def mul(a, b):
    if a.value.shape != b.value.shape:
        raise ShapeMismatch("mul", a.value.shape, b.value.shape)

    def backward(g):
        _accumulate(a, g * b.value)
        _accumulate(b, g * a.value)

    return _make(a.value * b.value, backward, a, b)


def scale(x, k):
    """Multiply by a python float constant."""
    def backward(g):
        _accumulate(x, g * k)

    return _make(x.value * k, backward, x)


def matmul(a, b):
    if a.value.ndim != 2 or b.value.ndim != 2 or a.value.shape[1] != b.value.shape[0]:
        raise ShapeMismatch("matmul", a.value.shape, b.value.shape)

    def backward(g):
        _accumulate(a, g @ b.value.T)
        _accumulate(b, a.value.T @ g)

    return _make(a.value @ b.value, backward, a, b)


def transpose(x):
    if x.value.ndim != 2:
        raise ShapeMismatch("transpose", x.value.shape)

    def backward(g):
        _accumulate(x, np.ascontiguousarray(g.T))

    return _make(np.ascontiguousarray(x.value.T), backward, x)


def reshape(x, shape):
    old = x.value.shape

    def backward(g):
        _accumulate(x, g.reshape(old))

    return _make(np.ascontiguousarray(x.value).reshape(shape), backward, x)


def moveaxis(x, src, dst):
    def backward(g):
        _accumulate(x, np.ascontiguousarray(np.moveaxis(g, dst, src)))

    return _make(np.ascontiguousarray(np.moveaxis(x.value, src, dst)), backward, x)


def reverse_time(x):
    """Flip axis 0 (the step axis of a time-major sequence)."""
    def backward(g):
        _accumulate(x, np.ascontiguousarray(g[::-1]))

    return _make(np.ascontiguousarray(x.value[::-1]), backward, x)


def concat(parts, axis):
    sizes = [p.value.shape[axis] for p in parts]
    bounds = np.cumsum([0] + sizes)

    def backward(g):
        for p, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(lo, hi)
            _accumulate(p, np.ascontiguousarray(g[tuple(idx)]))

    return _make(np.concatenate([p.value for p in parts], axis=axis), backward, *parts)


def slice_axis(x, axis, start, stop):
    idx = [slice(None)] * x.value.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)

    def backward(g):
        full = np.zeros_like(x.value)
        full[idx] = g
        _accumulate(x, full)

    return _make(np.ascontiguousarray(x.value[idx]), backward, x)


def gather_rows(table, indices):
    """table (V,d) indexed by an integer array -> (*indices.shape, d)."""
    indices = np.asarray(indices)

    def backward(g):
        dt = np.zeros_like(table.value)
        np.add.at(dt, indices.ravel(), g.reshape(-1, table.value.shape[1]))
        _accumulate(table, dt)

    return _make(table.value[indices], backward, table)


def relu(x):
    mask = x.value > 0

    def backward(g):
        _accumulate(x, g * mask)

    return _make(np.where(mask, x.value, 0.0), backward, x)


def sigmoid(x):
    value = np.empty_like(x.value)
    pos = x.value >= 0
    value[pos] = 1.0 / (1.0 + np.exp(-x.value[pos]))
    ex = np.exp(x.value[~pos])
    value[~pos] = ex / (1.0 + ex)

    def backward(g):
        _accumulate(x, g * value * (1.0 - value))

    return _make(value, backward, x)


def tanh(x):
    value = np.tanh(x.value)

    def backward(g):
        _accumulate(x, g * (1.0 - value * value))

    return _make(value, backward, x)


def sum_all(x):
    def backward(g):
        _accumulate(x, np.full_like(x.value, float(g)))

    return _make(x.value.sum(), backward, x)


def apply_mask(x, mask):
    """Multiply by a fixed array (dropout mask); the mask is not a graph node."""
    mask = np.asarray(mask, dtype=np.float64)
    if mask.shape != x.value.shape:
        raise ShapeMismatch("apply_mask", x.value.shape, mask.shape)

    def backward(g):
        _accumulate(x, g * mask)

    return _make(x.value * mask, backward, x)


# ---------------------------------------------------------------------------
# Fused ops backed by the kernel modules
# ---------------------------------------------------------------------------

def conv1d(x, w, dilation=1, pad=0):
    """Correlate x (B,N,L) with filters w (K,M,N) after zero-padding both ends.

    Output length is L + 2*pad - (M-1)*dilation.
    """
    if x.value.ndim != 3 or w.value.ndim != 3 or x.value.shape[1] != w.value.shape[2]:
        raise ShapeMismatch("conv1d", x.value.shape, w.value.shape)
    window = w.value.shape[1]
    n_in = w.value.shape[2]
    span = (window - 1) * dilation + 1
    xp = np.pad(x.value, ((0, 0), (0, 0), (pad, pad))) if pad else np.ascontiguousarray(x.value)
    if xp.shape[2] < span:
        raise ShapeMismatch("conv1d", xp.shape, w.value.shape)
    kern = kernels.get()
    value, patches = kern.conv1d_forward(xp, w.value, dilation)
    padded_len = xp.shape[2]

    def backward(g):
        g = np.ascontiguousarray(g)
        if x.needs_grad:
            dxp = kern.conv1d_backward_input(g, w.value, dilation, padded_len)
            _accumulate(x, np.ascontiguousarray(dxp[:, :, pad:padded_len - pad]) if pad else dxp)
        if w.needs_grad:
            _accumulate(w, kern.conv1d_backward_weights(g, patches, n_in, window))

    return _make(value, backward, x, w)


def maxpool1d(x, window, stride=1):
    """Max over sliding windows along the last axis of x (B,K,L)."""
    if x.value.ndim != 3:
        raise ShapeMismatch("maxpool1d", x.value.shape)
    length = x.value.shape[2]
    if length < window:
        raise ShapeMismatch("maxpool1d", x.value.shape, (window,))
    kern = kernels.get()
    value, arg = kern.maxpool_forward(np.ascontiguousarray(x.value), window, stride)

    def backward(g):
        _accumulate(x, kern.maxpool_backward(np.ascontiguousarray(g), arg, length))

    return _make(value, backward, x)


def lstm_scan(xproj, u):
    """Run an LSTM over xproj (T,B,4H); returns the final hidden state (B,H)."""
    kern = kernels.get()
    h, c, gates, tanh_c = kern.lstm_forward(np.ascontiguousarray(xproj.value),
                                            np.ascontiguousarray(u.value))
    steps, batch, h4 = xproj.value.shape
    hid = h4 // 4

    def backward(g):
        u_t = np.ascontiguousarray(u.value.T)
        dxproj = kern.lstm_backward(np.ascontiguousarray(g), h, c, gates, tanh_c, u_t)
        if u.needs_grad:
            h_flat = h[:steps].reshape(steps * batch, hid)
            _accumulate(u, h_flat.T @ dxproj.reshape(steps * batch, h4))
        _accumulate(xproj, dxproj)

    return _make(h[steps].copy(), backward, xproj, u)


def gru_scan(x_zr, x_cand, u_zr, u_cand):
    """Run a GRU over projected inputs; returns the final hidden state (B,H)."""
    kern = kernels.get()
    h, zr, cand, reset_h = kern.gru_forward(
        np.ascontiguousarray(x_zr.value), np.ascontiguousarray(x_cand.value),
        np.ascontiguousarray(u_zr.value), np.ascontiguousarray(u_cand.value))
    steps, batch, h2 = x_zr.value.shape
    hid = h2 // 2

    def backward(g):
        dx_zr, dx_cand = kern.gru_backward(
            np.ascontiguousarray(g), h, zr, cand, reset_h,
            np.ascontiguousarray(u_zr.value.T), np.ascontiguousarray(u_cand.value.T))
        if u_zr.needs_grad:
            h_flat = h[:steps].reshape(steps * batch, hid)
            _accumulate(u_zr, h_flat.T @ dx_zr.reshape(steps * batch, h2))
        if u_cand.needs_grad:
            rh_flat = reset_h.reshape(steps * batch, hid)
            _accumulate(u_cand, rh_flat.T @ dx_cand.reshape(steps * batch, hid))
        _accumulate(x_zr, dx_zr)
        _accumulate(x_cand, dx_cand)

    return _make(h[steps].copy(), backward, x_zr, x_cand, u_zr, u_cand)


def binary_cross_entropy(p, y):
    """Mean of -[y ln p + (1-y) ln(1-p)] with p clamped to [1e-12, 1-1e-12].

    y is a plain array of 0/1 labels, not a graph node.
    """
    y = np.asarray(y, dtype=np.float64)
    if p.value.shape != y.shape:
        raise ShapeMismatch("binary_cross_entropy", p.value.shape, y.shape)
    pc = np.clip(p.value, CLIP_EPS, 1.0 - CLIP_EPS)
    inside = (p.value > CLIP_EPS) & (p.value < 1.0 - CLIP_EPS)
    n = max(p.value.size, 1)
    value = -(y * np.log(pc) + (1.0 - y) * np.log1p(-pc)).sum() / n

    def backward(g):
        _accumulate(p, float(g) * inside * (pc - y) / (pc * (1.0 - pc) * n))

    return _make(value, backward, p)


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------

def zero_grads(tensors):
    for t in tensors:
        if isinstance(t, Parameter):
            t.zero_grad()
        else:
            t.grad = None


def grad_check(build_loss, tensors, eps=1e-5):
    """Max relative error between analytic and central-difference gradients.

    build_loss() must rebuild the same scalar-loss graph on every call (any
    randomness frozen); tensors lists the leaves to check. The relative
    error denominator is max(|analytic|, |numeric|, 1e-8) per element.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise SeqBindError(f"grad_check eps must lie in [1e-7, 1e-3], got {eps}")
    zero_grads(tensors)
    with Tape() as tape:
        loss = build_loss()
    tape.backward(loss)
    analytic = [np.zeros_like(t.value) if t.grad is None else np.array(t.grad) for t in tensors]

    worst = 0.0
    for t, ana in zip(tensors, analytic):
        flat = t.value.reshape(-1)
        for i in range(flat.size):
            keep = flat[i]
            flat[i] = keep + eps
            up = float(build_loss().value)
            flat[i] = keep - eps
            down = float(build_loss().value)
            flat[i] = keep
            numeric = (up - down) / (2.0 * eps)
            a = ana.reshape(-1)[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
