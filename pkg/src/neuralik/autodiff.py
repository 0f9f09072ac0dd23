"""Reverse-mode automatic differentiation on dense float64 arrays.

A Tensor wraps a numpy array. While a Tape is active, every primitive
records itself; Tape.backward replays the records in reverse creation
order (a valid reverse topological order, since an output can only be
created after its inputs) and accumulates gradients additively at
fan-out. With no active tape, the same functions are plain numpy
computations with no recording overhead.

One tape is single-threaded; independent tapes may run concurrently.
"""

from __future__ import annotations

import numpy as np

_TAPE = None  # the currently recording tape, if any


class Tensor:
    __slots__ = ("data", "grad")

    def __init__(self, data):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    # convenience arithmetic; the free functions do the real work
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)


class Tape:
    """Ordered record of primitive ops for one backward pass."""

    def __init__(self):
        self._records = []  # (out, inputs, backward_fn)

    def __enter__(self):
        global _TAPE
        if _TAPE is not None:
            raise RuntimeError("a tape is already recording")
        _TAPE = self
        return self

    def __exit__(self, *exc):
        global _TAPE
        _TAPE = None
        return False

    def backward(self, loss: Tensor):
        """Accumulate d(loss)/d(t) into t.grad for every recorded tensor."""
        if loss.data.size != 1:
            raise ValueError("backward expects a scalar loss")
        loss.grad = np.ones_like(loss.data)
        for out, inputs, bwd in reversed(self._records):
            if out.grad is None:
                continue
            if inputs is None:
                bwd(out.grad)  # op accumulates into its inputs itself
                continue
            for t, g in zip(inputs, bwd(out.grad)):
                if g is None or not isinstance(t, Tensor):
                    continue
                # never mutate g in place: it may alias another grad
                t.grad = g if t.grad is None else t.grad + g


def _record(out, inputs, bwd):
    if _TAPE is not None:
        _TAPE._records.append((out, inputs, bwd))


def _unbroadcast(g, shape):
    """Sum g down to `shape` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data + b.data)
    _record(out, (a, b), lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)))
    return out


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data - b.data)
    _record(out, (a, b), lambda g: (_unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)))
    return out


def neg(a):
    out = Tensor(-a.data)
    _record(out, (a,), lambda g: (-g,))
    return out


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data * b.data)
    _record(out, (a, b), lambda g: (_unbroadcast(g * b.data, a.data.shape),
                                    _unbroadcast(g * a.data, b.data.shape)))
    return out


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    out = Tensor(a.data / b.data)
    _record(out, (a, b), lambda g: (_unbroadcast(g / b.data, a.data.shape),
                                    _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)))
    return out


def matmul(a, b):
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ValueError(
            f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}"
        )
    out = Tensor(a.data @ b.data)
    _record(out, (a, b), lambda g: (g @ b.data.T, a.data.T @ g))
    return out


def batched_matvec(w, x):
    """Per-sample matrix-vector product: (B,r,c) x (B,c) -> (B,r)."""
    if w.data.ndim != 3 or x.data.ndim != 2 or w.data.shape[0] != x.data.shape[0] \
            or w.data.shape[2] != x.data.shape[1]:
        raise ValueError(
            f"batched_matvec shape mismatch: {w.data.shape} vs {x.data.shape}"
        )
    out = Tensor(np.einsum("brc,bc->br", w.data, x.data))
    _record(out, (w, x), lambda g: (np.einsum("br,bc->brc", g, x.data),
                                    np.einsum("br,brc->bc", g, w.data)))
    return out


def relu(a):
    mask = a.data > 0
    out = Tensor(np.where(mask, a.data, 0.0))
    _record(out, (a,), lambda g: (g * mask,))
    return out


def softplus(a):
    out = Tensor(np.logaddexp(0.0, a.data))
    with np.errstate(over="ignore"):
        sig = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-np.abs(a.data))),
                       1.0 - 1.0 / (1.0 + np.exp(-np.abs(a.data))))
    _record(out, (a,), lambda g: (g * sig,))
    return out


def exp(a):
    out = Tensor(np.exp(a.data))
    _record(out, (a,), lambda g: (g * out.data,))
    return out


def log(a):
    out = Tensor(np.log(a.data))
    _record(out, (a,), lambda g: (g / a.data,))
    return out


def tsum(a, axis=None, keepdims=False):
    out = Tensor(a.data.sum(axis=axis, keepdims=keepdims))

    def bwd(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    _record(out, (a,), bwd)
    return out


def mean(a, axis=None, keepdims=False):
    n = a.data.size if axis is None else a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def reshape(a, shape):
    out = Tensor(a.data.reshape(shape))
    _record(out, (a,), lambda g: (g.reshape(a.data.shape),))
    return out


def slice_cols(a, lo, hi):
    """Columns [lo, hi) of a 2-D tensor.

    Backward accumulates in place into a.grad (a zero buffer it owns),
    avoiding a full-width scratch array per slice. Safe because a's
    gradient can only arrive through its slices' accumulators before
    a's own producer runs.
    """
    out = Tensor(a.data[:, lo:hi])

    def accum(g):
        if a.grad is None:
            a.grad = np.zeros_like(a.data)
        a.grad[:, lo:hi] += g

    _record(out, None, accum)
    return out


def sparsemax(z):
    """Row-wise Euclidean projection onto the probability simplex.

    Sorted-threshold algorithm; outputs may contain exact zeros. The
    backward pass uses the projection Jacobian: on the support,
    g - mean(g over support); zero elsewhere.
    """
    arr = z.data if isinstance(z, Tensor) else np.asarray(z, dtype=np.float64)
    squeeze = arr.ndim == 1
    if squeeze:
        arr = arr[None, :]
    m = arr.shape[1]
    srt = np.sort(arr, axis=1)[:, ::-1]
    csum = np.cumsum(srt, axis=1) - 1.0
    ks = np.arange(1, m + 1)
    support = srt - csum / ks > 0
    k = support.sum(axis=1)
    tau = csum[np.arange(arr.shape[0]), k - 1] / k
    p = np.maximum(arr - tau[:, None], 0.0)
    if squeeze:
        p = p[0]
    if not isinstance(z, Tensor):
        return p
    out = Tensor(p)
    supp = out.data > 0

    def bwd(g):
        gg = g[None, :] if squeeze else g
        s = supp[None, :] if squeeze else supp
        cnt = s.sum(axis=1, keepdims=True)
        avg = (gg * s).sum(axis=1, keepdims=True) / cnt
        gz = np.where(s, gg - avg, 0.0)
        return (gz[0] if squeeze else gz,)

    _record(out, (z,), bwd)
    return out


class BatchNormState:
    """Running statistics and hyperparameters for one batch-norm layer."""

    def __init__(self, dim, momentum=0.1, eps=1e-5):
        self.running_mean = np.zeros(dim)
        self.running_var = np.ones(dim)
        self.momentum = momentum
        self.eps = eps


def batch_norm(x, gamma, beta, state: BatchNormState, training: bool):
    """Batch normalization over axis 0 of a (batch, d) tensor.

    Train mode normalizes by biased batch statistics and updates the
    running statistics in place; infer mode uses the frozen running
    statistics. Scale and shift apply in both modes.
    """
    if x.data.ndim != 2:
        raise ValueError(f"batch_norm expects (batch, d), got {x.data.shape}")
    if training:
        if x.data.shape[0] < 2:
            raise ValueError("batch_norm train mode needs batch >= 2 (variance undefined)")
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        state.running_mean = (1 - state.momentum) * state.running_mean + state.momentum * mu
        state.running_var = (1 - state.momentum) * state.running_var + state.momentum * var
    else:
        mu = state.running_mean
        var = state.running_var
    inv_std = 1.0 / np.sqrt(var + state.eps)
    x_hat = (x.data - mu) * inv_std
    out = Tensor(gamma.data * x_hat + beta.data)

    def bwd(g):
        g_gamma = (g * x_hat).sum(axis=0)
        g_beta = g.sum(axis=0)
        if training:
            gxh = g * gamma.data
            # biased-variance batch norm: the mean terms carry the 1/batch factors
            gx = inv_std * (gxh - gxh.mean(axis=0)
                            - x_hat * (gxh * x_hat).mean(axis=0))
        else:
            gx = g * gamma.data * inv_std
        return (gx, g_gamma, g_beta)

    _record(out, (x, gamma, beta), bwd)
    return out
