"""Dense float64 tensors with reverse-mode automatic differentiation.

Every value is a numpy float64 array wrapped in a :class:`Tensor`. Each
differentiable operation records a backward closure on its output, so calling
``backward()`` on a scalar loss fills ``grad`` on every reachable tensor that
requires one. Graphs are rebuilt on every forward pass and are confined to a
single thread; trained parameter tensors are safe to read concurrently.

Sequence operations follow a leading-batch convention: conv/pool inputs are
``[batch, time, features]`` and matmul operands are plain 2-D matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view


class ShapeError(ValueError):
    """Operand shapes cannot be combined."""


class GraphError(RuntimeError):
    """The autodiff graph was used outside its contract."""


class OracleError(RuntimeError):
    """The finite-difference oracle cannot trust its inputs."""


_grad_enabled = True


class no_grad:
    """Context manager that disables graph construction (inference mode)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


def _tracked(*tensors):
    """Inputs that participate in gradient flow, or () when autograd is off."""
    if not _grad_enabled:
        return ()
    return tuple(t for t in tensors if t.requires_grad)


def _accum(t, g):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


class Tensor:
    """A float64 array plus the bookkeeping for reverse-mode autodiff.

    ``requires_grad`` is set explicitly on leaf parameters and inferred for
    op outputs (true iff any tracked input requires grad). ``grad`` is filled
    by ``backward()`` and accumulates additively until reset to ``None``.
    """

    __slots__ = ("data", "requires_grad", "grad", "_prev", "_backward", "_op", "_backward_ran")

    def __init__(self, data, requires_grad=False, _prev=(), _op="leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad) or bool(_prev)
        self.grad = None
        self._prev = _prev
        self._backward = None
        self._op = _op
        self._backward_ran = False

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        """Run reverse-mode accumulation from this scalar node.

        Raises :class:`GraphError` if the node is not a scalar or if backward
        already ran on it; gradients do not silently re-accumulate.
        """
        if self.data.ndim != 0:
            raise GraphError(f"backward requires a scalar loss, got shape {self.shape}")
        if self._backward_ran:
            raise GraphError("backward was already called on this node; rebuild the graph")

        topo = []
        visited = set()
        stack = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if node in visited:
                continue
            visited.add(node)
            stack.append((node, True))
            for child in node._prev:
                if child not in visited:
                    stack.append((child, False))

        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()
        self._backward_ran = True

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, _as_tensor(-1.0))

    def __sub__(self, other):
        return add(self, -_as_tensor(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def sum(self):
        return sum_all(self)

    def relu(self):
        return relu(self)

    def sigmoid(self):
        return sigmoid(self)

    def tanh(self):
        return tanh(self)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 else shape[0])

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op!r}, requires_grad={self.requires_grad})"


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def add(a, b):
    """Elementwise sum with numpy broadcasting; gradients are unbroadcast."""
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError:
        raise ShapeError(f"add operands do not broadcast: {a.shape} vs {b.shape}") from None
    out = Tensor(data, _prev=_tracked(a, b), _op="add")
    if out._prev:
        def _backward():
            g = out.grad
            if a.requires_grad:
                _accum(a, _unbroadcast(g, a.shape))
            if b.requires_grad:
                _accum(b, _unbroadcast(g, b.shape))
        out._backward = _backward
    return out


def mul(a, b):
    """Elementwise product with numpy broadcasting."""
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError:
        raise ShapeError(f"mul operands do not broadcast: {a.shape} vs {b.shape}") from None
    out = Tensor(data, _prev=_tracked(a, b), _op="mul")
    if out._prev:
        def _backward():
            g = out.grad
            if a.requires_grad:
                _accum(a, _unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                _accum(b, _unbroadcast(g * a.data, b.shape))
        out._backward = _backward
    return out


def matmul(a, b):
    """2-D matrix product ``[m,k] @ [k,n] -> [m,n]``."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} x {b.shape}")
    out = Tensor(a.data @ b.data, _prev=_tracked(a, b), _op="matmul")
    if out._prev:
        def _backward():
            g = out.grad
            if a.requires_grad:
                _accum(a, g @ b.data.T)
            if b.requires_grad:
                _accum(b, a.data.T @ g)
        out._backward = _backward
    return out


def concat(tensors, axis):
    """Concatenate along ``axis``; backward slices the gradient back apart.

    A single-tensor concat returns that tensor unchanged.
    """
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of an empty list")
    if len(tensors) == 1:
        return tensors[0]
    ndim = tensors[0].ndim
    axis = axis % ndim if -ndim <= axis < ndim else axis
    base = list(tensors[0].shape)
    for t in tensors[1:]:
        if t.ndim != ndim:
            raise ShapeError(f"concat rank mismatch: {tensors[0].shape} vs {t.shape}")
        other = list(t.shape)
        if base[:axis] + base[axis + 1:] != other[:axis] + other[axis + 1:]:
            raise ShapeError(f"concat shapes differ off axis {axis}: {tensors[0].shape} vs {t.shape}")
    data = np.concatenate([t.data for t in tensors], axis=axis)
    out = Tensor(data, _prev=_tracked(*tensors), _op="concat")
    if out._prev:
        offsets = np.cumsum([0] + [t.shape[axis] for t in tensors])
        def _backward():
            g = out.grad
            index = [slice(None)] * ndim
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                if t.requires_grad:
                    index[axis] = slice(lo, hi)
                    _accum(t, g[tuple(index)])
        out._backward = _backward
    return out


def relu(x):
    """Elementwise max(0, x); subgradient at 0 is 0."""
    x = _as_tensor(x)
    out = Tensor(np.maximum(0.0, x.data), _prev=_tracked(x), _op="relu")
    if out._prev:
        mask = x.data > 0
        def _backward():
            _accum(x, out.grad * mask)
        out._backward = _backward
    return out


def sigmoid(x):
    x = _as_tensor(x)
    d = x.data
    s = np.empty_like(d)
    pos = d >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    s[~pos] = e / (1.0 + e)
    out = Tensor(s, _prev=_tracked(x), _op="sigmoid")
    if out._prev:
        def _backward():
            _accum(x, out.grad * s * (1.0 - s))
        out._backward = _backward
    return out


def tanh(x):
    x = _as_tensor(x)
    t = np.tanh(x.data)
    out = Tensor(t, _prev=_tracked(x), _op="tanh")
    if out._prev:
        def _backward():
            _accum(x, out.grad * (1.0 - t * t))
        out._backward = _backward
    return out


def softmax(x, axis=-1):
    """Numerically stable softmax along ``axis`` (max-subtracted)."""
    x = _as_tensor(x)
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Tensor(s, _prev=_tracked(x), _op="softmax")
    if out._prev:
        def _backward():
            g = out.grad
            dot = (g * s).sum(axis=axis, keepdims=True)
            _accum(x, s * (g - dot))
        out._backward = _backward
    return out


def sum_all(x):
    """Reduce to a 0-d scalar tensor."""
    x = _as_tensor(x)
    out = Tensor(np.asarray(x.data.sum()), _prev=_tracked(x), _op="sum")
    if out._prev:
        def _backward():
            _accum(x, np.broadcast_to(out.grad, x.shape))
        out._backward = _backward
    return out


def reshape(x, shape):
    x = _as_tensor(x)
    out = Tensor(x.data.reshape(shape), _prev=_tracked(x), _op="reshape")
    if out._prev:
        def _backward():
            _accum(x, out.grad.reshape(x.shape))
        out._backward = _backward
    return out


def select_timestep(x, t):
    """Pick time step ``t`` from a ``[batch, time, features]`` tensor."""
    x = _as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"select_timestep needs [batch, time, features], got {x.shape}")
    out = Tensor(x.data[:, t, :], _prev=_tracked(x), _op="select_timestep")
    if out._prev:
        def _backward():
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[:, t, :] += out.grad
        out._backward = _backward
    return out


def embedding_lookup(matrix, ids):
    """Gather rows of ``matrix`` ([vocab, dim]) by integer ids of any shape.

    Backward accumulates only into the looked-up rows; duplicate ids add.
    """
    matrix = _as_tensor(matrix)
    ids = np.asarray(ids, dtype=np.int64)
    if matrix.ndim != 2:
        raise ShapeError(f"embedding matrix must be 2-D, got {matrix.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= matrix.shape[0]):
        raise IndexError(
            f"token id out of range [0, {matrix.shape[0]}): min={ids.min()}, max={ids.max()}"
        )
    out = Tensor(matrix.data[ids], _prev=_tracked(matrix), _op="embedding_lookup")
    if out._prev:
        dim = matrix.shape[1]
        def _backward():
            if matrix.grad is None:
                matrix.grad = np.zeros_like(matrix.data)
            np.add.at(matrix.grad, ids.reshape(-1), out.grad.reshape(-1, dim))
        out._backward = _backward
    return out


def conv1d(x, kernels):
    """Valid 1-D convolution: ``[B, L, m]`` with kernels ``[F, n, m]`` -> ``[B, L-n+1, F]``.

    ``out[b, t, f] = sum_{i<n, j<m} kernels[f, i, j] * x[b, t+i, j]``. Bias
    and activation are the caller's business.
    """
    x, kernels = _as_tensor(x), _as_tensor(kernels)
    if x.ndim != 3 or kernels.ndim != 3:
        raise ShapeError(f"conv1d needs [B,L,m] input and [F,n,m] kernels, got {x.shape} and {kernels.shape}")
    _, length, width = x.shape
    filters, window, kwidth = kernels.shape
    if kwidth != width:
        raise ShapeError(f"conv1d feature widths disagree: input {width}, kernel {kwidth}")
    if length < window:
        raise ShapeError(f"sequence too short for convolution: length {length} < window {window}")
    # windows[b, t, j, i] = x[b, t+i, j]
    windows = sliding_window_view(x.data, window, axis=1)
    data = np.einsum("btji,fij->btf", windows, kernels.data, optimize=True)
    out = Tensor(data, _prev=_tracked(x, kernels), _op="conv1d")
    if out._prev:
        out_len = length - window + 1
        def _backward():
            g = out.grad
            if kernels.requires_grad:
                _accum(kernels, np.einsum("btf,btji->fij", g, windows, optimize=True))
            if x.requires_grad:
                gx = np.zeros_like(x.data)
                for i in range(window):
                    gx[:, i:i + out_len, :] += np.einsum("btf,fj->btj", g, kernels.data[:, i, :])
                _accum(x, gx)
        out._backward = _backward
    return out


def maxpool1d_global(x):
    """Per-feature max over time: ``[B, T, F] -> [B, F]``.

    Backward routes the gradient to the first occurrence of each maximum.
    """
    x = _as_tensor(x)
    if x.ndim != 3:
        raise ShapeError(f"maxpool1d_global needs [B,T,F], got {x.shape}")
    if x.shape[1] < 1:
        raise ShapeError("maxpool1d_global over an empty time axis")
    idx = np.argmax(x.data, axis=1)  # first max per (batch, feature)
    out = Tensor(np.take_along_axis(x.data, idx[:, None, :], axis=1)[:, 0, :],
                 _prev=_tracked(x), _op="maxpool1d_global")
    if out._prev:
        def _backward():
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            scattered = np.zeros_like(x.data)
            np.put_along_axis(scattered, idx[:, None, :], out.grad[:, None, :], axis=1)
            x.grad += scattered
        out._backward = _backward
    return out


def dropout(x, rate, rng):
    """Inverted dropout with keep-scaling; deterministic given ``rng``."""
    if rate <= 0.0:
        return x
    if not 0.0 < rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep) / keep
    return mul(x, Tensor(mask))


def zero_grads(params):
    """Reset gradients on an iterable or mapping of tensors."""
    values = params.values() if hasattr(params, "values") else params
    for p in values:
        p.grad = None


@dataclass
class GradCheckReport:
    """Outcome of a finite-difference gradient check."""

    passed: bool
    max_rel_error: float
    step: float
    tol: float
    checked: int
    worst_param: str | None = None
    worst_index: int | None = None
    worst_analytic: float | None = None
    worst_numeric: float | None = None
    param_errors: dict | None = None

    def __str__(self):
        status = "ok" if self.passed else "FAIL"
        where = ""
        if self.worst_param is not None:
            where = (f" (worst: {self.worst_param}[{self.worst_index}]"
                     f" analytic={self.worst_analytic:.6g} numeric={self.worst_numeric:.6g})")
        return (f"gradient check {status}: max rel error {self.max_rel_error:.3g} "
                f"over {self.checked} elements, tol {self.tol:g}, step {self.step:g}{where}")


def finite_diff_check(f, params, step=1e-3, tol=1e-4):
    """Compare analytic gradients of ``f`` against central finite differences.

    ``f`` builds and evaluates a scalar-valued graph from the current data of
    ``params`` (a mapping name -> Tensor, or a list of Tensors). Every
    parameter element is perturbed by ``+-step``; the relative error is
    ``|a - n| / max(1, |a|, |n|)``. ``f`` must be deterministic: two baseline
    evaluations that differ raise :class:`OracleError`.
    """
    if hasattr(params, "items"):
        named = list(params.items())
    else:
        named = [(f"param{i}", p) for i, p in enumerate(params)]
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")

    with no_grad():
        base1 = float(f().data)
        base2 = float(f().data)
    if base1 != base2:
        raise OracleError(
            f"forward passes differ ({base1!r} vs {base2!r}); finite differences are invalid"
        )

    zero_grads(p for _, p in named)
    loss = f()
    if loss.data.ndim != 0:
        raise GraphError(f"finite_diff_check needs a scalar objective, got shape {loss.shape}")
    loss.backward()
    analytic = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in named
    }

    report = GradCheckReport(passed=True, max_rel_error=0.0, step=step, tol=tol,
                             checked=0, param_errors={})
    with no_grad():
        for name, p in named:
            flat = p.data.flat  # flatiter assigns through any memory layout
            worst = 0.0
            for k in range(p.data.size):
                orig = flat[k]
                flat[k] = orig + step
                f_plus = float(f().data)
                flat[k] = orig - step
                f_minus = float(f().data)
                flat[k] = orig
                numeric = (f_plus - f_minus) / (2.0 * step)
                a = float(analytic[name].reshape(-1)[k])
                rel = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
                report.checked += 1
                if rel > worst:
                    worst = rel
                if rel > report.max_rel_error:
                    report.max_rel_error = rel
                    report.worst_param = name
                    report.worst_index = k
                    report.worst_analytic = a
                    report.worst_numeric = numeric
            report.param_errors[name] = worst
    report.passed = report.max_rel_error <= tol
    return report
