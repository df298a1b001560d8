"""Neural layer vocabulary: embedding lookup, dense, 1-D convolution, global
max pooling, bidirectional LSTM, and the reshape helpers that connect them.

Layers own their parameter tensors and expose ``params()`` as ordered
``(name, Tensor)`` pairs so models can build a flat registry. All forward
methods take batched inputs (leading batch axis).
"""

from __future__ import annotations

import numpy as np

from . import tensor as T
from .tensor import Tensor

ACTIVATIONS = ("relu", "softmax", "identity")


def glorot_uniform(rng, fan_in, fan_out, shape):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def _apply_activation(x, activation):
    if activation == "relu":
        return T.relu(x)
    if activation == "softmax":
        return T.softmax(x, axis=-1)
    if activation == "identity":
        return x
    raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")


class DenseLayer:
    """Affine map plus activation: ``[B, in] -> [B, out]``."""

    def __init__(self, rng, in_dim, out_dim, activation="identity"):
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.activation = activation
        self.weight = Tensor(glorot_uniform(rng, in_dim, out_dim, (in_dim, out_dim)),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(out_dim), requires_grad=True)

    def __call__(self, x):
        return dense(x, self)

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]


class Conv1DLayer:
    """Valid (unpadded) 1-D convolution over ``[B, L, m]`` sequences.

    ``kernels`` is ``[filters, window, m]``; output length is ``L - window + 1``.
    """

    def __init__(self, rng, window, in_width, filters, activation="relu"):
        if window < 1:
            raise ValueError(f"kernel window must be >= 1, got {window}")
        self.window = window
        self.in_width = in_width
        self.filters = filters
        self.activation = activation
        fan_in = window * in_width
        fan_out = window * filters
        self.kernels = Tensor(glorot_uniform(rng, fan_in, fan_out, (filters, window, in_width)),
                              requires_grad=True)
        self.bias = Tensor(np.zeros(filters), requires_grad=True)

    def __call__(self, x):
        return conv1d(x, self)

    def params(self):
        return [("kernels", self.kernels), ("bias", self.bias)]


_GATES = ("input", "forget", "output", "cell")


class _LstmDirection:
    """One direction's gate parameters: W (input), U (recurrent), b per gate."""

    def __init__(self, rng, in_dim, hidden):
        self.in_dim = in_dim
        self.hidden = hidden
        self.w = {}
        self.u = {}
        self.b = {}
        for gate in _GATES:
            self.w[gate] = Tensor(glorot_uniform(rng, in_dim, hidden, (in_dim, hidden)),
                                  requires_grad=True)
            self.u[gate] = Tensor(rng.uniform(-0.05, 0.05, size=(hidden, hidden)),
                                  requires_grad=True)
            bias = np.full(hidden, 1.0) if gate == "forget" else np.zeros(hidden)
            self.b[gate] = Tensor(bias, requires_grad=True)

    def params(self):
        out = []
        for gate in _GATES:
            out.append((f"{gate}.w", self.w[gate]))
            out.append((f"{gate}.u", self.u[gate]))
            out.append((f"{gate}.b", self.b[gate]))
        return out


class BiLstmLayer:
    """Bidirectional LSTM returning the two final hidden states, concatenated.

    Forward and backward directions have independent parameters; the output
    width is ``2 * hidden``.
    """

    def __init__(self, rng, in_dim, hidden):
        self.in_dim = in_dim
        self.hidden = hidden
        self.forward = _LstmDirection(rng, in_dim, hidden)
        self.backward = _LstmDirection(rng, in_dim, hidden)

    def __call__(self, x):
        return bilstm(x, self)

    def params(self):
        out = [(f"fwd.{n}", t) for n, t in self.forward.params()]
        out += [(f"bwd.{n}", t) for n, t in self.backward.params()]
        return out


class EmbeddingLayer:
    """Token-id lookup into a ``[vocab, dim]`` matrix.

    Row 0 is the padding vector: it starts at zero and, when the layer is
    trainable, must be re-zeroed after every optimizer step (models do this
    through their constraint hook).
    """

    def __init__(self, matrix, trainable=False):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2:
            raise T.ShapeError(f"embedding matrix must be 2-D, got {matrix.shape}")
        matrix = matrix.copy()
        matrix[0, :] = 0.0
        self.trainable = bool(trainable)
        self.matrix = Tensor(matrix, requires_grad=self.trainable)

    @property
    def vocab_size(self):
        return self.matrix.shape[0]

    @property
    def dim(self):
        return self.matrix.shape[1]

    def __call__(self, token_ids):
        return embed(token_ids, self)

    def params(self):
        return [("matrix", self.matrix)]


def embed(token_ids, layer):
    """Look up rows for ``token_ids`` (any integer shape); padding id 0 yields
    zero rows."""
    return T.embedding_lookup(layer.matrix, token_ids)


def conv1d(x, layer):
    """Convolve, add bias, apply the layer activation."""
    out = T.conv1d(x, layer.kernels)
    out = T.add(out, layer.bias)
    return _apply_activation(out, layer.activation)


def maxpool1d_global(x):
    """Per-feature maximum over the time axis: ``[B, T, F] -> [B, F]``."""
    return T.maxpool1d_global(x)


def dense(x, layer):
    out = T.add(T.matmul(x, layer.weight), layer.bias)
    return _apply_activation(out, layer.activation)


def _run_direction(steps, direction, batch):
    h = Tensor(np.zeros((batch, direction.hidden)))
    c = Tensor(np.zeros((batch, direction.hidden)))
    w, u, b = direction.w, direction.u, direction.b
    for x_t in steps:
        i = T.sigmoid(T.add(T.add(T.matmul(x_t, w["input"]), T.matmul(h, u["input"])), b["input"]))
        f = T.sigmoid(T.add(T.add(T.matmul(x_t, w["forget"]), T.matmul(h, u["forget"])), b["forget"]))
        o = T.sigmoid(T.add(T.add(T.matmul(x_t, w["output"]), T.matmul(h, u["output"])), b["output"]))
        g = T.tanh(T.add(T.add(T.matmul(x_t, w["cell"]), T.matmul(h, u["cell"])), b["cell"]))
        c = T.add(T.mul(f, c), T.mul(i, g))
        h = T.mul(o, T.tanh(c))
    return h


def bilstm(x, layer):
    """Run both directions over ``[B, L, d]`` and concatenate the final hidden
    states into ``[B, 2h]``."""
    if x.ndim != 3:
        raise T.ShapeError(f"bilstm needs [B, L, d] input, got {x.shape}")
    batch, length, in_dim = x.shape
    if length < 1:
        raise T.ShapeError("bilstm over an empty sequence")
    if in_dim != layer.in_dim:
        raise T.ShapeError(f"bilstm input width {in_dim} != layer width {layer.in_dim}")
    steps = [T.select_timestep(x, t) for t in range(length)]
    h_fwd = _run_direction(steps, layer.forward, batch)
    h_bwd = _run_direction(reversed(steps), layer.backward, batch)
    return T.concat([h_fwd, h_bwd], axis=1)


def reshape_to_map(vector):
    """View a ``[B, k]`` vector as a ``[B, k, 1]`` sequence of width-1 features."""
    if vector.ndim != 2:
        raise T.ShapeError(f"reshape_to_map needs [B, k], got {vector.shape}")
    return T.reshape(vector, (vector.shape[0], vector.shape[1], 1))


def flatten(x):
    """Collapse everything after the batch axis: ``[B, ...] -> [B, prod]``."""
    return T.reshape(x, (x.shape[0], -1))
