"""The three classifier architectures over the LIAR attribute branches.

Every model routes each of the nine input slots (four text sequences, three
single-token attributes, the five raw credit counts, and the credit-history
one-hot) through its own branch encoder, merges branch vectors two at a time
through the ten relation layers in ``RELATION_PAIRS``, concatenates the
relation vectors with the counts and special-feature branch vectors, and
finishes with a six-way softmax head. The architectures differ only in the
branch encoders:

* ``bilstm``: text goes embedding -> BiLSTM -> dense; everything else dense.
* ``cnn``: text goes embedding -> conv -> global max pool -> dense; the two
  count vectors are reshaped to width-1 sequences and convolved.
* ``combined``: text goes embedding -> BiLSTM -> dense -> reshape -> conv ->
  pool -> dense; single tokens and count vectors are convolved as in ``cnn``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import tensor as T
from .data import Batch, NUM_CLASSES, SEQ_LENGTHS
from .layers import (BiLstmLayer, Conv1DLayer, DenseLayer, EmbeddingLayer,
                     flatten, reshape_to_map)
from .tensor import ShapeError, Tensor

ARCHITECTURES = ("bilstm", "cnn", "combined")

TEXT_BRANCHES = ("statement", "type", "job", "context")
SINGLE_TOKEN_BRANCHES = ("speaker", "party", "state")
VECTOR_BRANCHES = ("counts", "special")
BRANCHES = TEXT_BRANCHES + SINGLE_TOKEN_BRANCHES + VECTOR_BRANCHES

# The ten pairwise attribute relations, merged two at a time.
RELATION_PAIRS = (
    ("statement", "type"),
    ("statement", "context"),
    ("speaker", "party"),
    ("party", "job"),
    ("type", "context"),
    ("statement", "state"),
    ("statement", "party"),
    ("state", "party"),
    ("context", "party"),
    ("context", "speaker"),
)

INPUT_SLOTS = ("statement_ids", "type_ids", "job_ids", "context_ids",
               "speaker_id", "party_id", "state_id", "counts", "special_feature")


class CheckpointError(RuntimeError):
    """A checkpoint file that cannot be loaded against the current code or cache."""


@dataclass
class HyperParams:
    """Architecture widths and switches; defaults are the full-scale setup."""

    embed_dim: int = 300
    lstm_hidden: int = 50
    lstm_dense: int = 128
    statement_kernel: int = 3
    statement_filters: int = 128
    attr_kernel: int = 2
    attr_filters: int = 32
    conv_dense: int = 64
    merge_width: int = 64
    statement_len: int = SEQ_LENGTHS["statement"]
    type_len: int = SEQ_LENGTHS["type"]
    job_len: int = SEQ_LENGTHS["job"]
    context_len: int = SEQ_LENGTHS["context"]
    trainable_embeddings: bool = False
    dropout: float = 0.0

    def validate(self):
        for name in ("embed_dim", "lstm_hidden", "lstm_dense", "statement_kernel",
                     "statement_filters", "attr_kernel", "attr_filters", "conv_dense",
                     "merge_width", "statement_len", "type_len", "job_len", "context_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"hyperparameter {name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")

    def sequence_lengths(self):
        return {"statement": self.statement_len, "type": self.type_len,
                "job": self.job_len, "context": self.context_len,
                "speaker": 1, "party": 1, "state": 1}


def _check_length(branch, length, kernel):
    if length < kernel:
        raise ValueError(f"branch {branch!r}: padded length {length} is shorter "
                         f"than its convolution window {kernel}")


class LstmBranch:
    """embedding -> BiLSTM -> dense(relu); used by the bilstm model's text slots."""

    kind = "bilstm-dense"

    def __init__(self, rng, hyper, embedding):
        self.embedding = embedding
        self.lstm = BiLstmLayer(rng, hyper.embed_dim, hyper.lstm_hidden)
        self.dense = DenseLayer(rng, 2 * hyper.lstm_hidden, hyper.lstm_dense, "relu")
        self.out_width = hyper.lstm_dense

    def __call__(self, ids, trace=None, name=""):
        x = self.embedding(ids)
        h = self.lstm(x)
        out = self.dense(h)
        if trace is not None:
            trace[f"{name}.lstm"] = h.data.copy()
        return out

    def params(self):
        out = [(f"bilstm.{n}", t) for n, t in self.lstm.params()]
        out += [(f"dense.{n}", t) for n, t in self.dense.params()]
        return out


class EmbedDenseBranch:
    """embedding -> flatten -> dense(relu); the bilstm model's single-token slots."""

    kind = "embed-dense"

    def __init__(self, rng, hyper, embedding):
        self.embedding = embedding
        self.dense = DenseLayer(rng, hyper.embed_dim, hyper.lstm_dense, "relu")
        self.out_width = hyper.lstm_dense

    def __call__(self, ids, trace=None, name=""):
        return self.dense(flatten(self.embedding(ids)))

    def params(self):
        return [(f"dense.{n}", t) for n, t in self.dense.params()]


class VectorDenseBranch:
    """dense(relu) straight on a feature vector; the bilstm model's count slots."""

    kind = "vector-dense"

    def __init__(self, rng, in_width, out_width):
        self.dense = DenseLayer(rng, in_width, out_width, "relu")
        self.out_width = out_width

    def __call__(self, vec, trace=None, name=""):
        return self.dense(vec)

    def params(self):
        return [(f"dense.{n}", t) for n, t in self.dense.params()]


class ConvBranch:
    """embedding -> conv -> global max pool -> dense(relu) over token sequences."""

    kind = "conv-dense"

    def __init__(self, rng, hyper, embedding, branch, length, kernel, filters):
        _check_length(branch, length, kernel)
        self.embedding = embedding
        self.conv = Conv1DLayer(rng, kernel, hyper.embed_dim, filters, "relu")
        self.dense = DenseLayer(rng, filters, hyper.conv_dense, "relu")
        self.out_width = hyper.conv_dense

    def __call__(self, ids, trace=None, name=""):
        x = self.embedding(ids)
        c = self.conv(x)
        p = T.maxpool1d_global(c)
        if trace is not None:
            trace[f"{name}.conv"] = c.data.copy()
            trace[f"{name}.pooled"] = p.data.copy()
        return self.dense(p)

    def params(self):
        out = [(f"conv.{n}", t) for n, t in self.conv.params()]
        out += [(f"dense.{n}", t) for n, t in self.dense.params()]
        return out


class VectorConvBranch:
    """reshape to width-1 map -> conv -> pool -> dense(relu) over count vectors."""

    kind = "vector-conv"

    def __init__(self, rng, hyper, branch, length, kernel, filters):
        _check_length(branch, length, kernel)
        self.conv = Conv1DLayer(rng, kernel, 1, filters, "relu")
        self.dense = DenseLayer(rng, filters, hyper.conv_dense, "relu")
        self.out_width = hyper.conv_dense

    def __call__(self, vec, trace=None, name=""):
        c = self.conv(reshape_to_map(vec))
        p = T.maxpool1d_global(c)
        if trace is not None:
            trace[f"{name}.conv"] = c.data.copy()
        return self.dense(p)

    def params(self):
        out = [(f"conv.{n}", t) for n, t in self.conv.params()]
        out += [(f"dense.{n}", t) for n, t in self.dense.params()]
        return out


class LstmConvBranch:
    """embedding -> BiLSTM -> dense -> reshape -> conv -> pool -> dense.

    The combined model's text encoder: the BiLSTM summary vector is reshaped
    into a width-1 sequence and convolved before the branch dense layer.
    """

    kind = "bilstm-conv-dense"

    def __init__(self, rng, hyper, embedding, branch, kernel, filters):
        _check_length(branch, hyper.lstm_dense, kernel)
        self.embedding = embedding
        self.lstm = BiLstmLayer(rng, hyper.embed_dim, hyper.lstm_hidden)
        self.lstm_dense = DenseLayer(rng, 2 * hyper.lstm_hidden, hyper.lstm_dense, "relu")
        self.conv = Conv1DLayer(rng, kernel, 1, filters, "relu")
        self.out_dense = DenseLayer(rng, filters, hyper.conv_dense, "relu")
        self.out_width = hyper.conv_dense

    def __call__(self, ids, trace=None, name=""):
        x = self.embedding(ids)
        h = self.lstm_dense(self.lstm(x))
        c = self.conv(reshape_to_map(h))
        p = T.maxpool1d_global(c)
        if trace is not None:
            trace[f"{name}.lstm_dense"] = h.data.copy()
            trace[f"{name}.conv"] = c.data.copy()
        return self.out_dense(p)

    def params(self):
        out = [(f"bilstm.{n}", t) for n, t in self.lstm.params()]
        out += [(f"lstm_dense.{n}", t) for n, t in self.lstm_dense.params()]
        out += [(f"conv.{n}", t) for n, t in self.conv.params()]
        out += [(f"out_dense.{n}", t) for n, t in self.out_dense.params()]
        return out


class ModelGraph:
    """A built classifier: shared embedding, branch encoders, relation merges,
    softmax head, and a flat named-parameter registry.

    Construction and training are single-threaded. Once parameters are frozen
    (after training), forward passes only read them and each call builds its
    own activation graph, so concurrent ``predict`` calls are safe.
    """

    def __init__(self, architecture, hyper, embedding, branches, relations, head):
        self.architecture = architecture
        self.hyper = hyper
        self.embedding = embedding
        self.branches = branches
        self.relations = relations
        self.head = head
        self._params = {"embedding.matrix": embedding.matrix}
        for name in BRANCHES:
            for suffix, tensor in branches[name].params():
                self._params[f"{name}.{suffix}"] = tensor
        for a, b, layer in relations:
            for suffix, tensor in layer.params():
                self._params[f"relation.{a}~{b}.{suffix}"] = tensor
        for suffix, tensor in head.params():
            self._params[f"head.{suffix}"] = tensor

    @property
    def input_slots(self):
        return INPUT_SLOTS

    def parameters(self, trainable_only=True):
        if trainable_only:
            return {n: t for n, t in self._params.items() if t.requires_grad}
        return dict(self._params)

    def num_parameters(self, trainable_only=True):
        return sum(t.size for t in self.parameters(trainable_only).values())

    def zero_grad(self):
        T.zero_grads(self._params)

    def apply_constraints(self):
        """Re-impose invariants after an optimizer step (zero padding row)."""
        if self.embedding.trainable:
            self.embedding.matrix.data[0, :] = 0.0

    def _validate_batch(self, batch):
        lengths = self.hyper.sequence_lengths()
        widths = {
            "statement_ids": lengths["statement"], "type_ids": lengths["type"],
            "job_ids": lengths["job"], "context_ids": lengths["context"],
            "speaker_id": 1, "party_id": 1, "state_id": 1,
            "counts": 5, "special_feature": 5,
        }
        batch_size = None
        for slot, width in widths.items():
            arr = getattr(batch, slot)
            if arr.ndim != 2 or arr.shape[1] != width:
                raise ShapeError(f"input slot {slot!r} has shape {arr.shape}, "
                                 f"expected [batch, {width}]")
            if batch_size is None:
                batch_size = arr.shape[0]
            elif arr.shape[0] != batch_size:
                raise ShapeError(f"input slot {slot!r} has batch {arr.shape[0]}, "
                                 f"expected {batch_size}")

    def forward_batch(self, batch, training=False, rng=None, trace=None):
        """Forward a :class:`~liarnet.data.Batch` to a ``[B, 6]`` probability tensor."""
        self._validate_batch(batch)
        if training and self.hyper.dropout > 0.0 and rng is None:
            raise ValueError("dropout is enabled; training forward needs an rng")

        slot_of = {"statement": batch.statement_ids, "type": batch.type_ids,
                   "job": batch.job_ids, "context": batch.context_ids,
                   "speaker": batch.speaker_id, "party": batch.party_id,
                   "state": batch.state_id, "counts": Tensor(batch.counts),
                   "special": Tensor(batch.special_feature)}
        vectors = {}
        for name in BRANCHES:
            vec = self.branches[name](slot_of[name], trace=trace, name=name)
            if training and self.hyper.dropout > 0.0:
                vec = T.dropout(vec, self.hyper.dropout, rng)
            vectors[name] = vec
            if trace is not None:
                trace[f"branch:{name}"] = vec.data.copy()

        relation_vectors = []
        for a, b, layer in self.relations:
            rel = layer(T.concat([vectors[a], vectors[b]], axis=1))
            relation_vectors.append(rel)
            if trace is not None:
                trace[f"relation:{a}~{b}"] = rel.data.copy()

        head_in = T.concat(relation_vectors + [vectors["counts"], vectors["special"]], axis=1)
        probs = self.head(head_in)
        if trace is not None:
            trace["probs"] = probs.data.copy()
        return probs

    def describe(self):
        return {
            "architecture": self.architecture,
            "branches": {name: {"kind": self.branches[name].kind,
                                "out_width": self.branches[name].out_width}
                         for name in BRANCHES},
            "relations": [f"{a}~{b}" for a, b, _ in self.relations],
            "head_out": NUM_CLASSES,
        }


def _branch_conv_shape(hyper, branch):
    """(kernel, filters) for a branch's convolution stage."""
    if branch == "statement":
        return hyper.statement_kernel, hyper.statement_filters
    return hyper.attr_kernel, hyper.attr_filters


def _build(architecture, embedding_matrix, hyper, seed):
    hyper = hyper if hyper is not None else HyperParams()
    hyper.validate()
    matrix = np.asarray(embedding_matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != hyper.embed_dim:
        raise ShapeError(f"embedding matrix shape {matrix.shape} does not match "
                         f"embed_dim {hyper.embed_dim}")
    rng = np.random.default_rng(seed)
    embedding = EmbeddingLayer(matrix, trainable=hyper.trainable_embeddings)
    lengths = hyper.sequence_lengths()
    branches = {}

    for name in TEXT_BRANCHES:
        if architecture == "bilstm":
            branches[name] = LstmBranch(rng, hyper, embedding)
        elif architecture == "cnn":
            kernel, filters = _branch_conv_shape(hyper, name)
            branches[name] = ConvBranch(rng, hyper, embedding, name,
                                        lengths[name], kernel, filters)
        else:
            kernel, filters = _branch_conv_shape(hyper, name)
            branches[name] = LstmConvBranch(rng, hyper, embedding, name, kernel, filters)

    for name in SINGLE_TOKEN_BRANCHES:
        if architecture == "bilstm":
            branches[name] = EmbedDenseBranch(rng, hyper, embedding)
        else:
            # single-token sequences force a window of 1
            branches[name] = ConvBranch(rng, hyper, embedding, name,
                                        1, 1, hyper.attr_filters)

    for name in VECTOR_BRANCHES:
        if architecture == "bilstm":
            branches[name] = VectorDenseBranch(rng, 5, hyper.lstm_dense)
        else:
            branches[name] = VectorConvBranch(rng, hyper, name, 5,
                                              hyper.attr_kernel, hyper.attr_filters)

    relations = []
    for a, b in RELATION_PAIRS:
        in_width = branches[a].out_width + branches[b].out_width
        relations.append((a, b, DenseLayer(rng, in_width, hyper.merge_width, "relu")))

    head_in = (len(RELATION_PAIRS) * hyper.merge_width
               + branches["counts"].out_width + branches["special"].out_width)
    head = DenseLayer(rng, head_in, NUM_CLASSES, "softmax")
    return ModelGraph(architecture, hyper, embedding, branches, relations, head)


def build_bilstm_model(embedding_matrix, hyper=None, seed=0):
    """Text and profile attributes through BiLSTM/dense branches, relation
    merges, softmax head."""
    return _build("bilstm", embedding_matrix, hyper, seed)


def build_cnn_model(embedding_matrix, hyper=None, seed=0):
    """Every attribute through convolution and global max pooling branches."""
    return _build("cnn", embedding_matrix, hyper, seed)


def build_combined_model(embedding_matrix, hyper=None, seed=0):
    """BiLSTM summaries reconvolved per branch, then the shared merge topology."""
    return _build("combined", embedding_matrix, hyper, seed)


def build_model(architecture, embedding_matrix, hyper=None, seed=0):
    if architecture not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {architecture!r}; expected one of {ARCHITECTURES}")
    return _build(architecture, embedding_matrix, hyper, seed)


def example_batch(example):
    """Wrap one :class:`~liarnet.data.EncodedExample` as a batch of one."""
    return Batch(
        statement_ids=example.statement_ids[None, :],
        type_ids=example.type_ids[None, :],
        job_ids=example.job_ids[None, :],
        context_ids=example.context_ids[None, :],
        speaker_id=example.speaker_id[None, :],
        party_id=example.party_id[None, :],
        state_id=example.state_id[None, :],
        counts=example.counts[None, :],
        special_feature=example.special_feature[None, :],
        labels=np.array([example.label_index], dtype=np.int64),
    )


def predict(model, example):
    """Class probabilities and argmax label for one encoded example.

    Exact probability ties resolve to the lowest class index.
    """
    with T.no_grad():
        probs = model.forward_batch(example_batch(example))
    p = probs.data[0]
    return p, int(np.argmax(p))


def predict_batch(model, dataset, batch_size=64):
    """Probabilities and argmax labels over a whole dataset."""
    probs = np.empty((len(dataset), NUM_CLASSES), dtype=np.float64)
    with T.no_grad():
        for start in range(0, len(dataset), batch_size):
            idx = np.arange(start, min(start + batch_size, len(dataset)))
            out = model.forward_batch(dataset.batch(idx))
            probs[idx] = out.data
    return probs, probs.argmax(axis=1)


def accuracy(model, dataset, batch_size=64):
    _, predicted = predict_batch(model, dataset, batch_size)
    return float((predicted == dataset.labels).mean())


def save_checkpoint(path, model, vocab_sha256):
    """Write a versioned checkpoint: JSON header line, then the named
    parameter tensors as row-major float64, in header order."""
    params = model.parameters(trainable_only=False)
    header = {
        "format": "liarnet-checkpoint",
        "version": 1,
        "architecture": model.architecture,
        "hyper": asdict(model.hyper),
        "vocab_sha256": vocab_sha256,
        "params": [{"name": n, "shape": list(t.shape)} for n, t in params.items()],
    }
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8") + b"\n")
        for tensor in params.values():
            fh.write(tensor.data.astype("<f8").tobytes(order="C"))


def load_checkpoint(path, expected_vocab_sha256=None):
    """Rebuild a model from a checkpoint; returns ``(model, header)``.

    Raises :class:`CheckpointError` for format problems or, when
    ``expected_vocab_sha256`` is given, for a vocabulary-hash mismatch
    (a stale or foreign cache).
    """
    path = Path(path)
    with path.open("rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line)
        except (json.JSONDecodeError, UnicodeDecodeError):
            raise CheckpointError(f"{path}: missing or corrupt header") from None
        if header.get("format") != "liarnet-checkpoint" or header.get("version") != 1:
            raise CheckpointError(f"{path}: not a version-1 checkpoint")
        if expected_vocab_sha256 is not None and header["vocab_sha256"] != expected_vocab_sha256:
            raise CheckpointError(
                f"{path}: checkpoint was trained against a different vocabulary "
                f"({header['vocab_sha256'][:12]}... vs {expected_vocab_sha256[:12]}...)")
        hyper = HyperParams(**header["hyper"])
        entries = header["params"]
        by_name = {e["name"]: tuple(e["shape"]) for e in entries}
        if "embedding.matrix" not in by_name:
            raise CheckpointError(f"{path}: checkpoint lacks an embedding matrix")
        vocab_size, dim = by_name["embedding.matrix"]
        if dim != hyper.embed_dim:
            raise CheckpointError(f"{path}: embedding width {dim} != hyper {hyper.embed_dim}")
        model = build_model(header["architecture"], np.zeros((vocab_size, dim)), hyper, seed=0)
        params = model.parameters(trainable_only=False)
        if set(params) != set(by_name):
            missing = set(params) ^ set(by_name)
            raise CheckpointError(f"{path}: parameter names do not match this build: {sorted(missing)[:5]}")
        for entry in entries:
            tensor = params[entry["name"]]
            shape = tuple(entry["shape"])
            if tensor.shape != shape:
                raise CheckpointError(f"{path}: {entry['name']} has shape {shape}, "
                                      f"build expects {tensor.shape}")
            nbytes = int(np.prod(shape)) * 8
            blob = fh.read(nbytes)
            if len(blob) != nbytes:
                raise CheckpointError(f"{path}: truncated while reading {entry['name']}")
            tensor.data[...] = np.frombuffer(blob, dtype="<f8").reshape(shape)
    return model, header
