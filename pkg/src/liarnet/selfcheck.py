"""Built-in verification: reference-table reproduction and gradient checks.

Everything here runs from embedded fixtures; no dataset or pretrained
embedding file is needed. The gradient suite covers every differentiable
operation at controlled probe points (away from relu/max kinks) and runs a
full element-by-element finite-difference pass over downscaled builds of all
three architectures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import layers as L
from . import reference as ref
from . import tensor as T
from .data import Batch, EncodedDataset
from .models import ARCHITECTURES, HyperParams, build_model
from .optim import categorical_crossentropy
from .report import metrics
from .tensor import Tensor, finite_diff_check

DOWNSCALED_HYPER = dict(
    embed_dim=6, lstm_hidden=3, lstm_dense=4,
    statement_kernel=3, statement_filters=2, attr_kernel=2, attr_filters=2,
    conv_dense=4, merge_width=4,
    statement_len=6, type_len=3, job_len=4, context_len=5,
    trainable_embeddings=True,
)
DOWNSCALED_VOCAB = 14


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}" + (f": {self.detail}" if self.detail else "")


def downscaled_hyper(**overrides):
    kwargs = dict(DOWNSCALED_HYPER)
    kwargs.update(overrides)
    return HyperParams(**kwargs)


def downscaled_embedding_matrix(seed=0, vocab_size=DOWNSCALED_VOCAB, dim=None):
    rng = np.random.default_rng(seed)
    dim = dim if dim is not None else DOWNSCALED_HYPER["embed_dim"]
    matrix = rng.uniform(-0.25, 0.25, size=(vocab_size, dim))
    matrix[0, :] = 0.0
    return matrix


def synthetic_batch(hyper, batch_size, seed, vocab_size=DOWNSCALED_VOCAB):
    """Random well-formed inputs for a model with the given hyperparameters."""
    rng = np.random.default_rng(seed)
    lengths = hyper.sequence_lengths()

    def ids(length):
        return rng.integers(2, vocab_size, size=(batch_size, length))

    return Batch(
        statement_ids=ids(lengths["statement"]),
        type_ids=ids(lengths["type"]),
        job_ids=ids(lengths["job"]),
        context_ids=ids(lengths["context"]),
        speaker_id=ids(1),
        party_id=ids(1),
        state_id=ids(1),
        counts=rng.integers(0, 10, size=(batch_size, 5)).astype(np.float64),
        special_feature=np.eye(5)[rng.integers(0, 5, size=batch_size)],
        labels=rng.integers(0, 6, size=batch_size),
    )


def synthetic_dataset(hyper, n, seed, vocab_size=DOWNSCALED_VOCAB):
    batch = synthetic_batch(hyper, n, seed, vocab_size)
    arrays = {
        "statement_ids": batch.statement_ids, "type_ids": batch.type_ids,
        "job_ids": batch.job_ids, "context_ids": batch.context_ids,
        "speaker_id": batch.speaker_id, "party_id": batch.party_id,
        "state_id": batch.state_id, "counts": batch.counts,
        "special_feature": batch.special_feature,
    }
    return EncodedDataset(arrays, batch.labels)


def _away_from_zero(rng, shape, margin=0.05, scale=1.0):
    """Uniform values whose magnitudes stay clear of the relu kink."""
    sign = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return sign * rng.uniform(margin, scale, size=shape)


def _spaced_columns(rng, batch, time, feats, gap=0.2):
    """Per-(batch, feature) time columns with distinct, well-separated values."""
    base = np.arange(time, dtype=np.float64) * gap
    out = np.empty((batch, time, feats))
    for b in range(batch):
        for f in range(feats):
            out[b, :, f] = rng.permutation(base) + rng.uniform(-gap / 8, gap / 8)
    return out


def op_gradient_check(op, seed, step=1e-3, tol=1e-4):
    """Finite-difference check of one operation at a kink-safe probe point."""
    rng = np.random.default_rng(seed)

    if op == "matmul":
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 2)))
        return finite_diff_check(lambda: T.mul(T.matmul(a, b), w).sum(),
                                 {"a": a, "b": b}, step, tol)
    if op == "add":
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(4,)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 4)))
        return finite_diff_check(lambda: T.mul(T.add(a, b), w).sum(),
                                 {"a": a, "bias": b}, step, tol)
    if op == "mul":
        a = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        return finite_diff_check(lambda: T.mul(a, b).sum(), {"a": a, "b": b}, step, tol)
    if op == "concat":
        a = Tensor(rng.normal(size=(2, 3)), requires_grad=True)
        b = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 5)))
        return finite_diff_check(lambda: T.mul(T.concat([a, b], axis=1), w).sum(),
                                 {"a": a, "b": b}, step, tol)
    if op == "relu":
        a = Tensor(_away_from_zero(rng, (3, 4)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 4)))
        return finite_diff_check(lambda: T.mul(T.relu(a), w).sum(), {"a": a}, step, tol)
    if op == "sigmoid":
        a = Tensor(rng.normal(size=(3, 3)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 3)))
        return finite_diff_check(lambda: T.mul(T.sigmoid(a), w).sum(), {"a": a}, step, tol)
    if op == "tanh":
        a = Tensor(rng.normal(size=(3, 3)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 3)))
        return finite_diff_check(lambda: T.mul(T.tanh(a), w).sum(), {"a": a}, step, tol)
    if op == "softmax":
        a = Tensor(rng.normal(size=(2, 6)), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 6)))
        return finite_diff_check(lambda: T.mul(T.softmax(a), w).sum(), {"a": a}, step, tol)
    if op == "reshape":
        a = Tensor(rng.normal(size=(2, 6)), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 3, 2)))
        return finite_diff_check(lambda: T.mul(T.reshape(a, (2, 3, 2)), w).sum(),
                                 {"a": a}, step, tol)
    if op == "select_timestep":
        a = Tensor(rng.normal(size=(2, 4, 3)), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 3)))
        return finite_diff_check(
            lambda: T.mul(T.select_timestep(a, 2), w).sum(), {"a": a}, step, tol)
    if op == "embedding_lookup":
        matrix = Tensor(rng.normal(size=(6, 4)), requires_grad=True)
        ids = rng.integers(0, 6, size=(2, 5))  # duplicates exercise accumulation
        w = Tensor(rng.normal(size=(2, 5, 4)))
        return finite_diff_check(lambda: T.mul(T.embedding_lookup(matrix, ids), w).sum(),
                                 {"matrix": matrix}, step, tol)
    if op == "conv1d":
        x = Tensor(rng.normal(size=(2, 5, 3)), requires_grad=True)
        k = Tensor(rng.normal(size=(2, 2, 3)), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 4, 2)))
        return finite_diff_check(lambda: T.mul(T.conv1d(x, k), w).sum(),
                                 {"x": x, "kernels": k}, step, tol)
    if op == "maxpool1d_global":
        x = Tensor(_spaced_columns(rng, 2, 4, 3), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 3)))
        return finite_diff_check(lambda: T.mul(T.maxpool1d_global(x), w).sum(),
                                 {"x": x}, step, tol)
    if op == "crossentropy":
        logits = Tensor(rng.normal(size=(3, 6)), requires_grad=True)
        labels = rng.integers(0, 6, size=3)
        return finite_diff_check(
            lambda: categorical_crossentropy(T.softmax(logits), labels),
            {"logits": logits}, step, tol)
    if op == "bilstm":
        layer = L.BiLstmLayer(np.random.default_rng(seed + 1), 2, 3)
        x = Tensor(rng.normal(size=(2, 4, 2)), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 6)))
        params = {"x": x}
        params.update({f"lstm.{n}": t for n, t in layer.params()})
        return finite_diff_check(lambda: T.mul(L.bilstm(x, layer), w).sum(),
                                 params, step, tol)
    if op == "dense":
        layer = L.DenseLayer(np.random.default_rng(seed + 1), 4, 3, "identity")
        x = Tensor(rng.normal(size=(2, 4)), requires_grad=True)
        w = Tensor(rng.normal(size=(2, 3)))
        params = {"x": x}
        params.update({f"dense.{n}": t for n, t in layer.params()})
        return finite_diff_check(lambda: T.mul(L.dense(x, layer), w).sum(),
                                 params, step, tol)
    raise ValueError(f"unknown op {op!r}")


CHECKED_OPS = ("matmul", "add", "mul", "concat", "relu", "sigmoid", "tanh",
               "softmax", "reshape", "select_timestep", "embedding_lookup",
               "conv1d", "maxpool1d_global", "crossentropy", "bilstm", "dense")


def op_gradient_checks(seeds=(0, 1, 2)):
    """One result per operation, worst case over the given seeds."""
    results = []
    for op in CHECKED_OPS:
        worst = None
        for seed in seeds:
            report = op_gradient_check(op, seed)
            if worst is None or report.max_rel_error > worst.max_rel_error:
                worst = report
            if not report.passed:
                worst = report
                break
        results.append(CheckResult(f"grad-op:{op}", worst.passed, str(worst)))
    return results


def model_gradient_check(architecture, probe_seeds=(0, 1, 2, 3, 4),
                         batch_size=2, step=1e-3, tol=1e-4):
    """Full element-by-element finite-difference check of a downscaled build.

    relu and max-pool make the loss piecewise smooth. Freshly initialized
    zero biases put some pre-activations exactly on the relu kink (dead paths
    feed exact zeros downstream), so the probe point is a jittered copy of
    the initialization; residual near-kink coincidences are dodged by trying
    a few probe seeds. A genuine backward-rule bug is systematic and fails
    every probe.
    """
    last = None
    for seed in probe_seeds:
        hyper = downscaled_hyper()
        matrix = downscaled_embedding_matrix(seed=seed)
        model = build_model(architecture, matrix, hyper, seed=seed)
        jitter = np.random.default_rng(seed + 7)
        for p in model.parameters().values():
            p.data += jitter.uniform(-0.15, 0.15, size=p.data.shape)
        batch = synthetic_batch(hyper, batch_size, seed=seed + 1)
        f = lambda: categorical_crossentropy(model.forward_batch(batch), batch.labels)
        report = finite_diff_check(f, model.parameters(), step=step, tol=tol)
        if report.passed:
            return report
        last = report
    return last


def model_gradient_checks(architectures=ARCHITECTURES):
    return [CheckResult(f"grad-model:{arch}", rep.passed, str(rep))
            for arch, rep in ((a, model_gradient_check(a)) for a in architectures)]


def metrics_reproduction_checks(confusions=None, accuracies=None,
                                class_metrics=None, weighted=None):
    """Recompute the bundled reference tables from their confusion matrices.

    Every per-class precision/recall/F1 cell must match at two-decimal
    rounding (+-0.005), the weighted Avg/Total rows likewise, supports
    exactly, and the three accuracies to +-1e-4.
    """
    confusions = confusions if confusions is not None else ref.REFERENCE_CONFUSIONS
    accuracies = accuracies if accuracies is not None else ref.REFERENCE_ACCURACY
    class_metrics = class_metrics if class_metrics is not None else ref.REFERENCE_CLASS_METRICS
    weighted = weighted if weighted is not None else ref.REFERENCE_WEIGHTED

    from .data import LABELS

    results = []
    for arch in ("bilstm", "cnn", "combined"):
        rep = metrics(confusions[arch])

        diff = abs(rep.accuracy - accuracies[arch])
        results.append(CheckResult(
            f"reference:{arch}:accuracy", diff <= ref.ACCURACY_TOLERANCE,
            f"computed {rep.accuracy:.6f} vs published {accuracies[arch]} "
            f"(|diff| {diff:.2e}, tol {ref.ACCURACY_TOLERANCE:g})"))

        supports = tuple(rep.per_class[label].support for label in LABELS)
        results.append(CheckResult(
            f"reference:{arch}:supports", supports == ref.TEST_SUPPORTS,
            f"row sums {supports} vs published {ref.TEST_SUPPORTS}"))

        bad_cells = []
        for label, (p, r, f1, support) in zip(LABELS, class_metrics[arch]):
            m = rep.per_class[label]
            for metric_name, got, want in (("precision", m.precision, p),
                                           ("recall", m.recall, r),
                                           ("f1", m.f1, f1)):
                if abs(got - want) > ref.CELL_TOLERANCE:
                    bad_cells.append(f"{label}/{metric_name}: {got:.4f} vs {want}")
            if m.support != support:
                bad_cells.append(f"{label}/support: {m.support} vs {support}")
        results.append(CheckResult(
            f"reference:{arch}:per-class", not bad_cells,
            "; ".join(bad_cells) if bad_cells else
            f"all 18 cells within {ref.CELL_TOLERANCE}"))

        wp, wr, wf = weighted[arch]
        bad_avg = [f"{name}: {got:.4f} vs {want}"
                   for name, got, want in (("precision", rep.weighted_precision, wp),
                                           ("recall", rep.weighted_recall, wr),
                                           ("f1", rep.weighted_f1, wf))
                   if abs(got - want) > ref.CELL_TOLERANCE]
        results.append(CheckResult(
            f"reference:{arch}:weighted-avg", not bad_avg,
            "; ".join(bad_avg) if bad_avg else
            f"Avg/Total row within {ref.CELL_TOLERANCE}"))
    return results


def run_all(grad_seeds=(0, 1, 2)):
    """The whole embedded suite: reference tables, op gradients, model gradients."""
    results = metrics_reproduction_checks()
    results += op_gradient_checks(grad_seeds)
    results += model_gradient_checks()
    return results
