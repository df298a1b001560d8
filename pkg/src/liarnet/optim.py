"""Adadelta, categorical cross-entropy, and the mini-batch training loop."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import GraphError, Tensor

PROB_FLOOR = 1e-12


class TrainingDivergedError(RuntimeError):
    """Raised when a non-finite loss appears during training."""


def categorical_crossentropy(probs, label):
    """Negative log-probability of the true class.

    ``probs`` is a probability vector ``[n]`` with an integer ``label``, or a
    batch ``[B, n]`` with an integer array, in which case the batch mean is
    returned. Probabilities are clamped to ``>= 1e-12`` before the log.
    """
    if probs.ndim == 1:
        n = probs.shape[0]
        label = int(label)
        if not 0 <= label < n:
            raise IndexError(f"label {label} out of range [0, {n})")
        clamped = max(float(probs.data[label]), PROB_FLOOR)
        out = Tensor(np.asarray(-np.log(clamped)), _prev=T._tracked(probs),
                     _op="categorical_crossentropy")
        if out._prev:
            def _backward():
                if probs.data[label] >= PROB_FLOOR:
                    g = np.zeros_like(probs.data)
                    g[label] = -float(out.grad) / clamped
                    T._accum(probs, g)
            out._backward = _backward
        return out

    if probs.ndim != 2:
        raise T.ShapeError(f"probs must be [n] or [B, n], got {probs.shape}")
    labels = np.asarray(label, dtype=np.int64)
    batch, n = probs.shape
    if labels.shape != (batch,):
        raise T.ShapeError(f"labels shape {labels.shape} does not match batch {batch}")
    if labels.size and (labels.min() < 0 or labels.max() >= n):
        raise IndexError(f"label out of range [0, {n}): min={labels.min()}, max={labels.max()}")
    picked = probs.data[np.arange(batch), labels]
    clamped = np.maximum(picked, PROB_FLOOR)
    out = Tensor(np.asarray(-np.log(clamped).mean()), _prev=T._tracked(probs),
                 _op="categorical_crossentropy")
    if out._prev:
        def _backward():
            g = np.zeros_like(probs.data)
            live = picked >= PROB_FLOOR
            rows = np.arange(batch)[live]
            g[rows, labels[live]] = -float(out.grad) / (batch * clamped[live])
            T._accum(probs, g)
        out._backward = _backward
    return out


class AdadeltaState:
    """Per-parameter running averages of squared gradients and squared updates."""

    def __init__(self, params, rho=0.95, epsilon=1e-6):
        if not 0.0 < rho < 1.0:
            raise ValueError(f"rho must be in (0, 1), got {rho}")
        if epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        self.rho = rho
        self.epsilon = epsilon
        self.sq_grad = {name: np.zeros_like(p.data) for name, p in params.items()}
        self.sq_delta = {name: np.zeros_like(p.data) for name, p in params.items()}


def adadelta_step(params, state):
    """Apply one Adadelta update in place.

    Per element, in this exact order: decay E[g2] with the new gradient,
    compute ``dx = -(sqrt(E[dx2]+eps) / sqrt(E[g2]+eps)) * g``, decay E[dx2]
    with ``dx``, then add ``dx`` to the parameter.
    """
    rho, eps = state.rho, state.epsilon
    for name, p in params.items():
        if p.grad is None:
            raise GraphError(f"parameter {name!r} has no gradient; run backward first")
        g = p.grad
        eg = state.sq_grad[name]
        ed = state.sq_delta[name]
        if eg.shape != p.data.shape:
            raise T.ShapeError(f"optimizer state for {name!r} has shape {eg.shape}, "
                               f"parameter has {p.data.shape}")
        eg *= rho
        eg += (1.0 - rho) * g * g
        dx = -(np.sqrt(ed + eps) / np.sqrt(eg + eps)) * g
        ed *= rho
        ed += (1.0 - rho) * dx * dx
        p.data += dx


@dataclass
class TrainConfig:
    """Knobs for the training loop; defaults favor reproducibility."""

    batch_size: int = 64
    epochs: int = 30
    seed: int = 0
    rho: float = 0.95
    epsilon: float = 1e-6
    shuffle: bool = True
    patience: int | None = 5

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must be in (0, 1), got {self.rho}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.patience is not None and self.patience < 1:
            raise ValueError(f"patience must be >= 1 or None, got {self.patience}")


@dataclass
class EpochRecord:
    epoch: int
    mean_loss: float
    val_accuracy: float | None = None


@dataclass
class TrainResult:
    log: list = field(default_factory=list)
    best_val_accuracy: float | None = None
    best_epoch: int | None = None
    stopped_early: bool = False


def train_log_lines(log):
    """Render epoch records as line-delimited JSON (epoch, mean_loss, val_accuracy)."""
    return [json.dumps({"epoch": r.epoch, "mean_loss": r.mean_loss,
                        "val_accuracy": r.val_accuracy}) for r in log]


def train(model, train_set, config, val_set=None):
    """Run shuffled mini-batch epochs of Adadelta on categorical cross-entropy.

    Fully deterministic given ``config.seed``. When ``val_set`` is given, the
    model ends up with the parameters of its best validation-accuracy epoch
    and early stopping applies after ``config.patience`` stale epochs. A
    non-finite loss aborts with the offending epoch and batch index.
    """
    from .models import accuracy  # local import: models never imports optim

    if len(train_set) == 0:
        raise ValueError("training set is empty")
    rng = np.random.default_rng(config.seed)
    params = model.parameters()
    state = AdadeltaState(params, rho=config.rho, epsilon=config.epsilon)
    result = TrainResult()
    best_snapshot = None
    best_acc = -np.inf
    stale = 0
    n = len(train_set)

    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        total = 0.0
        batches = 0
        for bi, start in enumerate(range(0, n, config.batch_size)):
            batch = train_set.batch(order[start:start + config.batch_size])
            probs = model.forward_batch(batch, training=True, rng=rng)
            loss = categorical_crossentropy(probs, batch.labels)
            value = float(loss.data)
            if not np.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite loss {value} at epoch {epoch}, batch {bi}")
            T.zero_grads(params)
            loss.backward()
            adadelta_step(params, state)
            model.apply_constraints()
            total += value
            batches += 1

        val_acc = accuracy(model, val_set, config.batch_size) if val_set is not None else None
        result.log.append(EpochRecord(epoch, total / batches, val_acc))

        if val_set is not None:
            if val_acc > best_acc:
                best_acc = val_acc
                best_snapshot = {name: p.data.copy() for name, p in params.items()}
                result.best_val_accuracy = val_acc
                result.best_epoch = epoch
                stale = 0
            else:
                stale += 1
                if config.patience is not None and stale >= config.patience:
                    result.stopped_early = True
                    break

    if best_snapshot is not None:
        for name, p in params.items():
            p.data[...] = best_snapshot[name]
    return result
