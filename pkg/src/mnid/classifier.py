"""Multinomial logistic (softmax) regression over fixed embeddings.

This is the trainable classifier the pipeline retrains as labels accrue; it
produces the per-point confidence scores that drive silver/gold selection.
Training is full-batch gradient descent with step-halving backtracking, so the
loss is non-increasing across accepted steps and the result is deterministic
(examples are processed in sorted-id order regardless of pool insertion
order).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import LabeledPool
from .errors import DegenerateLabels, NonFiniteLoss, UnknownPoint
from .ingest import EmbeddingMatrix

_MIN_STEP = 1e-12


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 200
    l2_penalty: float = 1e-4
    early_stop_patience: int = 20
    seed: int = 0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be non-negative")


@dataclass
class SoftmaxModel:
    """Fitted weights plus the vocabulary indices its output axis maps to."""

    weights: np.ndarray  # (C, d)
    bias: np.ndarray  # (C,)
    classes: tuple[int, ...]  # sorted vocabulary indices

    def __post_init__(self) -> None:
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise NonFiniteLoss("model parameters are not finite")


@dataclass
class Prediction:
    predicted: int  # vocabulary index
    confidence: float  # max softmax probability
    probabilities: np.ndarray  # over model.classes


@dataclass
class ConfidenceTable:
    classes: tuple[int, ...]
    entries: dict[str, Prediction] = field(default_factory=dict)

    def confidence(self, point_id: str) -> float:
        return self.entries[point_id].confidence

    def predicted(self, point_id: str) -> int:
        return self.entries[point_id].predicted

    def ids(self) -> list[str]:
        return list(self.entries)


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def loss_gradient(
    weights: np.ndarray,
    bias: np.ndarray,
    x: np.ndarray,
    y: np.ndarray,
    l2_penalty: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """L2-regularized mean cross-entropy and its analytic gradient.

    ``y`` holds dense class positions in [0, C). The regularizer is
    0.5 * l2 * ||W||^2 (bias unpenalized).
    """
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty batch")
    probs = _softmax(x @ weights.T + bias)
    log_true = np.log(np.clip(probs[np.arange(n), y], 1e-300, None))
    loss = -float(log_true.mean()) + 0.5 * l2_penalty * float(np.sum(weights**2))
    dlogits = probs
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    grad_w = dlogits.T @ x + l2_penalty * weights
    grad_b = dlogits.sum(axis=0)
    return loss, grad_w, grad_b


def train(pool: LabeledPool, x: EmbeddingMatrix, cfg: TrainConfig) -> SoftmaxModel:
    """Fit a softmax model on every entry of ``pool`` (silver included)."""
    cfg.validate()
    ids = sorted(pool.ids())
    for point_id in ids:
        if not x.has(point_id):
            raise UnknownPoint(f"no embedding row for {point_id!r}")
    classes = tuple(sorted({pool.get(i).label for i in ids}))
    if len(classes) < 2:
        raise DegenerateLabels(f"training needs >= 2 classes, got {len(classes)}")
    position = {label: k for k, label in enumerate(classes)}

    xb = x.rows(ids).astype(np.float64)
    yb = np.array([position[pool.get(i).label] for i in ids], dtype=np.intp)

    weights = np.zeros((len(classes), xb.shape[1]))
    bias = np.zeros(len(classes))
    step = cfg.learning_rate
    loss, grad_w, grad_b = loss_gradient(weights, bias, xb, yb, cfg.l2_penalty)
    best = loss
    stale = 0
    for _ in range(cfg.epochs):
        # Halve the step until it does not increase the loss; keep the
        # shrunken step for later epochs (plain, deterministic descent).
        while step > _MIN_STEP:
            cand_w = weights - step * grad_w
            cand_b = bias - step * grad_b
            cand_loss, cand_gw, cand_gb = loss_gradient(
                cand_w, cand_b, xb, yb, cfg.l2_penalty
            )
            if not np.isfinite(cand_loss):
                raise NonFiniteLoss("training loss diverged")
            if cand_loss <= loss:
                break
            step /= 2.0
        if step <= _MIN_STEP:
            break
        weights, bias = cand_w, cand_b
        loss, grad_w, grad_b = cand_loss, cand_gw, cand_gb
        if loss < best:
            best = loss
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop_patience:
                break
    return SoftmaxModel(weights=weights, bias=bias, classes=classes)


def predict(model: SoftmaxModel, ids: list[str], x: EmbeddingMatrix) -> ConfidenceTable:
    """Probabilities, argmax class and confidence for each id.

    Argmax ties resolve to the lowest vocabulary index (model classes are
    sorted, so the first maximal position wins).
    """
    table = ConfidenceTable(classes=model.classes)
    if not ids:
        return table
    for point_id in ids:
        if not x.has(point_id):
            raise UnknownPoint(f"no embedding row for {point_id!r}")
    probs = _softmax(x.rows(ids).astype(np.float64) @ model.weights.T + model.bias)
    winners = np.argmax(probs, axis=1)
    for row, point_id in enumerate(ids):
        table.entries[point_id] = Prediction(
            predicted=model.classes[winners[row]],
            confidence=float(probs[row, winners[row]]),
            probabilities=probs[row],
        )
    return table
