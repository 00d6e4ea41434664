from typing import Tuple

import numpy as np

from ..core.tensor import Tensor
from ..errors import DimensionError, LabelError


def _check_labels(logits: Tensor, labels: Tensor) -> None:
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise DimensionError(f"logits {tuple(logits.shape)} and labels {tuple(labels.shape)} do not pair up")
    if labels.size and (labels.min() < 0 or labels.max() >= logits.shape[1]):
        raise LabelError(f"labels must lie in [0, {logits.shape[1]}), got range "
                         f"[{labels.min()}, {labels.max()}]")


def log_softmax(logits: Tensor) -> Tensor:
    shifted = logits - logits.max(axis=1, keepdims=True)
    result: Tensor = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return result


def cross_entropy_per_sample(logits: Tensor, labels: Tensor) -> Tensor:
    _check_labels(logits, labels)
    result: Tensor = -log_softmax(logits)[np.arange(logits.shape[0]), labels]
    return result


def cross_entropy(logits: Tensor, labels: Tensor) -> Tuple[float, Tensor]:
    """
    Mean softmax cross-entropy and its gradient w.r.t. the logits.
    """
    log_probs = log_softmax(logits)
    losses = cross_entropy_per_sample(logits, labels)
    n = logits.shape[0]
    grad = np.exp(log_probs)
    grad[np.arange(n), labels] -= 1.0
    return float(losses.mean()), grad / n


def squared_error(pred: Tensor, target: Tensor) -> Tuple[float, Tensor]:
    """
    0.5 * sum((pred - target)^2) / N over the leading axis.
    """
    if pred.shape != target.shape:
        raise DimensionError(f"prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ")
    n = pred.shape[0]
    diff = pred - target
    return float(0.5 * np.sum(diff * diff) / n), diff / n


def topk_correct(logits: Tensor, labels: Tensor, k: int) -> Tensor:
    k = min(k, logits.shape[1])
    top = np.argsort(-logits, axis=1, kind="stable")[:, :k]
    result: Tensor = (top == labels[:, np.newaxis]).any(axis=1)
    return result
