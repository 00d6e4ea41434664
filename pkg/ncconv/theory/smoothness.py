"""
Side-by-side training trace of two models fed identical batches: per-step
input-gradient norms at every conv layer and the loss change each update
causes on its own batch. Observational only; nothing here passes or fails.
"""
import logging
from typing import Dict, List, Tuple

import numpy as np

from ..core.tensor import Tensor
from ..data.datasets import batches, normalize_batch
from ..data_types import Dataset, GradNormTrace, TrainConfig
from ..network.loss import cross_entropy
from ..network.model import Model
from ..network.optim import SGD
from ..network.train import shuffle_seed

logger = logging.getLogger(__name__)


def _step(model: Model, optimizer: SGD, images: Tensor, labels: Tensor) -> Tuple[float, float, List[float]]:
    """
    One SGD step; returns the loss before and after the update on the same
    batch and the conv input-gradient norms.
    """
    loss, grad = cross_entropy(model.forward(images), labels)
    model.backward(grad)
    norms = [conv.input_grad_norm for conv in model.conv_layers()]
    optimizer.step(model.params(), model.grads())
    loss_after, _ = cross_entropy(model.forward(images), labels)
    return loss, loss_after, norms


def measure_grad_norm_reduction(
        model_pair: Tuple[Model, Model],
        data: Dataset,
        steps: int,
        cfg: TrainConfig,
        labels: Tuple[str, str] = ("a", "b"),
) -> GradNormTrace:
    """
    Trains both models for `steps` SGD steps at cfg.lr on the same batch
    sequence. Row t holds each model's loss on batch t, |L_after - L_before|
    for the update taken on that batch, and conv-layer input-gradient norms.
    """
    trace = GradNormTrace(labels=labels)
    optimizers = [SGD(cfg.lr, cfg.momentum, cfg.weight_decay) for _ in model_pair]
    step = 0
    epoch = 0
    while step < steps and len(data):
        for _, (images, batch_labels) in batches(data, cfg.batch_size, shuffle_seed(cfg, epoch)):
            if step >= steps:
                break
            row: Dict[str, float] = {"step": float(step)}
            for model, optimizer, label in zip(model_pair, optimizers, labels):
                loss, loss_after, norms = _step(
                    model, optimizer, normalize_batch(images, data, model.dtype), batch_labels,
                )
                row[f"{label}_loss"] = loss
                row[f"{label}_loss_change"] = abs(loss_after - loss)
                for index, norm in enumerate(norms):
                    row[f"{label}_conv{index}_grad_norm"] = norm
                row[f"{label}_mean_grad_norm"] = float(np.mean(norms)) if norms else 0.0
            trace.rows.append(row)
            step += 1
        epoch += 1
    logger.info("traced %d steps for %s vs %s", len(trace.rows), *labels)
    return trace
