"""
Training and evaluation loops.

Per-sample losses are stored by dataset index and averaged at the end of the
epoch, so epoch means do not depend on the shuffle order.
"""
import logging
import time
from typing import Callable, Dict, Optional

import numpy as np

from .loss import cross_entropy, cross_entropy_per_sample, topk_correct
from .model import Model
from .optim import SGD, lr_at_epoch
from ..core.tensor import make_rng
from ..data.augment import augment
from ..data.datasets import batches, normalize_batch
from ..data_types import Dataset, MetricsRecord, StepRecord, TrainConfig
from ..errors import NonFiniteLossError

logger = logging.getLogger(__name__)

StepCallback = Callable[[StepRecord], None]

NAN = float("nan")


def grad_norms(model: Model) -> Dict[str, float]:
    return {name: float(np.linalg.norm(g)) for name, g in model.grads().items()}


def global_grad_norm(model: Model) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(g, dtype=np.float64))) for g in model.grads().values())))


def shuffle_seed(cfg: TrainConfig, epoch: int) -> int:
    return int(make_rng(cfg.seed, epoch, 0).integers(0, 2 ** 63 - 1))


def train_epoch(
        model: Model,
        data: Dataset,
        cfg: TrainConfig,
        epoch: int = 0,
        optimizer: Optional[SGD] = None,
        step_offset: int = 0,
        deterministic: bool = True,
        on_step: Optional[StepCallback] = None,
) -> MetricsRecord:
    """
    One pass of SGD over `data` at the scheduled learning rate for `epoch`.
    Validation fields of the returned record are NaN; see `evaluate`.
    """
    started = time.perf_counter()
    lr = lr_at_epoch(cfg, epoch)
    optimizer = optimizer or SGD(lr, cfg.momentum, cfg.weight_decay)
    optimizer.lr = lr
    augment_rng = make_rng(cfg.seed, epoch, 1)

    losses = np.zeros(len(data), dtype=np.float64)
    correct = np.zeros(len(data), dtype=bool)
    norms = []
    step = step_offset
    for indices, (images, labels) in batches(data, cfg.batch_size, shuffle_seed(cfg, epoch)):
        images = augment(images, augment_rng, cfg.augment)
        logits = model.forward(normalize_batch(images, data, model.dtype))
        loss, grad_logits = cross_entropy(logits, labels)
        model.backward(grad_logits)
        if not np.isfinite(loss):
            raise NonFiniteLossError(f"non-finite loss {loss} at epoch {epoch} step {step}", grad_norms(model))

        norm = global_grad_norm(model)
        optimizer.step(model.params(), model.grads())

        losses[indices] = cross_entropy_per_sample(logits, labels)
        correct[indices] = topk_correct(logits, labels, 1)
        norms.append(norm)
        step += 1
        if on_step is not None:
            on_step(StepRecord(epoch=epoch, step=step, loss=loss, lr=lr, grad_norm=norm))

    record = MetricsRecord(
        epoch=epoch,
        step=step,
        train_loss=float(losses.mean()) if losses.size else 0.0,
        train_acc=float(correct.mean()) if correct.size else 0.0,
        val_loss=NAN,
        val_top1=NAN,
        val_top5=NAN,
        mean_grad_norm=float(np.mean(norms)) if norms else 0.0,
        wall_ms=0.0 if deterministic else (time.perf_counter() - started) * 1000.0,
    )
    logger.info("epoch %d: lr %.4g, train loss %.4f, train acc %.4f",
                epoch, lr, record.train_loss, record.train_acc)
    return record


def evaluate(model: Model, data: Dataset, batch_size: int = 100, epoch: int = -1) -> MetricsRecord:
    """
    Mean cross-entropy, top-1 and top-5 accuracy over `data` (no augmentation).
    """
    losses = np.zeros(len(data), dtype=np.float64)
    top1 = np.zeros(len(data), dtype=bool)
    top5 = np.zeros(len(data), dtype=bool)
    for indices, (images, labels) in batches(data, batch_size):
        logits = model.forward(normalize_batch(images, data, model.dtype))
        losses[indices] = cross_entropy_per_sample(logits, labels)
        top1[indices] = topk_correct(logits, labels, 1)
        top5[indices] = topk_correct(logits, labels, 5)
    count = max(len(data), 1)
    return MetricsRecord(
        epoch=epoch,
        step=0,
        train_loss=NAN,
        train_acc=NAN,
        val_loss=float(losses.sum() / count),
        val_top1=float(top1.sum() / count),
        val_top5=float(top5.sum() / count),
        mean_grad_norm=NAN,
        wall_ms=0.0,
    )
