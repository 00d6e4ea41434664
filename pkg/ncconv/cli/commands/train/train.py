import dataclasses
import logging
import math
import os
from typing import Any, Dict, List, Optional

from ...utils.config import to_json
from ...utils.file_util import calculate_checksum, checkpoint_path, clear_checkpoints, latest_checkpoint, should_resume
from ...utils.metrics_io import MetricsWriter, StepWriter, truncate_csv, write_json
from ...utils.runtime import EXIT_FAILED, EXIT_OK, build_model, input_shape_of, load_datasets, prepare_run
from ....data_types import MetricsRecord, RunConfig
from ....errors import NonFiniteLossError
from ....network.checkpoint import load_checkpoint, save_checkpoint
from ....network.model import Model
from ....network.optim import SGD
from ....network.train import evaluate, train_epoch

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.csv"
STEPS_FILE = "steps.csv"
SUMMARY_FILE = "summary.json"


def _resume_epoch(config: RunConfig, model: Model, checksum: str) -> int:
    """
    Completed epochs restored from the latest checkpoint written under this
    config, or 0 when there is none.
    """
    path = latest_checkpoint(config.output_dir, checksum)
    if path is None:
        return 0
    info = load_checkpoint(model, path)
    if config.train.momentum > 0:
        logger.warning("momentum buffers are not checkpointed; the resumed run restarts them at zero")
    return min(info.epoch, config.train.epochs)


def _summary(
        config: RunConfig,
        model: Model,
        history: List[MetricsRecord],
        status: str,
        error: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    chance = math.log(config.model.num_classes)
    last = history[-1] if history else None
    best = min(history, key=lambda r: r.val_loss) if history else None
    return {
        "status": status,
        "model": model.spec.name,
        "parameters": model.parameter_count(),
        "group_counts": model.group_counts(),
        "shortcut": config.model.shortcut,
        "epochs_completed": last.epoch + 1 if last else 0,
        "chance_loss": chance,
        "final": dataclasses.asdict(last) if last else None,
        "final_val_top1_error": last.val_top1_error if last else None,
        "final_val_top5_error": last.val_top5_error if last else None,
        "best_val_loss": best.val_loss if best else None,
        "best_epoch": best.epoch if best else None,
        "below_chance": bool(last and last.val_loss < chance),
        "error": error,
    }


def cmd_train(config: RunConfig) -> int:
    out = config.output_dir
    metrics_path = os.path.join(out, METRICS_FILE)
    steps_path = os.path.join(out, STEPS_FILE)

    # compared before prepare_run overwrites resolved_config.json
    checksum = calculate_checksum([to_json(config)])
    can_resume = config.train.resume and should_resume(out, checksum)
    prepare_run(config)

    train_ds, val_ds = load_datasets(config)
    model = build_model(config, input_shape_of(train_ds))
    steps_per_epoch = math.ceil(len(train_ds) / config.train.batch_size)

    start_epoch = _resume_epoch(config, model, checksum) if can_resume else 0
    if start_epoch:
        truncate_csv(metrics_path, start_epoch)
        truncate_csv(steps_path, start_epoch * steps_per_epoch)
        logger.info("resuming %s at epoch %d", out, start_epoch)
    else:
        for path in (metrics_path, steps_path):
            if os.access(path, os.F_OK):
                os.remove(path)
        # checkpoints of an earlier run must not be picked up by resume or eval
        clear_checkpoints(out)

    metrics = MetricsWriter(metrics_path)
    steps = StepWriter(steps_path)
    optimizer = SGD(config.train.lr, config.train.momentum, config.train.weight_decay)
    history: List[MetricsRecord] = []

    """
    One epoch of SGD, validation, then a checkpoint holding the completed count.
    """
    for epoch in range(start_epoch, config.train.epochs):
        try:
            record = train_epoch(
                model,
                train_ds,
                config.train,
                epoch=epoch,
                optimizer=optimizer,
                step_offset=epoch * steps_per_epoch,
                deterministic=config.deterministic,
                on_step=steps.write,
            )
        except NonFiniteLossError as e:
            logger.error("%s", e)
            write_json(os.path.join(out, SUMMARY_FILE), _summary(
                config, model, history, "non_finite_loss",
                {"message": str(e), "grad_norms": e.grad_norms},
            ))
            return EXIT_FAILED

        val = evaluate(model, val_ds, epoch=epoch)
        record = dataclasses.replace(
            record,
            val_loss=val.val_loss,
            val_top1=val.val_top1,
            val_top5=val.val_top5,
        )
        metrics.write(record)
        history.append(record)
        save_checkpoint(model, checkpoint_path(out, epoch + 1), epoch + 1, checksum)
        print(f"epoch {epoch}: train loss {record.train_loss:.4f}, val loss {record.val_loss:.4f}, "
              f"val top-1 {record.val_top1:.4f}, top-5 {record.val_top5:.4f}")

    write_json(os.path.join(out, SUMMARY_FILE), _summary(config, model, history, "completed"))
    return EXIT_OK
