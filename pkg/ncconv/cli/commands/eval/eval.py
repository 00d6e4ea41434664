import logging
import os

from ...utils.file_util import EVAL_CONFIG, get_file_name, latest_checkpoint, recorded_checksum
from ...utils.metrics_io import write_json
from ...utils.runtime import EXIT_OK, build_model, input_shape_of, load_datasets, prepare_run
from ....data_types import RunConfig
from ....errors import CheckpointError
from ....network.checkpoint import load_checkpoint
from ....network.train import evaluate

logger = logging.getLogger(__name__)


def cmd_eval(config: RunConfig) -> int:
    # the training run's resolved_config.json stays in place; it names the run the checkpoints belong to
    run_checksum = recorded_checksum(config.output_dir)
    prepare_run(config, config_file=EVAL_CONFIG)
    checkpoint = config.eval.checkpoint or latest_checkpoint(config.output_dir, run_checksum)
    if not checkpoint:
        raise CheckpointError(f"no checkpoint given and none of this run's found under {config.output_dir}")

    _, val_ds = load_datasets(config)
    model = build_model(config, input_shape_of(val_ds))
    info = load_checkpoint(model, checkpoint)
    record = evaluate(model, val_ds, epoch=info.epoch - 1)

    report = {
        "checkpoint": checkpoint,
        "epochs_trained": info.epoch,
        "samples": len(val_ds),
        "val_loss": record.val_loss,
        "top1_accuracy": record.val_top1,
        "top5_accuracy": record.val_top5,
        "top1_error": record.val_top1_error,
        "top5_error": record.val_top5_error,
    }
    write_json(os.path.join(config.output_dir, get_file_name(os.path.basename(checkpoint), extension=".eval.json")), report)
    print(f"{checkpoint}: loss {record.val_loss:.4f}, "
          f"top-1 acc {record.val_top1:.4f} (error {record.val_top1_error:.4f}), "
          f"top-5 acc {record.val_top5:.4f} (error {record.val_top5_error:.4f})")
    return EXIT_OK
