import logging
import os
from typing import Tuple

from .config import to_json
from .file_util import RESOLVED_CONFIG, write_resolved_config
from .logging_util import configure_logging
from ...core.parallel import set_num_threads
from ...core.tensor import make_rng, resolve_dtype
from ...data.datasets import subset, synth_classification, take
from ...data.loaders import load_cifar10, load_mnist_idx
from ...data_types import Dataset, RunConfig
from ...errors import ConfigError
from ...network.model import Model, build
from ...network.presets import spec_from_section

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2


def prepare_run(config: RunConfig, write_outputs: bool = True, config_file: str = RESOLVED_CONFIG) -> str:
    """
    Configures logging and intra-op threads, writes the resolved config and
    returns its checksum.
    """
    config_json = to_json(config)
    log_file = None
    checksum = ""
    if write_outputs:
        os.makedirs(config.output_dir, exist_ok=True)
        log_file = os.path.join(config.output_dir, "run.log")
    configure_logging(config.log_level, log_file)
    if write_outputs:
        checksum = write_resolved_config(config.output_dir, config_json, config_file)
    set_num_threads(config.threads)
    logger.info("run seed %d, dtype %s, %d thread(s), output %s",
                config.seed, config.dtype, config.threads, config.output_dir)
    return checksum


def load_datasets(config: RunConfig) -> Tuple[Dataset, Dataset]:
    """
    Train and validation sets per the data section, class-balanced subsets
    drawn with the run seed.
    """
    data = config.data
    if data.dataset == "synth":
        if len(data.synth_shape) != 3:
            raise ConfigError(f"data.synth_shape needs 3 extents, got {data.synth_shape}")
        shape = (data.synth_shape[0], data.synth_shape[1], data.synth_shape[2])
        rng = make_rng(config.seed, 7)
        classes = config.model.num_classes
        full = synth_classification(data.synth_train + data.synth_val, classes, shape, rng, data.synth_separable)
        order = make_rng(config.seed, 8).permutation(len(full))
        train_ds = take(full, order[:data.synth_train], f"{full.name}-train")
        val_ds = take(full, order[data.synth_train:], f"{full.name}-val")
        return train_ds, val_ds

    if not data.path or not os.access(data.path, os.F_OK):
        raise ConfigError(f"dataset directory {data.path!r} does not exist (set data.path or NCCONV_DATA_DIR)")
    loader = load_cifar10 if data.dataset == "cifar10" else load_mnist_idx
    train_full, test_full = loader(data.path, data.normalize_inputs)
    return (
        subset(train_full, data.train_per_class, config.seed),
        subset(test_full, data.val_per_class, config.seed + 1),
    )


def build_model(config: RunConfig, input_shape: Tuple[int, int, int]) -> Model:
    spec = spec_from_section(config.model, input_shape)
    return build(spec, make_rng(config.seed, 3), resolve_dtype(config.dtype), config.model.epsilon)


def input_shape_of(ds: Dataset) -> Tuple[int, int, int]:
    _, c, h, w = ds.images.shape
    return int(c), int(h), int(w)
