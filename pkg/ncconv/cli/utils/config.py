"""
JSON run configuration. Unknown keys and ill-typed values are rejected with
the dotted path of the offending key.
"""
import dataclasses
import json
import os
from typing import Any, Dict, List, Literal, Optional, Type, TypeVar, Union, get_args, get_origin, get_type_hints

from ...data_types import RunConfig
from ...errors import ConfigError

T = TypeVar('T')

DATA_DIR_ENV = "NCCONV_DATA_DIR"


def _coerce(value: Any, hint: Any, key: str) -> Any:
    origin = get_origin(hint)
    if dataclasses.is_dataclass(hint) and isinstance(hint, type):
        if not isinstance(value, dict):
            raise ConfigError(f"{key}: expected an object, got {type(value).__name__}")
        return from_dict(hint, value, key)
    if origin is Literal:
        if value not in get_args(hint):
            raise ConfigError(f"{key}: {value!r} is not one of {list(get_args(hint))}")
        return value
    if origin in (list, List):
        if not isinstance(value, list):
            raise ConfigError(f"{key}: expected a list, got {type(value).__name__}")
        (item_hint,) = get_args(hint)
        return [_coerce(item, item_hint, f"{key}[{i}]") for i, item in enumerate(value)]
    if origin in (tuple,):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{key}: expected a list, got {type(value).__name__}")
        return tuple(value)
    if origin is Union:
        options = [arg for arg in get_args(hint) if arg is not type(None)]
        if value is None:
            return None
        return _coerce(value, options[0], key)
    if hint is bool:
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: expected true/false, got {value!r}")
        return value
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {value!r}")
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected a string, got {value!r}")
        return value
    return value


def from_dict(cls: Type[T], data: Dict[str, Any], prefix: str = "") -> T:
    hints = get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}  # type: ignore[arg-type]
    unknown = sorted(set(data) - names)
    if unknown:
        where = f"{prefix}." if prefix else ""
        raise ConfigError(f"unknown config key(s): {', '.join(where + k for k in unknown)}")
    kwargs = {
        name: _coerce(value, hints[name], f"{prefix}.{name}" if prefix else name)
        for name, value in data.items()
    }
    return cls(**kwargs)


def validate(config: RunConfig) -> None:
    train = config.train
    positive = {
        "train.batch_size": train.batch_size,
        "train.lr_decay_every": train.lr_decay_every,
        "threads": config.threads,
        "bench.repeats": config.bench.repeats,
        "bench.batch": config.bench.batch,
        "theory.instances": config.theory.instances,
    }
    for key, value in positive.items():
        if value < 1:
            raise ConfigError(f"{key} must be positive, got {value}")
    non_negative = {
        "train.lr": train.lr,
        "train.epochs": train.epochs,
        "train.momentum": train.momentum,
        "train.weight_decay": train.weight_decay,
        "train.lr_decay_factor": train.lr_decay_factor,
    }
    for key, value in non_negative.items():
        if value < 0:
            raise ConfigError(f"{key} must be non-negative, got {value}")
    if config.model.num_groups < -1:
        raise ConfigError(f"model.num_groups must be -1 (one per channel), 0 (default rule) or positive, "
                          f"got {config.model.num_groups}")
    if not 0.0 <= train.augment.shift_frac < 1.0:
        raise ConfigError(f"train.augment.shift_frac must lie in [0, 1), got {train.augment.shift_frac}")


def load_run_config(
        path: str,
        seed: Optional[int] = None,
        output_dir: Optional[str] = None,
) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")

    config = from_dict(RunConfig, raw)
    if output_dir is not None:
        config.output_dir = output_dir
    if seed is not None:
        # --seed reseeds the whole run, including a train.seed pinned in the file
        config.seed = seed
        config.train.seed = seed
    elif "seed" not in raw.get("train", {}):
        config.train.seed = config.seed
    if not config.data.path:
        config.data.path = os.environ.get(DATA_DIR_ENV, "")
    validate(config)
    return config


def to_json(config: RunConfig) -> str:
    return json.dumps(dataclasses.asdict(config), indent=2, sort_keys=True)
