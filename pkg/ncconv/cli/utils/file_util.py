import hashlib
import json
import os
import re
import shutil
from typing import List, Optional

from ...errors import CheckpointError
from ...network.checkpoint import read_checkpoint_info

CHECKPOINT_DIR = "checkpoints"
RESOLVED_CONFIG = "resolved_config.json"
EVAL_CONFIG = "eval_config.json"
COMPARE_CONFIG = "compare_config.json"


def get_file_name(
        input_str: str,
        delimiter: str = ".",
        extension: str = ".json",
) -> str:
    last_delimiter_index = input_str.rfind(delimiter)
    if last_delimiter_index == -1:
        # delimiter not found in string
        return input_str + extension
    else:
        return input_str[:last_delimiter_index] + extension


def checkpoint_path(
        output_dir: str,
        epoch: int,
) -> str:
    return os.path.join(output_dir, CHECKPOINT_DIR, f"epoch_{epoch:03d}.ckpt")


def latest_checkpoint(output_dir: str, config_checksum: Optional[str] = None) -> Optional[str]:
    """
    Highest-numbered checkpoint in the output directory. With a checksum,
    checkpoints written under another config (or unreadable ones) are skipped.
    """
    directory = os.path.join(output_dir, CHECKPOINT_DIR)
    if not os.access(directory, os.F_OK):
        return None
    found = sorted(name for name in os.listdir(directory) if re.fullmatch(r"epoch_\d+\.ckpt", name))
    for name in reversed(found):
        path = os.path.join(directory, name)
        if config_checksum is None:
            return path
        try:
            if read_checkpoint_info(path).config_checksum == config_checksum:
                return path
        except CheckpointError:
            continue
    return None


def clear_checkpoints(output_dir: str) -> None:
    directory = os.path.join(output_dir, CHECKPOINT_DIR)
    if os.access(directory, os.F_OK):
        shutil.rmtree(directory)


def calculate_checksum(contents: List[str]) -> str:
    """
    Calculates the checksum of a list of strings
    """
    checksums = []
    for content in contents:
        checksum = hashlib.md5(content.encode("utf-8")).hexdigest()
        checksums.append(checksum)
    concatenated_checksum = "".join(checksums)
    final_checksum = hashlib.md5(concatenated_checksum.encode("utf-8")).hexdigest()
    return final_checksum


def write_resolved_config(output_dir: str, config_json: str, file_name: str = RESOLVED_CONFIG) -> str:
    """
    Writes the resolved config and returns its checksum.
    """
    os.makedirs(output_dir, exist_ok=True)
    with open(os.path.join(output_dir, file_name), "w", encoding="utf-8") as f:
        f.write(config_json + "\n")
    return calculate_checksum([config_json])


def recorded_checksum(output_dir: str) -> Optional[str]:
    """
    Checksum of the resolved_config.json a previous run left in the output
    directory, or None when there is none.
    """
    json_path = os.path.join(output_dir, RESOLVED_CONFIG)
    if not os.access(json_path, os.F_OK):
        return None
    with open(json_path, "r", encoding="utf-8") as f:
        file_contents = f.read()
    return calculate_checksum([json.dumps(json.loads(file_contents), indent=2, sort_keys=True)])


def should_resume(
        output_dir: str,
        new_checksum: str,
) -> bool:
    """
    Checks if a resolved_config.json exists in the output directory.
    If it does, compares the checksums to see if the run there can be
    continued or has to start over.
    """
    old_checksum = recorded_checksum(output_dir)

    if old_checksum is not None:
        if old_checksum == new_checksum:
            print(f"Resuming {output_dir} because its config has not changed")
            return True
        else:
            print(f"Restarting {output_dir} because its config has changed")
            return False

    # if no previous run then start fresh
    return False
