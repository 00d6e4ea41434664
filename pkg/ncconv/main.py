import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

from .cli.commands.bench.bench import cmd_bench
from .cli.commands.compare.compare import cmd_compare
from .cli.commands.eval.eval import cmd_eval
from .cli.commands.gradcheck.gradcheck import cmd_gradcheck
from .cli.commands.train.train import cmd_train
from .cli.commands.verify_theory.verify_theory import cmd_verify_theory
from .cli.utils.config import load_run_config
from .cli.utils.runtime import EXIT_FAILED, EXIT_USAGE
from .data_types import RunConfig
from .errors import CheckpointError, ConfigError, DataFormatError, NcConvError, ShapeError

logger = logging.getLogger(__name__)

COMMANDS: Dict[str, Callable[[RunConfig], int]] = {
    "gradcheck": cmd_gradcheck,
    "verify-theory": cmd_verify_theory,
    "train": cmd_train,
    "eval": cmd_eval,
    "bench": cmd_bench,
    "compare": cmd_compare,
}


def parse_args(argv: Optional[List[str]]) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="ncconv", description="Normalized Convolution experiments")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON run config")
    parser.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    parser.add_argument("--out", default=None, help="overrides the config output_dir")
    return parser.parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else 0

    try:
        config = load_run_config(args.config, seed=args.seed, output_dir=args.out)
        return COMMANDS[args.command](config)
    except (ConfigError, DataFormatError, CheckpointError, ShapeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except NcConvError as e:
        logger.exception("%s failed", args.command)
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == '__main__':
    sys.exit(main())
