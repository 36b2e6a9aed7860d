import argparse
import sys
from typing import List, Optional

from src.config.run_config import COMMANDS, load_config
from src.config.settings import settings
from src.runner import EXIT_USAGE, run_command
from src.utils.errors import ConfigError
from src.utils.logger import setup_logger

logger = setup_logger(__name__)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the tool's usage code"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="subeig",
        description="First eigenpair of the subelliptic p-Laplacian on Hormander frames"
    )
    parser.add_argument("command", choices=COMMANDS, help="What to run")
    parser.add_argument("config", help="Path to the JSON run configuration")
    parser.add_argument("--output", "-o", help="Output directory (overrides output.directory)")
    parser.add_argument("--log-level", help=f"Logging level (default {settings.LOG_LEVEL})")
    parser.add_argument("--version", action="version", version=f"{settings.TOOL_NAME} {settings.VERSION}")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Parse arguments, load the configuration and run one command"""
    args = build_parser().parse_args(argv)
    if args.log_level:
        setup_logger(__name__, args.log_level)

    logger.info(f"{settings.TOOL_NAME} v{settings.VERSION}: {args.command} {args.config}")

    try:
        cfg = load_config(args.config)
    except ConfigError as e:
        logger.error(str(e))
        return EXIT_USAGE

    return run_command(args.command, cfg, args.output)


if __name__ == "__main__":
    sys.exit(main())
