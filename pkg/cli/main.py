"""
PICNIQ CLI Main Application
Parses arguments, configures logging and maps failures to exit codes:
0 success, 1 usage or configuration error, 2 data or domain error.
"""

import argparse
import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError
from pythonjsonlogger import jsonlogger

from cli import __version__
from cli.commands import evaluate, infer, scale, simulate, train
from cli.config import ConfigError, Settings, settings as default_settings
from picniq.errors import PicniqError


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

TEXT_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
JSON_FORMAT = "%(asctime)s %(name)s %(levelname)s %(message)s"


class PicniqArgumentParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def configure_logging(settings: Settings) -> None:
    """Install one stderr handler on the root logger, text or JSON per LOG_FORMAT."""
    handler = logging.StreamHandler(sys.stderr)
    if settings.LOG_FORMAT == "json":
        handler.setFormatter(jsonlogger.JsonFormatter(JSON_FORMAT))
    else:
        handler.setFormatter(logging.Formatter(TEXT_FORMAT))
    root = logging.getLogger()
    for existing in list(root.handlers):
        root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(settings.LOG_LEVEL.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = PicniqArgumentParser(
        prog="picniq",
        description="Pairwise image comparison toolkit: scaling, comparator training and evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=PicniqArgumentParser)
    subparsers.required = True

    # One module per command group
    scale.register(subparsers)
    train.register(subparsers)
    infer.register(subparsers)
    evaluate.register(subparsers)
    simulate.register(subparsers)
    return parser


def main(argv: Optional[Sequence[str]] = None, settings: Optional[Settings] = None) -> int:
    """
    Run one command.

    Returns:
        Process exit code
    """
    settings = settings or default_settings
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    configure_logging(settings)

    try:
        args.func(args, settings)
        return EXIT_OK
    except PicniqError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValidationError) as e:
        logger.error(f"{args.command}: invalid configuration: {e}")
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as e:
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as e:
        logger.error(f"{args.command}: invalid parameters: {e}")
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
