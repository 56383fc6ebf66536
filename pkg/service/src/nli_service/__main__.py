"""Entry point: `python -m nli_service [--config FILE]`.

Settings merge as defaults < config file < NLI_SERVICE_* environment
variables.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .app import serve
from .config import load_config


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nli-service",
        description="Serve a three-way NLI classifier over HTTP.",
    )
    parser.add_argument("--config", help="path to a JSON config file")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    try:
        config = load_config(args.config)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    serve(config)
    return 0


if __name__ == "__main__":
    sys.exit(main())
