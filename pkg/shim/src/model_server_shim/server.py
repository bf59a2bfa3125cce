"""Process entry point: load config, build the app, serve it."""

from __future__ import annotations

import argparse
import logging
import sys

from .app import create_app
from .config import ShimConfig


def serve(config: ShimConfig) -> None:
    """Run the shim until interrupted; logs go to standard error."""
    import uvicorn

    logging.basicConfig(stream=sys.stderr, level=logging.INFO)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")


def console_main() -> None:
    parser = argparse.ArgumentParser(
        prog="model-server-shim",
        description="Serve VQA / NR-IQA / LLM checkpoints behind the "
                    "t2i-eval JSON wire protocol.",
    )
    parser.add_argument("--config", required=True, help="JSON config file")
    args = parser.parse_args()
    try:
        config = ShimConfig.from_file(args.config)
        serve(config)
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"startup error: {exc}", file=sys.stderr)
        sys.exit(1)


if __name__ == "__main__":
    console_main()
