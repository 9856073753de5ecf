"""
Command line interface for geolift.
"""

import argparse
import logging
import sys
from typing import Callable, Dict, List, Optional

from . import __version__
from .config import ConfigLoader
from .errors import exit_code_for
from .manifold import GraphRule
from .pipeline import GeoliftPipeline

COMMANDS: Dict[str, Callable[[GeoliftPipeline], object]] = {
    "simulate": GeoliftPipeline.simulate,
    "embed": GeoliftPipeline.embed,
    "isomap": GeoliftPipeline.run_isomap,
    "evaluate": GeoliftPipeline.evaluate,
    "pipeline": GeoliftPipeline.run,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="geolift",
        description="Recover latent positions from a similarity matrix by spectral embedding "
        "and Isomap",
    )
    parser.add_argument("command", choices=list(COMMANDS), help="Stage to run")
    parser.add_argument("--config", required=True, help="Path to the JSON run configuration")
    parser.add_argument("--threads", type=int, help="Cap on worker threads (overrides config)")
    parser.add_argument("--out", help="Output directory (overrides config)")
    parser.add_argument(
        "--epsilon-quantile",
        type=float,
        help="Build the Isomap graph with the given quantile of pairwise distances",
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="Log stage decisions")
    verbosity.add_argument("--debug", action="store_true", help="Log numeric detail")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    return parser


def main(argv: Optional[List[str]] = None) -> None:
    """Main entry point for the CLI."""
    args = build_parser().parse_args(argv)

    level = logging.DEBUG if args.debug else logging.INFO if args.verbose else logging.WARNING
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )

    try:
        config = ConfigLoader(args.config).config
        rule = None
        if args.epsilon_quantile is not None:
            rule = GraphRule.epsilon_quantile(args.epsilon_quantile)
        config = config.with_overrides(output_dir=args.out, threads=args.threads, rule=rule)
        pipeline = GeoliftPipeline(config)
        COMMANDS[args.command](pipeline)
        print(f"✅ {args.command} completed successfully!")
    except Exception as e:
        print(f"❌ Error running {args.command}: {e}", file=sys.stderr)
        sys.exit(exit_code_for(e))


if __name__ == "__main__":
    main()
