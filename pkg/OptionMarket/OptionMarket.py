"""
OptionMarket - two-settlement electricity market with cash-settled call options

Command-line entry point. Every subcommand takes an experiment file (JSON, or
YAML for .yaml/.yml), runs one pipeline and writes CSV artifacts under the
output directory. Exit codes: 0 success, 2 configuration error, 3 numerical
failure, 4 infeasible dispatch.
"""

import sys
import logging
from typing import List, Optional

from colorama import init as colorama_init

from core.utils.config import DEBUG_MODE, describe

# Set up basic logging configuration
logging.basicConfig(level=logging.DEBUG if DEBUG_MODE else logging.INFO,
                    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')

# Import commands package
import commands

from core.utils.version import TOOL_VERSION


def main(argv: Optional[List[str]] = None) -> int:
    colorama_init()
    registry = commands.init()
    parser = registry.build_parser()
    parser.add_argument('--version', action='version', version=f'OptionMarket {TOOL_VERSION}')

    args = parser.parse_args(argv)
    if args.debug:
        logging.getLogger().setLevel(logging.DEBUG)
    logging.getLogger(__name__).debug(f"Settings: {describe()}")

    print(f"🔧 OptionMarket {TOOL_VERSION}: {args.command} {args.config}")
    try:
        return args.handler(args)
    finally:
        commands.cleanup()


if __name__ == "__main__":
    sys.exit(main())
