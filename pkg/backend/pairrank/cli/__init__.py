"""
Command-line surface: `ingest`, `rank`, `path` and `simulate`.

Exit codes: 0 success, 2 input error, 3 numerical failure.
"""

import argparse
import logging
import sys
from typing import List, Optional

from pairrank import __version__
from pairrank.cli.commands import COMMANDS
from pairrank.config import LOG_LEVEL, OUT_DIR, configure_logging
from pairrank.errors import PairRankError
from pairrank.schemas import METHOD_IDS

logger = logging.getLogger(__name__)


def _global_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="RNG seed (simulate)")
    common.add_argument("--threads", type=int, default=None, help="worker cap; default all cores")
    common.add_argument("--out-dir", default=OUT_DIR, help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
    common.add_argument("--log-level", default=LOG_LEVEL, help="DEBUG, INFO, WARNING or ERROR")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="pairrank", description=__doc__.splitlines()[1])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    ingest = sub.add_parser("ingest", parents=[common], help="read a citation matrix or match log")
    ingest.add_argument("input", help="CSV file")
    ingest.add_argument("--input-format", choices=("citations", "matches"), default="citations")
    ingest.add_argument("--labels", help="players file, one label per line (matches only)")

    rank = sub.add_parser("rank", parents=[common], help="score and rank players")
    rank.add_argument("dataset", help="dataset JSON written by ingest")
    rank.add_argument("--methods", help=f"comma separated subset of {','.join(METHOD_IDS)}")
    rank.add_argument("--tie-rule", choices=("weak", "half"), default=None)
    rank.add_argument("--bandwidth", type=float, default=None)
    rank.add_argument("--smoothed-prior", action="store_true", help="KWPR under the smoothed prior")
    rank.add_argument("--grid-size", type=int, default=None, help="NPMLE grid atoms")
    rank.add_argument("--npmle-method", choices=("cnm", "em"), default=None)
    rank.add_argument("--strict", action="store_true", help="fail fast on all-win or all-loss players")

    path = sub.add_parser("path", parents=[common], help="grouped lasso path")
    path.add_argument("dataset", help="dataset JSON written by ingest")
    path.add_argument("--lambdas", help="comma separated increasing lambda values")
    path.add_argument("--grid-size", type=int, default=51, help="size of the default grid")
    path.add_argument("--tol", type=float, default=None)

    simulate = sub.add_parser("simulate", parents=[common], help="Monte Carlo comparison of methods")
    simulate.add_argument("config", nargs="?", help="simulation config JSON")
    simulate.add_argument("--preset", help="name of a shipped preset")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return COMMANDS[args.command](args)
    except PairRankError as exc:
        logger.error("%s failed: %s", args.command, exc.detail)
        print(f"error: {exc.detail}", file=sys.stderr)
        return exc.exit_code
