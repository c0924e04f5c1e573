import logging
import os

from dotenv import load_dotenv

load_dotenv()

# Defaults for the command line; every one can be overridden by a flag.
OUT_DIR = os.getenv("PAIRRANK_OUT_DIR", "out")
SEED = int(os.getenv("PAIRRANK_SEED", "20240101"))
THREADS = int(os.getenv("PAIRRANK_THREADS", str(os.cpu_count() or 1)))
LOG_LEVEL = os.getenv("PAIRRANK_LOG_LEVEL", "INFO")

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def configure_logging(level: str = LOG_LEVEL) -> None:
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT, force=True)
