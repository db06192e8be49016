"""
Project configuration module.

Loads settings from environment variables (or a .env file), exposes them as
module-level constants and initialises the shared logger.
"""

import os
import logging
from dotenv import load_dotenv

# Load a .env file from the project root when one exists
load_dotenv()

# --- Logger initialisation ---

# One named logger used across the whole package
logger = logging.getLogger("mrr")

# Avoid duplicate handlers when the module is re-imported
if not logger.handlers:
    handler = logging.StreamHandler()
    # time - level - logger name: message
    fmt = logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
    handler.setFormatter(fmt)
    logger.addHandler(handler)

logger.setLevel(os.getenv("MRR_LOG_LEVEL", "INFO").upper())


def _int_env(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        return int(raw)
    except ValueError:
        logger.warning("Ignoring %s=%r (not an integer); using %d.", name, raw, default)
        return default


# --- Global constants ---

TOOL_VERSION = "0.1.0"

# Default worker count for BFS expansion and sampled consecution
DEFAULT_THREADS = max(1, _int_env("MRR_THREADS", 1))

# Default reachable-state budget for `check`
DEFAULT_MAX_STATES = _int_env("MRR_MAX_STATES", 20_000_000)

# Largest candidate space the exhaustive consecution check will enumerate
EXHAUSTIVE_BUDGET = _int_env("MRR_EXHAUSTIVE_BUDGET", 5_000_000)

# Run ledger
DATABASE_URL = os.getenv("MRR_DATABASE_URL", "")
RECORD_RUNS = os.getenv("MRR_RECORD_RUNS", "0").strip() == "1"
