"""
Entry point of the application.

Running this file dispatches to the command-line interface.
"""

import sys

from cli.main import run

if __name__ == "__main__":
    sys.exit(run())
