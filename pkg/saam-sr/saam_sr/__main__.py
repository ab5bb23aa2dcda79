"""Entry point for python -m saam_sr."""

import sys

from .cli import main

if __name__ == "__main__":
    sys.exit(main())
