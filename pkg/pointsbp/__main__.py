"""Run the pointsbp command line."""
import sys

from .cli import main

sys.exit(main())
