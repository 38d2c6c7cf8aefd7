"""Allow running as `python -m wcp_prior`."""

import sys

from .cli import main

sys.exit(main())
