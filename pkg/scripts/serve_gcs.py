"""Serve the ground-control HTTP/WebSocket API over a free-running
simulated fleet.  Equivalent to the `aeroswarm-gcs` console script.
"""

import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from aeroswarm.gcs import main

if __name__ == "__main__":
    raise SystemExit(main())
