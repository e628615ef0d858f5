"""Mean dimension of Keister's function for d = 2..1000 (CSV and SVG chart).

Extra arguments are passed to ``meandim keister-sweep``, e.g.

    python scripts/keister_sweep.py --out results --jobs 4
"""

import sys

from meandim.cli import main

if __name__ == "__main__":
    sys.exit(main(["keister-sweep", *sys.argv[1:]]))
