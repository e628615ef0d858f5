"""Estimated mean dimension of (z/mu)^p against the asymptotic bound.

Runs the default grid p in {-1, -1/2, 1/2}, d in {64, 256, 1024}. A larger
n tightens the standard errors:

    python scripts/multiquadric_bound.py --out results --n 262144
"""

import sys

from meandim.cli import main

if __name__ == "__main__":
    sys.exit(main(["multiquadric-bound", *sys.argv[1:]]))
