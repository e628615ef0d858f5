"""Tune the Gaussian RBF width to target mean dimensions and confirm by RQMC.

Defaults: d = 10, targets 1.5, 3, 7 and 9.9, importance-weighted estimator.

    python scripts/gaussian_tune.py --out results --n 65536
"""

import sys

from meandim.cli import main

if __name__ == "__main__":
    sys.exit(main(["gaussian-tune", *sys.argv[1:]]))
