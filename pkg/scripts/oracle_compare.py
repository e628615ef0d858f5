"""RQMC mean dimension against exact ANOVA on finite input grids.

Instances come from the built-in set or the ``instances`` key of a JSON config:

    python scripts/oracle_compare.py --out results --config my_instances.json
"""

import sys

from meandim.cli import main

if __name__ == "__main__":
    sys.exit(main(["oracle-compare", *sys.argv[1:]]))
