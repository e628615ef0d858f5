"""Regenerate the shipped Sobol' direction-number file.

SciPy bundles the published new-joe-kuo-6.21201 table in compressed form
(``poly`` holds the primitive polynomial with its leading and trailing
one bits, ``vinit`` the initial direction integers). This script writes
it back out in the plain ``d s a m_1 ... m_s`` layout and prints the
SHA-256 of the result.

    python scripts/make_direction_file.py src/meandim/data/new-joe-kuo-6.21201
"""

import hashlib
import os
import sys

import numpy as np
import scipy.stats


def main(path):
    npz = os.path.join(os.path.dirname(scipy.stats.__file__), "_sobol_direction_numbers.npz")
    data = np.load(npz)
    poly, vinit = data["poly"], data["vinit"]
    lines = ["d       s       a       m_i"]
    # row 0 is the van der Corput column; the file starts at d=2
    for row in range(1, len(poly)):
        p = int(poly[row])
        s = p.bit_length() - 1
        a = (p >> 1) & ((1 << (s - 1)) - 1)
        m = [int(v) for v in vinit[row, :s]]
        lines.append("\t".join(str(v) for v in [row + 1, s, a, *m]))
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    print(hashlib.sha256(text.encode()).hexdigest(), path)


if __name__ == "__main__":
    main(sys.argv[1])
