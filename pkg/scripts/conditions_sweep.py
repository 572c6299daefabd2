#!/usr/bin/env python3
"""All-conditions sweep on the stable-like polynomial kernel.

Equivalent to: lab conditions --alpha 1.0 --radii 4,8,16 --out runs/conditions
"""

import sys

from jumplab.cli import main

if __name__ == "__main__":
    sys.exit(main(["conditions", "--alpha", "1.0", "--radii", "4,8,16",
                   "--out", "runs/conditions"] + sys.argv[1:]))
