#!/usr/bin/env python3
"""Ladder-kernel experiment: log-weighted jump atoms push the upper jump
constant up with scale while exit times and hitting probabilities stay flat.

Equivalent to: lab cex ladder --ranges 16,64,256 --out runs/cex-ladder
"""

import sys

from jumplab.cli import main

if __name__ == "__main__":
    sys.exit(main(["cex", "ladder", "--ranges", "16,64,256",
                   "--out", "runs/cex-ladder", "--assert-thresholds"]
                  + sys.argv[1:]))
