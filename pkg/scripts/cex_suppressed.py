#!/usr/bin/env python3
"""Suppressed-pair experiment: delete one jump, watch the lower heat-kernel
bound collapse while the Harnack and Poincare constants barely move.

Equivalent to: lab cex suppressed --radii 8,16 --out runs/cex-suppressed
"""

import sys

from jumplab.cli import main

if __name__ == "__main__":
    sys.exit(main(["cex", "suppressed", "--radii", "8,16",
                   "--out", "runs/cex-suppressed", "--assert-thresholds"]
                  + sys.argv[1:]))
