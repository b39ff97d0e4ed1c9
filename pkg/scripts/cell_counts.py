"""Kept-cell counts of the local-homeomorphism classification as the grid is refined.

    python3 scripts/cell_counts.py [--ks 4 8 16 32 64]
"""

import argparse

from setboundary.interval import Box
from setboundary.model import example_network, identity_network
from setboundary.topology import classify_cells


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ks", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    cases = [
        ("identity on [0,1]^2", identity_network(2), Box([0, 0], [1, 1])),
        ("2-4-3-2 sigmoid on [-0.5,0.5]^2", example_network(), Box([-0.5, -0.5], [0.5, 0.5])),
    ]
    for label, net, x in cases:
        print(label)
        print(f"  {'k':>4s} {'cells':>7s} {'kept':>7s} {'removed':>7s} {'ring 4k-4':>9s}")
        for k in args.ks:
            c = classify_cells(net, x, k, workers=args.workers)
            print(f"  {k:4d} {c.n_cells:7d} {len(c.kept_cells):7d} {len(c.homeo_cells):7d} {4 * k - 4:9d}")


if __name__ == "__main__":
    main()
