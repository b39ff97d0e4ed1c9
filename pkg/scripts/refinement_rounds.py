"""Partition-refinement protocol: rounds needed by each method until a safe set is verified.

    python3 scripts/refinement_rounds.py [--safe '[0.9,1.27]x[-0.27,0.25]'] [--engine ibp]
"""

import argparse

from setboundary.geometry import parse_safe
from setboundary.interval import Box
from setboundary.model import example_network
from setboundary.verify import VerifyConfig, verify


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--safe", default="[0.9,1.27]x[-0.27,0.25]")
    ap.add_argument("--engine", choices=["ibp", "zono"], default="ibp")
    ap.add_argument("--rounds", type=int, default=6)
    args = ap.parse_args()

    net = example_network()
    x = Box([-0.5, -0.5], [0.5, 0.5])
    s = parse_safe(args.safe)
    print(f"safe set {s}")
    for method in ("entire", "subset", "openmap"):
        rep = verify(net, x, s, method, VerifyConfig(engine=args.engine, max_rounds=args.rounds))
        print(f"\n{method}: {rep.verdict.value.upper()}")
        for r in rep.rounds:
            print(f"  round {r.round}: k={r.k:3d} cells={r.cells:6d} hull={r.hull} {r.seconds:.3f}s")
        print(f"  total {rep.total_seconds:.3f}s")


if __name__ == "__main__":
    main()
