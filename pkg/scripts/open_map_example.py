"""Reproduce the 2-4-3-2 sigmoid example: plain IBP against the open-map pipeline.

    python3 scripts/open_map_example.py [--rounds R]
"""

import argparse

from setboundary.interval import Box, ibp_forward
from setboundary.model import example_network
from setboundary.topology import check_homeomorphism, check_open_map, find_open_suffix
from setboundary.verify import VerifyConfig, verify_openmap


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rounds", type=int, default=1, help="face refinement rounds (k = round)")
    args = ap.parse_args()

    net = example_network()
    x = Box([-0.5, -0.5], [0.5, 0.5])
    print(f"widths {'-'.join(map(str, net.widths))}, input {x}")
    print(f"full network open map: {check_open_map(net).verdict.value}")
    print(f"homeomorphism over input: {check_homeomorphism(net, x).verdict.value}")
    print(f"open suffix starts at layer {find_open_suffix(net)}")

    ibp, _ = ibp_forward(net, x)
    rep = verify_openmap(net, x, None, VerifyConfig(max_rounds=args.rounds))
    print(f"\nlayer-1 hull:      {Box.from_intervals(rep.extras['intermediate_hull'])}")
    print(f"IBP hull:          {ibp}")
    for r in rep.rounds:
        red = 100 * (1 - r.hull.width / ibp.width)
        print(f"open-map round {r.round} (k={r.k}, {r.cells} faces): {r.hull}  "
              f"reduction " + " ".join(f"{v:.2f}%" for v in red))


if __name__ == "__main__":
    main()
