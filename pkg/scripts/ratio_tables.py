"""Width ratios of boundary-based over entire-set hulls on regenerated benchmark shapes.

Networks are random (seeded) and certified open maps; weights are not the
reference ones, so only the qualitative picture (ratios <= 1) carries over.

    python3 scripts/ratio_tables.py [--cap 20] [--eps 0.1 0.2 0.5] [--csv out.csv]
"""

import argparse
import csv
import sys
import time

import numpy as np

from setboundary.cli import TABLE_SHAPES, gen_net, scale_widths
from setboundary.interval import Box
from setboundary.model import load_network
from setboundary.oracle import make_rng
from setboundary.verify import VerifyConfig, compare


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cap", type=int, default=20, help="scale the wide shapes down to this width (0 = no cap)")
    ap.add_argument("--eps", type=float, nargs="+", default=[0.1, 0.2, 0.5])
    ap.add_argument("--activation", default="sigmoid")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="write rows here")
    args = ap.parse_args()

    rows = []
    print(f"{'net':5s} {'widths':28s} {'eps':>5s} {'engine':>6s} {'min':>8s} {'mean':>8s} {'max':>8s} {'sec':>6s}")
    for name, widths in TABLE_SHAPES.items():
        if args.cap:
            widths = scale_widths(widths, args.cap)
        net = load_network(gen_net(widths, args.activation, seed=args.seed))
        center = make_rng(args.seed, 1).uniform(-1, 1, widths[0])
        for eps in args.eps:
            x = Box.cube(center, eps)
            for engine in ("ibp", "zono"):
                t0 = time.perf_counter()
                summ = compare(net, x, None, VerifyConfig(engine=engine, max_rounds=1), "openmap").summary()
                dt = time.perf_counter() - t0
                shape = "-".join(map(str, widths))
                print(f"{name:5s} {shape:28s} {eps:5.2f} {engine:>6s} "
                      f"{summ['min']:8.4f} {summ['mean']:8.4f} {summ['max']:8.4f} {dt:6.2f}")
                rows.append([name, shape, eps, engine, summ["min"], summ["mean"], summ["max"], dt])
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["net", "widths", "eps", "engine", "min_ratio", "mean_ratio", "max_ratio", "seconds"])
            w.writerows(rows)
    worst = max(r[6] for r in rows if r[3] == "ibp")
    print(f"\nlargest IBP ratio: {worst:.6f}")
    return 0 if worst <= 1 + 1e-12 else 1


if __name__ == "__main__":
    sys.exit(main())
