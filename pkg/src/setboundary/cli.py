"""Command-line front end.

Exit codes: 0 = Safe verdict or a completed computation, 1 = Unknown verdict,
2 = usage or input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import parse_box, parse_safe
from .interval import Box
from .model import Activation, Network, NetworkFormatError, network_to_doc, random_network, read_network, slice_network
from .oracle import RNG_ALGORITHM, falsify, mc_reach
from .topology import DEFAULT_RANK_TOL, check_homeomorphism, check_open_map, find_open_suffix
from .verify import (
    Method,
    NoOpenSuffixError,
    NotCertifiedError,
    Outcome,
    VerifyConfig,
    compare,
    verify,
)
from .zonotope import UnsupportedActivation

EXIT_OK = 0
EXIT_UNKNOWN = 1
EXIT_USAGE = 2

MAX_GEN_ATTEMPTS = 100


class UsageError(Exception):
    pass


def fmt_box(b: Box) -> str:
    return " x ".join(f"[{l:.6g}, {h:.6g}]" for l, h in zip(b.lo, b.hi))


def trapezoid_start(widths: Sequence[int]) -> int:
    """First layer index from which layer widths never increase."""
    s = len(widths) - 1
    while s > 0 and widths[s] <= widths[s - 1]:
        s -= 1
    return s


# architectures of the randomly generated open-map benchmarks
TABLE_SHAPES = {
    "N6": (4, 4, 3, 3, 2),
    "N7": (5, 4, 4, 3, 3, 2),
    "N8": (50, 45, 40, 35, 30, 25, 20, 15, 10),
    "N9": (50, 46, 42, 38, 34, 30, 26, 22, 18, 14, 10),
    "N10": (80, 76, 72, 68, 64, 60),
    "N11": (80, 77, 74, 71, 68, 65, 62),
}


def scale_widths(widths: Sequence[int], cap: int) -> tuple[int, ...]:
    """Shrink a width profile proportionally so the widest layer is ``cap``.

    Rounding keeps the profile non-increasing when the original is.
    """
    top = max(widths)
    if top <= cap:
        return tuple(int(w) for w in widths)
    return tuple(max(1, int(round(w * cap / top))) for w in widths)


def gen_net(widths: Sequence[int], activation: Activation | str = "sigmoid", seed: int = 0,
            output_activation: Activation | str = "identity", tol: float = DEFAULT_RANK_TOL) -> dict:
    """Random network document whose trapezoidal suffix is a certified open map."""
    widths = [int(w) for w in widths]
    if len(widths) < 2 or min(widths) < 1:
        raise ValueError("need at least two widths, all >= 1")
    target = trapezoid_start(widths)
    rng = np.random.default_rng(seed)
    for _ in range(MAX_GEN_ATTEMPTS):
        net = random_network(widths, activation, rng, output_activation)
        if find_open_suffix(net, tol) <= target:
            return network_to_doc(net)
    raise RuntimeError(f"no open-map network found for widths {widths} after {MAX_GEN_ATTEMPTS} attempts")


def _load_net(path: str) -> Network:
    try:
        return read_network(path)
    except OSError as exc:
        raise UsageError(f"cannot read network {path}: {exc}") from None
    except (NetworkFormatError, ValueError) as exc:
        raise UsageError(f"bad network {path}: {exc}") from None


def _box(text: str | None, what: str) -> Box:
    if text is None:
        raise UsageError(f"--{what} is required")
    try:
        return parse_box(text)
    except ValueError as exc:
        raise UsageError(f"bad --{what}: {exc}") from None


def _cfg(args, rounds: int | None = None, schedule=None) -> VerifyConfig:
    return VerifyConfig(
        engine=args.engine,
        max_rounds=rounds if rounds is not None else args.rounds,
        schedule=schedule,
        grid=args.grid,
        workers=args.workers,
    )


def _write(path: str | None, text: str) -> None:
    if path:
        Path(path).write_text(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def cmd_reach(args) -> int:
    net = _load_net(args.net)
    x = _box(args.input, "input")
    k = args.grid
    cfg = _cfg(args, rounds=1, schedule=lambda r: k)
    rep = verify(net, x, None, args.method, cfg)
    print(f"method: {rep.method.value}  engine: {rep.engine.value}  cells: {rep.rounds[0].cells}")
    print(f"hull: {fmt_box(rep.final_hull)}")
    _write(args.json, rep.to_json(timing=not args.no_timing))
    _write(args.csv, rep.to_csv())
    return EXIT_OK


def cmd_verify(args) -> int:
    net = _load_net(args.net)
    x = _box(args.input, "input")
    if args.safe is None:
        raise UsageError("--safe is required")
    try:
        s = parse_safe(args.safe)
    except ValueError as exc:
        raise UsageError(f"bad --safe: {exc}") from None
    rep = verify(net, x, s, args.method, _cfg(args))
    for r in rep.rounds:
        print(f"round {r.round}: k={r.k} cells={r.cells} hull={fmt_box(r.hull)} "
              f"contained={'yes' if r.contained else 'no'} ({r.seconds:.3g}s)")
    print(f"verdict: {rep.verdict.value.upper()}  method: {rep.method.value}  engine: {rep.engine.value}")
    print(f"final hull: {fmt_box(rep.final_hull)}")
    if args.falsify:
        cex = falsify(net, x, s, args.falsify, args.seed)
        rep.extras["falsification"] = {"samples": args.falsify, "seed": args.seed,
                                       "counterexample": None if cex is None else cex.tolist()}
        print("falsification: " + ("none found" if cex is None else f"counterexample {cex.tolist()}"))
    _write(args.json, rep.to_json(timing=not args.no_timing))
    _write(args.csv, rep.to_csv())
    return EXIT_OK if rep.verdict is Outcome.SAFE else EXIT_UNKNOWN


def cmd_check_homeo(args) -> int:
    net = _load_net(args.net)
    x = _box(args.input, "input")
    cert = check_homeomorphism(net, x)
    d = cert.det_interval
    print(f"homeomorphism: {cert.verdict.value}  det in [{d.lo:.6g}, {d.hi:.6g}]")
    _write(args.json, _dump(cert.to_dict()))
    return EXIT_OK


def cmd_check_openmap(args) -> int:
    net = _load_net(args.net)
    last = len(net.layers) - 1 if args.to is None else args.to
    try:
        sub = slice_network(net, args.start, last)
    except IndexError as exc:
        raise UsageError(str(exc)) from None
    cert = check_open_map(sub, args.rank_tol, first_layer=args.start)
    print(f"open map (layers {args.start}..{last}): {cert.verdict.value}")
    for f in cert.findings:
        print(f"  layer {f.layer}: {f.d_in}->{f.d_out} rank {f.rank}/{f.d_out} {f.activation}")
    for reason in cert.reasons:
        print(f"  reason: {reason}")
    print(f"ranks: {' '.join(str(f.rank) for f in cert.findings)}")
    _write(args.json, _dump(cert.to_dict()))
    return EXIT_OK


def cmd_compare(args) -> int:
    net = _load_net(args.net)
    x = _box(args.input, "input")
    s = parse_safe(args.safe) if args.safe else None
    cmp = compare(net, x, s, _cfg(args), args.method)
    summ = cmp.summary()
    print(f"entire   ({cmp.entire.engine.value}): {fmt_box(cmp.entire.rounds[0].hull)}")
    print(f"{summ['method']:8s} ({cmp.boundary.engine.value}): {fmt_box(cmp.boundary.rounds[0].hull)}")
    print("ratios: " + " ".join(f"{r:.6g}" for r in summ["ratios"]))
    print(f"min {summ['min']:.6g}  max {summ['max']:.6g}  mean {summ['mean']:.6g}")
    _write(args.json, _dump(cmp.to_dict(timing=not args.no_timing)))
    if args.csv:
        rows = ["dim,entire_lo,entire_hi,boundary_lo,boundary_hi,ratio"]
        e, b = cmp.entire.rounds[0].hull, cmp.boundary.rounds[0].hull
        for i in range(e.dim):
            rows.append(f"{i},{e.lo[i]!r},{e.hi[i]!r},{b.lo[i]!r},{b.hi[i]!r},{cmp.ratios[i]!r}")
        _write(args.csv, "\n".join(rows) + "\n")
    return EXIT_OK


def cmd_mc(args) -> int:
    net = _load_net(args.net)
    x = _box(args.input, "input")
    cloud = mc_reach(net, x, args.samples, args.seed)
    print(f"samples: {cloud.count}  seed: {cloud.seed}  rng: {RNG_ALGORITHM}")
    print(f"sample hull: {fmt_box(cloud.hull)}")
    if args.csv:
        cloud.to_csv(args.csv)
    _write(args.json, _dump({"seed": cloud.seed, "count": cloud.count, "rng": RNG_ALGORITHM,
                             "hull": cloud.hull.to_list()}))
    return EXIT_OK


def cmd_gen_net(args) -> int:
    try:
        widths = [int(w) for w in args.widths.replace(",", "-").split("-")]
        act = Activation.parse(args.activation)
        out_act = Activation.parse(args.output_activation)
    except (ValueError, NetworkFormatError) as exc:
        raise UsageError(f"bad generator arguments: {exc}") from None
    doc = gen_net(widths, act, args.seed, out_act)
    text = json.dumps(doc, indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}: widths {'-'.join(map(str, widths))}, open suffix from layer {trapezoid_start(widths)}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--net", help="network document (JSON)")
    common.add_argument("--input", help="input box, e.g. '[-0.5,0.5]x[-0.5,0.5]'")
    common.add_argument("--safe", help="safe set; '*' leaves a dimension unconstrained")
    common.add_argument("--engine", choices=["ibp", "zono"], default="ibp")
    common.add_argument("--rounds", type=int, default=8)
    common.add_argument("--grid", type=int, default=None)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--json", help="write a JSON report here")
    common.add_argument("--csv", help="write per-round CSV rows here")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    common.add_argument("--no-timing", action="store_true", help="omit wall times from JSON")
    methods = ["boundary", "entire", "subset", "openmap", "auto"]

    p = argparse.ArgumentParser(prog="setboundary", description="Set-boundary reachability for feedforward networks")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("reach", parents=[common], help="one-shot reach hull")
    sp.add_argument("--method", choices=methods, default="entire")
    sp.set_defaults(func=cmd_reach, grid_default=1)

    sp = sub.add_parser("verify", parents=[common], help="verify a safety property")
    sp.add_argument("--method", choices=methods, default="auto")
    sp.add_argument("--falsify", type=int, default=0, metavar="N", help="also run N falsification samples")
    sp.set_defaults(func=cmd_verify, grid_default=4)

    sp = sub.add_parser("check-homeo", parents=[common], help="interval Jacobian determinant certificate")
    sp.set_defaults(func=cmd_check_homeo, grid_default=1)

    sp = sub.add_parser("check-openmap", parents=[common], help="structural open-map certificate")
    sp.add_argument("--from", dest="start", type=int, default=0)
    sp.add_argument("--to", type=int, default=None)
    sp.add_argument("--rank-tol", type=float, default=DEFAULT_RANK_TOL)
    sp.set_defaults(func=cmd_check_openmap, grid_default=1)

    sp = sub.add_parser("compare", parents=[common], help="entire-set vs boundary width ratios")
    sp.add_argument("--method", choices=methods, default="auto")
    sp.set_defaults(func=cmd_compare, grid_default=4)

    sp = sub.add_parser("mc", parents=[common], help="Monte-Carlo reach estimate")
    sp.add_argument("--samples", type=int, default=10_000)
    sp.set_defaults(func=cmd_mc, grid_default=1)

    sp = sub.add_parser("gen-net", help="generate a random open-map network")
    sp.add_argument("--widths", required=True, help="e.g. 4-4-3-3-2")
    sp.add_argument("--activation", default="sigmoid")
    sp.add_argument("--output-activation", default="identity")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="output path (stdout if omitted)")
    sp.set_defaults(func=cmd_gen_net)
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if getattr(args, "grid", 0) is None:
        args.grid = args.grid_default
    try:
        if getattr(args, "net", 1) is None:
            raise UsageError("--net is required")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NotCertifiedError, NoOpenSuffixError, UnsupportedActivation, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
