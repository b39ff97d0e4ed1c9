"""Verification pipelines with partition refinement.

Four methods share one round loop:

* ``entire``   -- propagate a k^n partition of the whole input box
* ``boundary`` -- propagate only the faces of the input box; needs a
                  homeomorphism certificate over the box
* ``subset``   -- drop interior grid cells with a nonzero Jacobian
                  determinant and propagate the rest
* ``openmap``  -- propagate the box through the non-open prefix, then only
                  the faces of that intermediate hull through the open suffix

Each round intersects its hull with the previous one; both are sound
enclosures, so the intersection is too and hulls are nested by construction.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .geometry import SafeSet, contained_in_safe, face_partition_bounds, faces, iter_partition
from .interval import MAX_DET_DIM, Box, ibp_bounds, stack_boxes
from .model import Kind, Network, slice_network
from .oracle import RNG_ALGORITHM
from .topology import DEFAULT_RANK_TOL, check_homeomorphism, check_open_map, classify_cells, find_open_suffix
from .zonotope import zono_bounds

ZONO_TRANSFORMER = "min-slope parallelogram (lambda = min(s'(l), s'(u)))"


class Engine(str, Enum):
    IBP = "ibp"
    ZONO = "zono"


class Method(str, Enum):
    ENTIRE = "entire"
    BOUNDARY = "boundary"
    SUBSET = "subset"
    OPENMAP = "openmap"


class Outcome(str, Enum):
    SAFE = "safe"
    UNKNOWN = "unknown"


class NotCertifiedError(RuntimeError):
    """Boundary method requested without a homeomorphism certificate."""


class NoOpenSuffixError(RuntimeError):
    """Open-map method requested but no layer suffix is a certified open map."""


@dataclass
class VerifyConfig:
    engine: Engine | str = Engine.IBP
    max_rounds: int = 8
    schedule: Callable[[int], int] | None = None
    grid: int = 4
    rank_tol: float = DEFAULT_RANK_TOL
    workers: int = 1
    chunk: int = 8192

    def __post_init__(self):
        self.engine = Engine(self.engine)
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.grid < 1:
            raise ValueError("grid must be >= 1")
        ks = [self.k(r) for r in range(1, self.max_rounds + 1)]
        if any(b <= a for a, b in zip(ks, ks[1:])) or ks[0] < 1:
            raise ValueError(f"partition schedule must be strictly increasing and >= 1, got {ks}")

    def k(self, round_no: int) -> int:
        return round_no if self.schedule is None else int(self.schedule(round_no))

    def subset_grid(self, round_no: int) -> int:
        return self.grid * 2 ** (round_no - 1)


@dataclass
class RoundRecord:
    round: int
    k: int
    cells: int
    hull: Box
    contained: bool
    seconds: float

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "round": self.round,
            "k": self.k,
            "cells": self.cells,
            "hull": self.hull.to_list(),
            "contained": self.contained,
        }
        if timing:
            d["seconds"] = self.seconds
        return d


@dataclass
class Report:
    verdict: Outcome
    method: Method
    engine: Engine
    input_box: Box
    safe: SafeSet | None
    rounds: list[RoundRecord] = field(default_factory=list)
    certificates: list[dict] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def final_hull(self) -> Box:
        return self.rounds[-1].hull

    @property
    def safe_verdict(self) -> bool:
        return self.verdict is Outcome.SAFE

    @property
    def total_seconds(self) -> float:
        return sum(r.seconds for r in self.rounds)

    def to_dict(self, timing: bool = True) -> dict:
        d = {
            "verdict": self.verdict.value,
            "method": self.method.value,
            "engine": self.engine.value,
            "input": self.input_box.to_list(),
            "safe": None if self.safe is None else [
                None if iv is None else [iv.lo, iv.hi] for iv in self.safe.dims],
            "final_hull": self.final_hull.to_list(),
            "rounds": [r.to_dict(timing) for r in self.rounds],
            "certificates": self.certificates,
            "extras": self.extras,
        }
        if timing:
            d["total_seconds"] = self.total_seconds
        return d

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        n = self.final_hull.dim
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["round", "k", "cells"]
        for i in range(n):
            head += [f"lo{i}", f"hi{i}"]
        w.writerow(head + ["contained", "seconds"])
        for r in self.rounds:
            row = [r.round, r.k, r.cells]
            for l, h in zip(r.hull.lo, r.hull.hi):
                row += [repr(float(l)), repr(float(h))]
            w.writerow(row + [int(r.contained), f"{r.seconds:.6f}"])
        return buf.getvalue()


# -- reach --------------------------------------------------------------------


def _engine_bounds(net: Network, lo: np.ndarray, hi: np.ndarray, engine: Engine):
    if engine is Engine.IBP:
        out_lo, out_hi, _, _ = ibp_bounds(net, lo, hi)
        return out_lo, out_hi
    return zono_bounds(net, lo, hi)


def _chunks(lo: np.ndarray, hi: np.ndarray, chunk: int):
    for i in range(0, lo.shape[0], chunk):
        yield lo[i:i + chunk], hi[i:i + chunk]


def reach_bounds(net: Network, batches, engine: Engine | str = Engine.IBP, workers: int = 1) -> Box:
    """Union hull of engine outputs over an iterable of (lo, hi) cell batches."""
    engine = Engine(engine)

    def work(batch):
        lo, hi = batch
        out_lo, out_hi = _engine_bounds(net, lo, hi, engine)
        return out_lo.min(axis=0), out_hi.max(axis=0)

    batches = [b for b in batches if b[0].shape[0]]
    if not batches:
        raise ValueError("no cells to propagate")
    if workers > 1 and len(batches) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(work, batches))
    else:
        parts = [work(b) for b in batches]
    lo = np.min([p[0] for p in parts], axis=0)
    hi = np.max([p[1] for p in parts], axis=0)
    return Box(lo, hi)


def reach(net: Network, x: Box, engine: Engine | str = Engine.IBP, cells: Sequence[Box] | None = None,
          workers: int = 1, chunk: int = 8192) -> Box:
    if cells is None:
        cells = [x]
    lo, hi = stack_boxes(cells)
    if lo.shape[1] != net.input_dim:
        raise ValueError(f"cells have dimension {lo.shape[1]}, network expects {net.input_dim}")
    return reach_bounds(net, _chunks(lo, hi, chunk), engine, workers)


# -- the round loop -------------------------------------------------------------


def _run_rounds(cfg: VerifyConfig, s: SafeSet | None, step) -> tuple[Outcome, list[RoundRecord]]:
    records: list[RoundRecord] = []
    prev = None
    for r in range(1, cfg.max_rounds + 1):
        t0 = time.perf_counter()
        k, n_cells, hull = step(r)
        if prev is not None:
            hull = hull.intersect(prev)
        ok = s is not None and contained_in_safe(hull, s)
        records.append(RoundRecord(r, k, n_cells, hull, ok, time.perf_counter() - t0))
        prev = hull
        if ok:
            return Outcome.SAFE, records
    return Outcome.UNKNOWN, records


def _check_dims(net: Network, x: Box, s: SafeSet | None):
    if x.dim != net.input_dim:
        raise ValueError(f"input box has dimension {x.dim}, network expects {net.input_dim}")
    if s is not None and s.dim != net.output_dim:
        raise ValueError(f"safe set has dimension {s.dim}, network outputs {net.output_dim}")


def _base_extras(cfg: VerifyConfig) -> dict:
    extras = {"rng": RNG_ALGORITHM}
    if cfg.engine is Engine.ZONO:
        extras["zonotope_transformer"] = ZONO_TRANSFORMER
    return extras


def verify_entire(net: Network, x: Box, s: SafeSet | None, cfg: VerifyConfig | None = None) -> Report:
    cfg = cfg or VerifyConfig()
    _check_dims(net, x, s)

    def step(r):
        k = cfg.k(r)
        hull = reach_bounds(net, iter_partition(x, k, cfg.chunk), cfg.engine, cfg.workers)
        return k, math.prod(1 if d else k for d in x.degenerate), hull

    verdict, rounds = _run_rounds(cfg, s, step)
    return Report(verdict, Method.ENTIRE, cfg.engine, x, s, rounds, [], _base_extras(cfg))


def _face_step(net: Network, box: Box, cfg: VerifyConfig):
    if np.all(box.degenerate):
        lo, hi = box.lo[None, :], box.hi[None, :]

        def step(r):
            return cfg.k(r), 1, reach_bounds(net, [(lo, hi)], cfg.engine, cfg.workers)
        return step
    fs = faces(box)

    def step(r):
        k = cfg.k(r)
        lo, hi = face_partition_bounds(fs, k)
        return k, lo.shape[0], reach_bounds(net, _chunks(lo, hi, cfg.chunk), cfg.engine, cfg.workers)
    return step


def verify_invertible(net: Network, x: Box, s: SafeSet | None, cfg: VerifyConfig | None = None) -> Report:
    """Boundary-only verification for a network certified homeomorphic on ``x``."""
    cfg = cfg or VerifyConfig()
    _check_dims(net, x, s)
    cert = check_homeomorphism(net, x)
    if not cert.verified:
        raise NotCertifiedError(
            f"no homeomorphism certificate on {x}: det interval {cert.det_interval} contains 0")
    verdict, rounds = _run_rounds(cfg, s, _face_step(net, x, cfg))
    return Report(verdict, Method.BOUNDARY, cfg.engine, x, s, rounds, [cert.to_dict()], _base_extras(cfg))


def verify_noninvertible(net: Network, x: Box, s: SafeSet | None, cfg: VerifyConfig | None = None) -> Report:
    """Propagate only the cells not certified as locally homeomorphic interior cells."""
    cfg = cfg or VerifyConfig()
    _check_dims(net, x, s)
    stats = []

    def step(r):
        k = cfg.subset_grid(r)
        cls = classify_cells(net, x, k, cfg.workers)
        lo, hi = cls.kept_bounds()
        stats.append({"round": r, "grid": k, "cells": cls.n_cells,
                      "homeo_cells": len(cls.homeo_cells), "kept_cells": len(cls.kept_cells)})
        return k, len(cls.kept_cells), reach_bounds(net, _chunks(lo, hi, cfg.chunk), cfg.engine, cfg.workers)

    verdict, rounds = _run_rounds(cfg, s, step)
    extras = _base_extras(cfg)
    extras["classification"] = stats
    return Report(verdict, Method.SUBSET, cfg.engine, x, s, rounds, [], extras)


def verify_openmap(net: Network, x: Box, s: SafeSet | None, cfg: VerifyConfig | None = None) -> Report:
    """Whole box through the non-open prefix, faces of the intermediate hull through the open suffix."""
    cfg = cfg or VerifyConfig()
    _check_dims(net, x, s)
    split = find_open_suffix(net, cfg.rank_tol)
    if split >= len(net.layers):
        raise NoOpenSuffixError("no suffix of the network is a certified open map")
    suffix = slice_network(net, split, len(net.layers) - 1)
    cert = check_open_map(suffix, cfg.rank_tol, first_layer=split)
    t0 = time.perf_counter()
    if split > 0:
        prefix = slice_network(net, 0, split - 1)
        mid = reach_bounds(prefix, [(x.lo[None, :], x.hi[None, :])], cfg.engine)
    else:
        mid = x
    prefix_seconds = time.perf_counter() - t0
    verdict, rounds = _run_rounds(cfg, s, _face_step(suffix, mid, cfg))
    rounds[0].seconds += prefix_seconds
    extras = _base_extras(cfg)
    extras["split_layer"] = split
    extras["intermediate_hull"] = mid.to_list()
    return Report(verdict, Method.OPENMAP, cfg.engine, x, s, rounds, [cert.to_dict()], extras)


def choose_method(net: Network, x: Box, cfg: VerifyConfig | None = None) -> Method:
    """Homeomorphism certificate, else open suffix, else cell subset, else entire set."""
    cfg = cfg or VerifyConfig()
    square = net.input_dim == net.output_dim and net.input_dim <= MAX_DET_DIM
    if square and check_homeomorphism(net, x).verified:
        return Method.BOUNDARY
    if find_open_suffix(net, cfg.rank_tol) < len(net.layers):
        return Method.OPENMAP
    if square:
        return Method.SUBSET
    return Method.ENTIRE


_RUNNERS = {
    Method.ENTIRE: verify_entire,
    Method.BOUNDARY: verify_invertible,
    Method.SUBSET: verify_noninvertible,
    Method.OPENMAP: verify_openmap,
}


def verify(net: Network, x: Box, s: SafeSet | None, method: Method | str = "auto",
           cfg: VerifyConfig | None = None) -> Report:
    cfg = cfg or VerifyConfig()
    m = choose_method(net, x, cfg) if method == "auto" else Method(method)
    return _RUNNERS[m](net, x, s, cfg)


def engine_supported(net: Network, engine: Engine | str) -> bool:
    if Engine(engine) is Engine.IBP:
        return True
    return all(l.activation.kind in (Kind.IDENTITY, Kind.SIGMOID, Kind.TANH) for l in net.layers)


@dataclass
class Comparison:
    entire: Report
    boundary: Report
    ratios: np.ndarray

    def summary(self) -> dict:
        return {
            "method": self.boundary.method.value,
            "ratios": self.ratios.tolist(),
            "min": float(self.ratios.min()),
            "max": float(self.ratios.max()),
            "mean": float(self.ratios.mean()),
        }

    def to_dict(self, timing: bool = True) -> dict:
        return {"entire": self.entire.to_dict(timing), "boundary": self.boundary.to_dict(timing),
                "comparison": self.summary()}


def width_ratios(boundary: Box, entire: Box) -> np.ndarray:
    wb = boundary.width
    we = entire.width
    safe_we = np.where(we > 0, we, 1.0)
    return np.where(we > 0, wb / safe_we, np.where(wb > 0, np.inf, 1.0))


def compare(net: Network, x: Box, s: SafeSet | None, cfg: VerifyConfig | None = None,
            method: Method | str = "auto") -> Comparison:
    """Entire-set vs boundary-based run; ratios use the first-round hulls of each."""
    cfg = cfg or VerifyConfig()
    m = choose_method(net, x, cfg) if method == "auto" else Method(method)
    entire = verify_entire(net, x, s, cfg)
    other = _RUNNERS[m](net, x, s, cfg)
    ratios = width_ratios(other.rounds[0].hull, entire.rounds[0].hull)
    return Comparison(entire, other, ratios)
