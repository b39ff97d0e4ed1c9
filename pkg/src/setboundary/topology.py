"""Homeomorphism and open-map certificates."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import grid_edges, grid_shape, iter_partition, unravel_cells
from .interval import MAX_DET_DIM, Box, Interval, det_bounds, interval_det, interval_jacobian, jacobian_bounds
from .model import Network

DEFAULT_RANK_TOL = 1e-9


class Verdict(str, Enum):
    VERIFIED = "verified"
    INCONCLUSIVE = "inconclusive"
    REFUTED = "refuted"


@dataclass(frozen=True)
class HomeoCertificate:
    verdict: Verdict
    det_interval: Interval
    box: Box

    @property
    def verified(self) -> bool:
        return self.verdict is Verdict.VERIFIED

    def to_dict(self) -> dict:
        return {
            "kind": "homeomorphism",
            "verdict": self.verdict.value,
            "det_interval": [self.det_interval.lo, self.det_interval.hi],
            "box": self.box.to_list(),
        }


@dataclass(frozen=True)
class LayerFinding:
    layer: int
    d_in: int
    d_out: int
    rank: int
    activation: str
    monotone: bool

    @property
    def non_increasing(self) -> bool:
        return self.d_out <= self.d_in

    @property
    def full_rank(self) -> bool:
        return self.rank == self.d_out

    @property
    def ok(self) -> bool:
        return self.non_increasing and self.full_rank and self.monotone

    def problems(self) -> list[str]:
        out = []
        if not self.non_increasing:
            out.append(f"layer {self.layer}: width increases {self.d_in}->{self.d_out}")
        if not self.full_rank:
            out.append(f"layer {self.layer}: weight rank {self.rank} < required {self.d_out}")
        if not self.monotone:
            out.append(f"layer {self.layer}: activation {self.activation} is not strictly monotone")
        return out

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "widths": [self.d_in, self.d_out],
            "non_increasing": self.non_increasing,
            "rank": self.rank,
            "required_rank": self.d_out,
            "activation": self.activation,
            "strictly_monotone": self.monotone,
        }


@dataclass(frozen=True)
class OpenMapCertificate:
    verdict: Verdict
    findings: tuple[LayerFinding, ...]
    first_layer: int = 0

    @property
    def verified(self) -> bool:
        return self.verdict is Verdict.VERIFIED

    @property
    def reasons(self) -> list[str]:
        return [p for f in self.findings for p in f.problems()]

    def to_dict(self) -> dict:
        return {
            "kind": "open_map",
            "verdict": self.verdict.value,
            "first_layer": self.first_layer,
            "layers": [f.to_dict() for f in self.findings],
            "reasons": self.reasons,
        }


def matrix_rank(w, tol: float = DEFAULT_RANK_TOL) -> int:
    """Numerical rank by Gaussian elimination with partial pivoting.

    A pivot counts when its magnitude exceeds ``tol * max|W| * max(rows, cols)``.
    """
    if not tol > 0:
        raise ValueError("rank tolerance must be positive")
    a = np.array(w, dtype=float, ndmin=2)
    rows, cols = a.shape
    scale = np.max(np.abs(a)) if a.size else 0.0
    if scale == 0.0:
        return 0
    thresh = tol * scale * max(rows, cols)
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        p = rank + int(np.argmax(np.abs(a[rank:, c])))
        if abs(a[p, c]) <= thresh:
            continue
        if p != rank:
            a[[rank, p]] = a[[p, rank]]
        a[rank + 1:, c:] -= np.outer(a[rank + 1:, c] / a[rank, c], a[rank, c:])
        rank += 1
    return rank


def check_homeomorphism(net: Network, x: Box) -> HomeoCertificate:
    """Certify-or-abstain: Verified iff the interval Jacobian determinant excludes 0."""
    if net.input_dim != net.output_dim:
        raise ValueError(f"homeomorphism check needs a square network, got {net.input_dim}->{net.output_dim}")
    if x.dim != net.input_dim:
        raise ValueError(f"box has dimension {x.dim}, network expects {net.input_dim}")
    det = interval_det(interval_jacobian(net, x))
    verdict = Verdict.INCONCLUSIVE if det.contains_zero() else Verdict.VERIFIED
    return HomeoCertificate(verdict, det, x)


def check_open_map(net: Network, tol: float = DEFAULT_RANK_TOL, first_layer: int = 0) -> OpenMapCertificate:
    if not tol > 0:
        raise ValueError("rank tolerance must be positive")
    findings = tuple(
        LayerFinding(
            layer=first_layer + i,
            d_in=layer.d_in,
            d_out=layer.d_out,
            rank=matrix_rank(layer.weights, tol),
            activation=str(layer.activation),
            monotone=layer.activation.strictly_increasing,
        )
        for i, layer in enumerate(net.layers)
    )
    verdict = Verdict.VERIFIED if all(f.ok for f in findings) else Verdict.REFUTED
    return OpenMapCertificate(verdict, findings, first_layer)


def find_open_suffix(net: Network, tol: float = DEFAULT_RANK_TOL) -> int:
    """Smallest s such that layers s.. form a certified open map (len(net) if none)."""
    cert = check_open_map(net, tol)
    s = len(net.layers)
    for f in reversed(cert.findings):
        if not f.ok:
            break
        s = f.layer
    return s


@dataclass(frozen=True)
class CellClassification:
    box: Box
    k: int
    shape: tuple[int, ...]
    homeo_cells: frozenset[int]
    kept_cells: frozenset[int]
    det_checked: int = 0

    @property
    def n_cells(self) -> int:
        return math.prod(self.shape)

    def kept_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self._bounds(sorted(self.kept_cells))

    def homeo_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self._bounds(sorted(self.homeo_cells))

    def _bounds(self, idx: list[int]):
        n = self.box.dim
        if not idx:
            return np.zeros((0, n)), np.zeros((0, n))
        multi = unravel_cells(idx, self.shape)
        edges = [grid_edges(l, h, self.k) for l, h in zip(self.box.lo, self.box.hi)]
        lo = np.stack([edges[d][multi[:, d]] for d in range(n)], axis=-1)
        hi = np.stack([edges[d][multi[:, d] + 1] for d in range(n)], axis=-1)
        return lo, hi


def _boundary_mask(shape: tuple[int, ...], start: int, stop: int) -> np.ndarray:
    multi = unravel_cells(np.arange(start, stop), shape)
    touch = np.zeros(stop - start, dtype=bool)
    for d, s in enumerate(shape):
        touch |= (multi[:, d] == 0) | (multi[:, d] == s - 1)
    return touch


def _certified(net: Network, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    if lo.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    jl, jh = jacobian_bounds(net, lo, hi)
    dl, dh = det_bounds(jl, jh)
    return (dl > 0) | (dh < 0)


def classify_cells(net: Network, x: Box, k: int, workers: int = 1, chunk: int = 4096) -> CellClassification:
    """Split ``x`` into k^n cells; interior cells with a nonzero interval Jacobian
    determinant form the removable set, everything else is kept."""
    if net.input_dim != net.output_dim:
        raise ValueError("cell classification needs a square network")
    if x.dim != net.input_dim:
        raise ValueError(f"box has dimension {x.dim}, network expects {net.input_dim}")
    if x.dim > MAX_DET_DIM:
        raise ValueError(f"interval determinant supports n <= {MAX_DET_DIM}, got {x.dim}")
    if k < 1:
        raise ValueError("grid resolution k must be >= 1")
    shape = grid_shape(x, k)
    total = math.prod(shape)
    if np.any(x.degenerate):
        # no interior at all: every cell meets the boundary
        return CellClassification(x, k, shape, frozenset(), frozenset(range(total)))

    def work(args):
        start, (lo, hi) = args
        stop = start + lo.shape[0]
        touch = _boundary_mask(shape, start, stop)
        ok = np.zeros(stop - start, dtype=bool)
        inner = ~touch
        ok[inner] = _certified(net, lo[inner], hi[inner])
        return start, ok, int(inner.sum())

    jobs = []
    start = 0
    for lo, hi in iter_partition(x, k, chunk):
        jobs.append((start, (lo, hi)))
        start += lo.shape[0]
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    homeo, checked = [], 0
    for start, ok, n in results:
        homeo.extend((start + np.flatnonzero(ok)).tolist())
        checked += n
    homeo_set = frozenset(homeo)
    kept = frozenset(range(total)) - homeo_set
    return CellClassification(x, k, shape, homeo_set, kept, checked)
