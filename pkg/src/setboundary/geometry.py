"""Box faces, uniform partitions and safe-set containment."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterator

import numpy as np

from .interval import Box, Interval


class Side(str, Enum):
    LOW = "low"
    HIGH = "high"


@dataclass(frozen=True)
class Face:
    box: Box
    fixed_dim: int
    side: Side


@dataclass(frozen=True)
class FaceSet:
    parent: Box
    faces: tuple[Face, ...]

    def __len__(self):
        return len(self.faces)

    def __iter__(self):
        return iter(self.faces)

    def boxes(self) -> list[Box]:
        return [f.box for f in self.faces]


def faces(x: Box) -> FaceSet:
    """The 2n closed faces of ``x``, ordered by (fixed_dim, side)."""
    free = np.flatnonzero(~x.degenerate)
    if free.size == 0:
        raise ValueError("a degenerate (point) box has an empty boundary")
    out = []
    for d in free:
        for side, value in ((Side.LOW, x.lo[d]), (Side.HIGH, x.hi[d])):
            lo = x.lo.copy()
            hi = x.hi.copy()
            lo[d] = hi[d] = value
            out.append(Face(Box(lo, hi), int(d), side))
    return FaceSet(x, tuple(out))


def grid_edges(lo: float, hi: float, k: int) -> np.ndarray:
    if lo == hi:
        return np.array([lo, hi])
    edges = lo + (hi - lo) * (np.arange(k + 1) / k)
    edges[0], edges[-1] = lo, hi
    return np.clip(edges, lo, hi)


def partition_bounds(x: Box, k: int) -> tuple[np.ndarray, np.ndarray]:
    """All k^n cells of ``x`` (degenerate dims unsplit) as (m, n) bound arrays, C order."""
    if k < 1:
        raise ValueError("partition factor k must be >= 1")
    parts = list(iter_partition(x, k, chunk=max(1, math.prod(grid_shape(x, k)))))
    return parts[0]


def grid_shape(x: Box, k: int) -> tuple[int, ...]:
    return tuple(1 if d else k for d in x.degenerate)


def unravel_cells(flat, shape: tuple[int, ...]) -> np.ndarray:
    """C-order multi-indices of flat cell numbers, shape (m, len(shape)).

    Unlike ``np.unravel_index`` this has no cap on the number of dimensions.
    """
    rest = np.asarray(flat, dtype=np.int64).copy()
    out = np.empty((rest.size, len(shape)), dtype=np.int64)
    for d in range(len(shape) - 1, -1, -1):
        rest, out[:, d] = np.divmod(rest, shape[d])
    return out


def iter_partition(x: Box, k: int, chunk: int = 65536) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Lazily yield cell bounds in chunks, same order as :func:`partition_bounds`."""
    shape = grid_shape(x, k)
    edges = [grid_edges(l, h, k) for l, h in zip(x.lo, x.hi)]
    total = math.prod(shape)
    for start in range(0, total, chunk):
        idx = unravel_cells(np.arange(start, min(total, start + chunk)), shape)
        lo = np.stack([edges[d][idx[:, d]] for d in range(x.dim)], axis=-1)
        hi = np.stack([edges[d][idx[:, d] + 1] for d in range(x.dim)], axis=-1)
        yield lo, hi


def partition_box(x: Box, k: int) -> list[Box]:
    lo, hi = partition_bounds(x, k)
    return [Box(l, h) for l, h in zip(lo, hi)]


def face_partition_bounds(fs: FaceSet, k: int) -> tuple[np.ndarray, np.ndarray]:
    parts = [partition_bounds(f.box, k) for f in fs.faces]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def partition_faces(fs: FaceSet, k: int) -> list[Box]:
    lo, hi = face_partition_bounds(fs, k)
    return [Box(l, h) for l, h in zip(lo, hi)]


# -- safe sets ----------------------------------------------------------------


@dataclass(frozen=True)
class SafeSet:
    """Box constraint on some output dimensions; ``None`` leaves a dimension free."""

    dims: tuple[Interval | None, ...]

    def __post_init__(self):
        dims = tuple(d if d is None or isinstance(d, Interval) else Interval(*d) for d in self.dims)
        if not any(d is not None for d in dims):
            raise ValueError("safe set must constrain at least one dimension")
        object.__setattr__(self, "dims", dims)

    @classmethod
    def from_box(cls, b: Box) -> "SafeSet":
        return cls(tuple(b.dims))

    @property
    def dim(self) -> int:
        return len(self.dims)

    def _bounds(self):
        lo = np.array([-np.inf if d is None else d.lo for d in self.dims])
        hi = np.array([np.inf if d is None else d.hi for d in self.dims])
        return lo, hi

    def contains_points(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        if p.shape[-1] != self.dim:
            raise ValueError(f"points have dimension {p.shape[-1]}, safe set has {self.dim}")
        lo, hi = self._bounds()
        return np.all((p >= lo) & (p <= hi), axis=-1)

    def __repr__(self):
        return "x".join("*" if d is None else f"[{d.lo:.6g},{d.hi:.6g}]" for d in self.dims)


def contained_in_safe(hull: Box, s: SafeSet) -> bool:
    if hull.dim != s.dim:
        raise ValueError(f"hull has dimension {hull.dim}, safe set has {s.dim}")
    lo, hi = s._bounds()
    return bool(np.all(hull.lo >= lo) and np.all(hull.hi <= hi))


# -- textual set notation ---------------------------------------------------------

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?"
_ITEM = re.compile(rf"\s*(?:\[\s*({_NUM})\s*,\s*({_NUM})\s*\]|(\*))\s*")


def _parse_items(text: str, allow_free: bool):
    items = []
    pos = 0
    text = text.strip()
    while True:
        m = _ITEM.match(text, pos)
        if not m:
            raise ValueError(f"malformed set {text!r} near position {pos}")
        if m.group(3):
            if not allow_free:
                raise ValueError("'*' is only allowed in safe sets")
            items.append(None)
        else:
            items.append((float(m.group(1)), float(m.group(2))))
        pos = m.end()
        if pos == len(text):
            return items
        if text[pos] not in "xX×":
            raise ValueError(f"malformed set {text!r}: expected 'x' at position {pos}")
        pos += 1


def parse_box(text: str) -> Box:
    """Parse ``[lo,hi]x[lo,hi]x...``; ``[a,b]^n`` repeats one interval."""
    m = re.fullmatch(r"\s*(\[.*\])\s*\^\s*(\d+)\s*", text)
    if m:
        text = "x".join([m.group(1)] * int(m.group(2)))
    return Box.from_intervals(_parse_items(text, allow_free=False))


def parse_safe(text: str) -> SafeSet:
    m = re.fullmatch(r"\s*(\[.*\])\s*\^\s*(\d+)\s*", text)
    if m:
        text = "x".join([m.group(1)] * int(m.group(2)))
    return SafeSet(tuple(None if it is None else Interval(*it) for it in _parse_items(text, allow_free=True)))

