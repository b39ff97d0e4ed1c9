"""Sound interval arithmetic, interval bound propagation and interval Jacobians.

Rounding model: scalar ``+ - *`` use error-free transformations (TwoSum and
Dekker's TwoProduct) so a bound moves by one ulp only when the float result
was inexact in the wrong direction; division always widens by one ulp.
Dot products are evaluated with a fixed summation order and widened by the
a-priori bound ``gamma(k) * sum |terms|``.  Transcendental values are
widened by a relative 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .model import Activation, Kind, Network, sigmoid, tanh_prime

EPS = 2.0**-53
TINY = np.finfo(float).smallest_subnormal
REL_TRANSCENDENTAL = 1e-12
MAX_DET_DIM = 8

_NEG_INF = -np.inf
_POS_INF = np.inf


class IntervalError(ArithmeticError):
    """Overflow or invalid operation inside interval arithmetic."""


def _gamma(k: int) -> float:
    return k * EPS / (1.0 - k * EPS)


# -- directed rounding kernels (elementwise on arrays or scalars) -----------


def _two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def _split(a):
    c = 134217729.0 * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def add_down(a, b):
    with np.errstate(all="ignore"):
        s, e = _two_sum(np.asarray(a, float), np.asarray(b, float))
        return np.where(e < 0, np.nextafter(s, _NEG_INF), s)


def add_up(a, b):
    with np.errstate(all="ignore"):
        s, e = _two_sum(np.asarray(a, float), np.asarray(b, float))
        return np.where(e > 0, np.nextafter(s, _POS_INF), s)


def _mul_risky(a, b, p):
    # Dekker splitting overflows for huge operands and loses exactness in the subnormal range
    big = (np.abs(a) > 1e290) | (np.abs(b) > 1e290)
    small = (np.abs(p) < 1e-280) & (a != 0) & (b != 0)
    return big | small


def mul_down(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    with np.errstate(all="ignore"):
        p, e = _two_prod(a, b)
        out = np.where(e < 0, np.nextafter(p, _NEG_INF), p)
        return np.where(_mul_risky(a, b, p), np.nextafter(p, _NEG_INF), out)


def mul_up(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    with np.errstate(all="ignore"):
        p, e = _two_prod(a, b)
        out = np.where(e > 0, np.nextafter(p, _POS_INF), p)
        return np.where(_mul_risky(a, b, p), np.nextafter(p, _POS_INF), out)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise IntervalError("interval bound overflowed to a non-finite value")


# -- elementwise interval operations on (lo, hi) array pairs ------------------


def iadd(al, ah, bl, bh):
    return add_down(al, bl), add_up(ah, bh)


def isub(al, ah, bl, bh):
    return add_down(al, -np.asarray(bh)), add_up(ah, -np.asarray(bl))


def imul(al, ah, bl, bh):
    lo = np.minimum(np.minimum(mul_down(al, bl), mul_down(al, bh)),
                    np.minimum(mul_down(ah, bl), mul_down(ah, bh)))
    hi = np.maximum(np.maximum(mul_up(al, bl), mul_up(al, bh)),
                    np.maximum(mul_up(ah, bl), mul_up(ah, bh)))
    return lo, hi


def widen_rel(lo, hi, rel=REL_TRANSCENDENTAL):
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    return (np.nextafter(lo - rel * np.abs(lo), _NEG_INF),
            np.nextafter(hi + rel * np.abs(hi), _POS_INF))


# -- scalar interval ----------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise IntervalError(f"non-finite interval [{lo}, {hi}]")
        if lo > hi:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return self.lo + 0.5 * (self.hi - self.lo)

    @property
    def mag(self) -> float:
        return max(abs(self.lo), abs(self.hi))

    @property
    def mig(self) -> float:
        return 0.0 if self.lo <= 0.0 <= self.hi else min(abs(self.lo), abs(self.hi))

    def __contains__(self, x) -> bool:
        if isinstance(x, Interval):
            return self.lo <= x.lo and x.hi <= self.hi
        return self.lo <= x <= self.hi

    def contains_zero(self) -> bool:
        return self.lo <= 0.0 <= self.hi

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def __add__(self, other):
        other = _as_interval(other)
        return _from_arrays(*iadd(self.lo, self.hi, other.lo, other.hi))

    __radd__ = __add__

    def __sub__(self, other):
        other = _as_interval(other)
        return _from_arrays(*isub(self.lo, self.hi, other.lo, other.hi))

    def __rsub__(self, other):
        return _as_interval(other) - self

    def __neg__(self):
        return Interval(-self.hi, -self.lo)

    def __mul__(self, other):
        other = _as_interval(other)
        return _from_arrays(*imul(self.lo, self.hi, other.lo, other.hi))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_interval(other)
        if other.contains_zero():
            raise ZeroDivisionError("division by an interval containing zero")
        qs = [self.lo / other.lo, self.lo / other.hi, self.hi / other.lo, self.hi / other.hi]
        return Interval(math.nextafter(min(qs), -math.inf), math.nextafter(max(qs), math.inf))

    def __repr__(self):
        return f"[{self.lo!r}, {self.hi!r}]"


def _as_interval(x) -> Interval:
    return x if isinstance(x, Interval) else Interval.point(float(x))


def _from_arrays(lo, hi) -> Interval:
    return Interval(float(lo), float(hi))


def iv_add(a: Interval, b: Interval) -> Interval:
    return a + b


def iv_mul(a: Interval, b: Interval) -> Interval:
    return a * b


def iv_neg(a: Interval) -> Interval:
    return -a


# -- boxes --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box stored as lower/upper bound vectors."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or lo.size == 0:
            raise ValueError("box bounds must be nonempty vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise IntervalError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError(f"empty box: lo={lo} hi={hi}")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def from_intervals(cls, dims: Iterable[Interval | Sequence[float]]) -> "Box":
        pairs = [(d.lo, d.hi) if isinstance(d, Interval) else tuple(d) for d in dims]
        return cls([p[0] for p in pairs], [p[1] for p in pairs])

    @classmethod
    def point(cls, x) -> "Box":
        return cls(x, x)

    @classmethod
    def cube(cls, center, radius: float) -> "Box":
        c = np.asarray(center, dtype=float)
        return cls(c - radius, c + radius)

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def dims(self) -> list[Interval]:
        return [Interval(l, h) for l, h in zip(self.lo, self.hi)]

    @property
    def width(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return self.lo + 0.5 * (self.hi - self.lo)

    @property
    def degenerate(self) -> np.ndarray:
        return self.lo == self.hi

    def volume(self) -> float:
        return float(np.prod(self.width))

    def __getitem__(self, i: int) -> Interval:
        return Interval(self.lo[i], self.hi[i])

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.dims)

    def __len__(self):
        return self.dim

    def __eq__(self, other):
        return (isinstance(other, Box) and np.array_equal(self.lo, other.lo)
                and np.array_equal(self.hi, other.hi))

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def contains(self, points) -> np.ndarray | bool:
        """Closed containment of one point (n,) or many (m, n)."""
        p = np.asarray(points, dtype=float)
        inside = np.all((p >= self.lo) & (p <= self.hi), axis=-1)
        return bool(inside) if p.ndim == 1 else inside

    def issubset(self, other: "Box") -> bool:
        return bool(np.all(self.lo >= other.lo) and np.all(self.hi <= other.hi))

    def hull(self, other: "Box") -> "Box":
        return Box(np.minimum(self.lo, other.lo), np.maximum(self.hi, other.hi))

    def intersect(self, other: "Box") -> "Box":
        return Box(np.maximum(self.lo, other.lo), np.minimum(self.hi, other.hi))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        return self.lo + rng.random((n, self.dim)) * (self.hi - self.lo)

    def to_list(self) -> list[list[float]]:
        return [[float(l), float(h)] for l, h in zip(self.lo, self.hi)]

    def __repr__(self):
        return "x".join(f"[{l:.6g},{h:.6g}]" for l, h in zip(self.lo, self.hi))


def stack_boxes(boxes: Sequence[Box]) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([b.lo for b in boxes]), np.stack([b.hi for b in boxes])


def hull_of(lo: np.ndarray, hi: np.ndarray) -> Box:
    """Interval hull of a batch of boxes given as (m, n) bound arrays."""
    return Box(lo.min(axis=0), hi.max(axis=0))


@dataclass(frozen=True, eq=False)
class IntervalMatrix:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float, ndmin=2)
        hi = np.array(self.hi, dtype=float, ndmin=2)
        if lo.shape != hi.shape or lo.ndim != 2:
            raise ValueError("interval matrix bounds must be equally shaped 2-D arrays")
        if np.any(lo > hi):
            raise ValueError("interval matrix has an empty entry")
        _check_finite(lo, hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, m) -> "IntervalMatrix":
        m = np.asarray(m, dtype=float)
        return cls(m, m)

    @property
    def shape(self) -> tuple[int, int]:
        return self.lo.shape

    def __getitem__(self, ij) -> Interval:
        return Interval(self.lo[ij], self.hi[ij])

    def contains(self, m) -> bool:
        m = np.asarray(m, dtype=float)
        return bool(np.all((m >= self.lo) & (m <= self.hi)))


@dataclass(frozen=True)
class LayerBounds:
    pre_activation: tuple[Box, ...]
    post_activation: tuple[Box, ...]


# -- affine maps ----------------------------------------------------------------


def _finish_sum(lo, hi, mag, nterms):
    err = _gamma(nterms + 2) * mag + (nterms + 1) * 2 * TINY
    with np.errstate(all="ignore"):
        lo = np.nextafter(lo - err, _NEG_INF)
        hi = np.nextafter(hi + err, _POS_INF)
    _check_finite(lo, hi)
    return lo, hi


def affine_bounds(w: np.ndarray, b: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    """Enclosure of ``{w x + b}`` for a batch of boxes (lo, hi of shape (..., n))."""
    pos = w >= 0
    xl = lo[..., None, :]
    xh = hi[..., None, :]
    with np.errstate(all="ignore"):
        t_lo = np.where(pos, w * xl, w * xh)
        t_hi = np.where(pos, w * xh, w * xl)
        # fixed-order reductions keep the result monotone in the inputs
        out_lo = t_lo.sum(axis=-1) + b
        out_hi = t_hi.sum(axis=-1) + b
        mag = np.maximum(np.abs(t_lo), np.abs(t_hi)).sum(axis=-1) + np.abs(b)
    return _finish_sum(out_lo, out_hi, mag, w.shape[1] + 1)


def affine_image(w, b, x: Box) -> Box:
    w = np.asarray(w, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    if w.ndim != 2 or w.shape[1] != x.dim or w.shape[0] != b.size:
        raise ValueError(f"affine map of shape {w.shape} incompatible with box of dim {x.dim}")
    return Box(*affine_bounds(w, b, x.lo, x.hi))


def _point_times_interval(w: np.ndarray, ml: np.ndarray, mh: np.ndarray):
    """Enclosure of ``w @ M`` for interval matrices M given batched as (..., q, r)."""
    pos = (w >= 0)[..., None]
    wl = w[..., None]
    al = ml[..., None, :, :]
    ah = mh[..., None, :, :]
    with np.errstate(all="ignore"):
        t_lo = np.where(pos, wl * al, wl * ah)
        t_hi = np.where(pos, wl * ah, wl * al)
        out_lo = t_lo.sum(axis=-2)
        out_hi = t_hi.sum(axis=-2)
        mag = np.maximum(np.abs(t_lo), np.abs(t_hi)).sum(axis=-2)
    return _finish_sum(out_lo, out_hi, mag, w.shape[1])


# -- activations ----------------------------------------------------------------


def act_bounds(act: Activation, lo: np.ndarray, hi: np.ndarray):
    if act.kind is Kind.IDENTITY:
        return lo, hi
    return widen_rel(act(lo), act(hi))


def act_interval(act: Activation, x: Interval) -> Interval:
    lo, hi = act_bounds(act, np.array(x.lo), np.array(x.hi))
    return Interval(float(lo), float(hi))


def act_deriv_bounds(act: Activation, lo: np.ndarray, hi: np.ndarray):
    """Enclosure of the activation derivative over [lo, hi], elementwise."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    k = act.kind
    if k is Kind.IDENTITY:
        return np.ones_like(lo), np.ones_like(hi)
    if k in (Kind.TANH, Kind.SIGMOID):
        if k is Kind.TANH:
            d_lo, d_hi, peak = tanh_prime(lo), tanh_prime(hi), 1.0
        else:
            d_lo, d_hi, peak = sigmoid(lo) * sigmoid(-lo), sigmoid(hi) * sigmoid(-hi), 0.25
        dmin = np.minimum(d_lo, d_hi)
        dmax = np.where((lo <= 0) & (hi >= 0), peak, np.maximum(d_lo, d_hi))
        dmin, dmax = widen_rel(dmin, dmax)
        return np.maximum(dmin, 0.0), np.minimum(dmax, peak)
    if k is Kind.LEAKY_RELU:
        s = act.param
        neg = lo < 0
        nonneg = hi >= 0
        dmin = np.where(neg & nonneg, min(s, 1.0), np.where(neg, s, 1.0))
        dmax = np.where(neg & nonneg, max(s, 1.0), np.where(neg, s, 1.0))
        return dmin.astype(float), dmax.astype(float)
    # ELU: alpha*exp(x) on x < 0, 1 on x >= 0
    a = act.param
    neg = lo < 0
    nonneg = hi >= 0
    with np.errstate(over="ignore"):
        e_lo = a * np.exp(np.minimum(lo, 0.0))
        e_hi = a * np.exp(np.minimum(hi, 0.0))
    e_lo, e_hi = widen_rel(e_lo, e_hi)
    dmin = np.where(neg, np.where(nonneg, np.minimum(e_lo, 1.0), e_lo), 1.0)
    dmax = np.where(neg, np.where(nonneg, np.maximum(e_hi, 1.0), e_hi), 1.0)
    return dmin, dmax


def act_deriv_interval(act: Activation, x: Interval) -> Interval:
    lo, hi = act_deriv_bounds(act, np.array(x.lo), np.array(x.hi))
    return Interval(float(lo), float(hi))


# -- interval bound propagation -----------------------------------------------


def ibp_bounds(net: Network, lo: np.ndarray, hi: np.ndarray, record: bool = False):
    """Batched IBP.  Returns output (lo, hi) and, if ``record``, per-layer pre/post bounds."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if lo.shape[-1] != net.input_dim:
        raise ValueError(f"box has dimension {lo.shape[-1]}, network expects {net.input_dim}")
    pre, post = [], []
    for layer in net.layers:
        lo, hi = affine_bounds(layer.weights, layer.bias, lo, hi)
        if record:
            pre.append((lo, hi))
        lo, hi = act_bounds(layer.activation, lo, hi)
        if record:
            post.append((lo, hi))
    return lo, hi, pre, post


def ibp_forward(net: Network, x: Box) -> tuple[Box, LayerBounds]:
    lo, hi, pre, post = ibp_bounds(net, x.lo, x.hi, record=True)
    bounds = LayerBounds(tuple(Box(*p) for p in pre), tuple(Box(*p) for p in post))
    return Box(lo, hi), bounds


# -- interval Jacobian and determinant ------------------------------------------


def jacobian_bounds(net: Network, lo: np.ndarray, hi: np.ndarray):
    """Batched interval Jacobian: returns (Jl, Jh) of shape (..., out, in)."""
    _, _, pre, _ = ibp_bounds(net, lo, hi, record=True)
    batch = np.asarray(lo).shape[:-1]
    w0 = net.layers[0].weights
    jl = np.broadcast_to(w0, batch + w0.shape).copy()
    jh = jl.copy()
    for i, layer in enumerate(net.layers):
        if i > 0:
            jl, jh = _point_times_interval(layer.weights, jl, jh)
        dl, dh = act_deriv_bounds(layer.activation, *pre[i])
        if layer.activation.kind is not Kind.IDENTITY:
            jl, jh = imul(dl[..., None], dh[..., None], jl, jh)
    return jl, jh


def interval_jacobian(net: Network, x: Box) -> IntervalMatrix:
    return IntervalMatrix(*jacobian_bounds(net, x.lo, x.hi))


def _cofactor_det(ml, mh, rows: list[int], cols: list[int]):
    if len(rows) == 1:
        return ml[..., rows[0], cols[0]], mh[..., rows[0], cols[0]]
    r = rows[0]
    acc = None
    for j, c in enumerate(cols):
        sub_l, sub_h = _cofactor_det(ml, mh, rows[1:], cols[:j] + cols[j + 1:])
        tl, th = imul(ml[..., r, c], mh[..., r, c], sub_l, sub_h)
        if j % 2:
            tl, th = -th, -tl
        acc = (tl, th) if acc is None else iadd(acc[0], acc[1], tl, th)
    return acc


def _hadamard_bound(ml, mh) -> float:
    mag = np.maximum(np.abs(ml), np.abs(mh))
    bound = 1.0
    for row in mag:
        bound *= math.sqrt(math.fsum(float(v) * float(v) for v in row))
    return bound * (1 + 1e-12) + TINY


def _elimination_det(ml: np.ndarray, mh: np.ndarray) -> Interval:
    n = ml.shape[0]
    rows = [[Interval(ml[i, j], mh[i, j]) for j in range(n)] for i in range(n)]
    det = Interval(1.0, 1.0)
    for k in range(n):
        p = max(range(k, n), key=lambda i: rows[i][k].mig)
        if rows[p][k].contains_zero():
            h = _hadamard_bound(ml, mh)
            return Interval(-h, h)
        if p != k:
            rows[k], rows[p] = rows[p], rows[k]
            det = -det
        pivot = rows[k][k]
        det = det * pivot
        for i in range(k + 1, n):
            f = rows[i][k] / pivot
            rows[i] = [rows[i][j] - f * rows[k][j] if j > k else Interval(0.0, 0.0) for j in range(n)]
    return det


def det_bounds(ml: np.ndarray, mh: np.ndarray):
    """Batched interval determinant for square matrices of shape (..., n, n)."""
    ml = np.asarray(ml, float)
    mh = np.asarray(mh, float)
    n = ml.shape[-1]
    if ml.shape[-2] != n:
        raise ValueError("determinant needs a square matrix")
    if n > MAX_DET_DIM:
        raise ValueError(f"interval determinant supports n <= {MAX_DET_DIM}, got {n}")
    if n <= 4:
        idx = list(range(n))
        lo, hi = _cofactor_det(ml, mh, idx, idx)
        _check_finite(lo, hi)
        return np.asarray(lo, float), np.asarray(hi, float)
    flat_l = ml.reshape(-1, n, n)
    flat_h = mh.reshape(-1, n, n)
    dets = [_elimination_det(a, b) for a, b in zip(flat_l, flat_h)]
    lo = np.array([d.lo for d in dets]).reshape(ml.shape[:-2])
    hi = np.array([d.hi for d in dets]).reshape(ml.shape[:-2])
    return lo, hi


def interval_det(j: IntervalMatrix) -> Interval:
    lo, hi = det_bounds(j.lo, j.hi)
    return Interval(float(lo), float(hi))
