"""Zonotope domain with affine and S-shaped activation transformers.

A zonotope here is ``{c + G e + r : e in [-1, 1]^g, |r| <= err}``; the
``err`` box absorbs floating-point rounding so the generator part stays
the plain float image of the input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interval import EPS, TINY, Box, act_bounds, act_deriv_bounds
from .model import Activation, Kind, Network


class UnsupportedActivation(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Zonotope:
    center: np.ndarray
    generators: np.ndarray
    err: np.ndarray | None = None

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        g = np.array(self.generators, dtype=float)
        if g.size == 0:
            g = np.zeros((c.size, 0))
        g = g.reshape(c.size, -1)
        e = np.zeros_like(c) if self.err is None else np.array(self.err, dtype=float).reshape(-1)
        if c.size < 1 or e.shape != c.shape or np.any(e < 0):
            raise ValueError("malformed zonotope")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "generators", g)
        object.__setattr__(self, "err", e)

    @property
    def dim(self) -> int:
        return self.center.size

    @property
    def order(self) -> int:
        return self.generators.shape[1]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        eps = rng.uniform(-1.0, 1.0, size=(n, self.order))
        return self.center + eps @ self.generators.T


def _round_err(*mags):
    # a-priori bound on accumulated rounding of short dot products
    total = sum(mags)
    return 8 * EPS * total + 4 * TINY


def zono_batch_from_bounds(lo, hi):
    """Batched zonotopes (c, G, err) with one generator column per dimension."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    c = lo + 0.5 * (hi - lo)
    r = np.maximum(hi - c, c - lo)
    r = np.where(r > 0, np.nextafter(r, np.inf), 0.0)
    g = r[..., :, None] * np.eye(lo.shape[-1])
    return c, g, np.zeros_like(c)


def zono_batch_affine(w, b, c, g, err):
    aw = np.abs(w)
    with np.errstate(all="ignore"):
        c2 = np.einsum("ij,...j->...i", w, c) + b
        g2 = np.einsum("ij,...jk->...ik", w, g)
        gmag = np.abs(g).sum(axis=-1)
        e2 = np.einsum("ij,...j->...i", aw, err)
        mag = np.einsum("ij,...j->...i", aw, np.abs(c) + gmag + err) + np.abs(b)
    e2 = e2 * (1 + 4 * EPS) + (w.shape[1] + 2) * _round_err(mag)
    return c2, g2, e2


def zono_batch_hull(c, g, err):
    rad = np.abs(g).sum(axis=-1) * (1 + 4 * EPS) + err
    rad = rad + (g.shape[-1] + 1) * _round_err(np.abs(c))
    with np.errstate(all="ignore"):
        return np.nextafter(c - rad, -np.inf), np.nextafter(c + rad, np.inf)


def zono_batch_sigmoid_tanh(act: Activation, c, g, err):
    if act.kind is Kind.IDENTITY:
        return c, g, err
    if act.kind not in (Kind.SIGMOID, Kind.TANH):
        raise UnsupportedActivation(f"zonotope engine does not support {act}")
    l, u = zono_batch_hull(c, g, err)
    s_l_lo, s_l_hi = act_bounds(act, l, l)
    s_u_lo, s_u_hi = act_bounds(act, u, u)
    # lower bounds of the endpoint derivatives keep the slope below the true minimum
    dl, _ = act_deriv_bounds(act, l, l)
    du, _ = act_deriv_bounds(act, u, u)
    lam = np.minimum(dl, du)
    degenerate = u == l
    lam = np.where(degenerate, 0.0, lam)
    # sigma(x) - lam*x is nondecreasing on [l, u], so its range is [g(l), g(u)]
    g_lo = s_l_lo - lam * l
    g_hi = s_u_hi - lam * u
    mu = 0.5 * (g_lo + g_hi)
    delta = 0.5 * (g_hi - g_lo)
    slack = _round_err(np.abs(s_l_lo) + np.abs(s_u_hi) + np.abs(lam * l) + np.abs(lam * u))
    delta = np.maximum(delta, 0.0) + slack

    c2 = lam * c + mu
    g2 = lam[..., None] * g
    e2 = lam * err + _round_err(np.abs(lam * c) + np.abs(mu) + np.abs(g2).sum(axis=-1))
    # degenerate dimensions are mapped exactly; their residual width goes to err
    e2 = np.where(degenerate, e2 + delta, e2)
    fresh = np.where(degenerate, 0.0, delta)
    g2 = np.concatenate([g2, fresh[..., :, None] * np.eye(c.shape[-1])], axis=-1)
    return c2, g2, e2


def _check_engine(net: Network) -> None:
    for i, layer in enumerate(net.layers):
        if layer.activation.kind not in (Kind.IDENTITY, Kind.SIGMOID, Kind.TANH):
            raise UnsupportedActivation(
                f"layer {i}: zonotope engine supports identity/sigmoid/tanh, not {layer.activation}")


def _drop_zero_columns(g: np.ndarray) -> np.ndarray:
    keep = np.any(g != 0, axis=tuple(range(g.ndim - 1)))
    return g[..., keep]


def zono_bounds(net: Network, lo, hi):
    """Batched zonotope propagation; returns the output hull bounds."""
    _check_engine(net)
    c, g, e = zono_batch_from_bounds(lo, hi)
    for layer in net.layers:
        c, g, e = zono_batch_affine(layer.weights, layer.bias, c, g, e)
        c, g, e = zono_batch_sigmoid_tanh(layer.activation, c, g, e)
        g = _drop_zero_columns(g)
    return zono_batch_hull(c, g, e)


# -- single-zonotope API ----------------------------------------------------------


def from_box(x: Box) -> Zonotope:
    c, g, e = zono_batch_from_bounds(x.lo, x.hi)
    return Zonotope(c, _drop_zero_columns(g), e)


def zono_affine(z: Zonotope, w, b) -> Zonotope:
    w = np.asarray(w, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    if w.ndim != 2 or w.shape[1] != z.dim or w.shape[0] != b.size:
        raise ValueError(f"affine map of shape {w.shape} incompatible with zonotope of dim {z.dim}")
    return Zonotope(*zono_batch_affine(w, b, z.center, z.generators, z.err))


def zono_sigmoid_tanh(z: Zonotope, act: Activation) -> Zonotope:
    c, g, e = zono_batch_sigmoid_tanh(act, z.center, z.generators, z.err)
    return Zonotope(c, _drop_zero_columns(g), e)


def interval_hull(z: Zonotope) -> Box:
    return Box(*zono_batch_hull(z.center, z.generators, z.err))


def zono_forward(net: Network, x: Box) -> tuple[Box, Zonotope]:
    _check_engine(net)
    if x.dim != net.input_dim:
        raise ValueError(f"box has dimension {x.dim}, network expects {net.input_dim}")
    z = from_box(x)
    for layer in net.layers:
        z = zono_sigmoid_tanh(zono_affine(z, layer.weights, layer.bias), layer.activation)
    return interval_hull(z), z
