"""Sampling-based ground truth: Monte-Carlo reach sets, point Jacobians, falsification.

Nothing in here is used to build certificates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import SafeSet
from .interval import Box
from .model import Network, forward

RNG_ALGORITHM = "numpy.PCG64"


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(seed)
    if stream:
        ss = ss.spawn(stream + 1)[stream]
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, eq=False)
class SampleCloud:
    seed: int
    count: int
    inputs: np.ndarray
    outputs: np.ndarray
    hull: Box

    def to_csv(self, path: str | Path) -> None:
        n_in = self.inputs.shape[1]
        n_out = self.outputs.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i}" for i in range(n_in)] + [f"y{i}" for i in range(n_out)])
            for x, y in zip(self.inputs, self.outputs):
                w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in y])


def _sample(x: Box, n: int, seed: int, streams: int) -> np.ndarray:
    # disjoint streams merged by stream index, so chunking never changes the draw
    sizes = [n // streams + (1 if i < n % streams else 0) for i in range(streams)]
    parts = [x.sample(m, make_rng(seed, i)) for i, m in enumerate(sizes) if m]
    return np.concatenate(parts) if parts else np.zeros((0, x.dim))


def mc_reach(net: Network, x: Box, n: int, seed: int = 0, streams: int = 1) -> SampleCloud:
    if n < 1:
        raise ValueError("sample count must be >= 1")
    pts = _sample(x, n, seed, streams)
    out = forward(net, pts)
    return SampleCloud(seed, n, pts, out, Box(out.min(axis=0), out.max(axis=0)))


def point_jacobian(net: Network, x) -> np.ndarray:
    """Chain-rule Jacobian at one point."""
    a = np.asarray(x, dtype=float)
    jac = np.eye(net.input_dim)
    for layer in net.layers:
        z = layer.weights @ a + layer.bias
        jac = layer.activation.derivative(z)[:, None] * (layer.weights @ jac)
        a = layer.activation(z)
    return jac


def point_jacobians(net: Network, xs) -> np.ndarray:
    """Batched :func:`point_jacobian`, shape (m, out, in)."""
    a = np.asarray(xs, dtype=float)
    jac = np.broadcast_to(np.eye(net.input_dim), (a.shape[0], net.input_dim, net.input_dim))
    for layer in net.layers:
        z = a @ layer.weights.T + layer.bias
        jac = layer.activation.derivative(z)[:, :, None] * np.einsum("ij,mjk->mik", layer.weights, jac)
        a = layer.activation(z)
    return jac


def finite_difference_jacobian(net: Network, x, h: float = 1e-5) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((forward(net, x + e) - forward(net, x - e)) / (2 * h))
    return np.stack(cols, axis=1)


def falsify(net: Network, x: Box, s: SafeSet, n: int, seed: int = 0, chunk: int = 100_000):
    """First sampled input whose output leaves ``s``, or None."""
    if n < 1:
        raise ValueError("sample count must be >= 1")
    rng = make_rng(seed)
    done = 0
    while done < n:
        m = min(chunk, n - done)
        pts = x.sample(m, rng)
        bad = ~s.contains_points(forward(net, pts))
        if bad.any():
            return pts[int(np.argmax(bad))]
        done += m
    return None
