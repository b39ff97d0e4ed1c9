"""Feedforward network representation, activations and the on-disk format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Sequence

import numpy as np

FORMAT_TAG = "setboundary-network"
FORMAT_VERSION = 1


class NetworkFormatError(ValueError):
    """Raised for malformed or inconsistent network documents."""


class Kind(str, Enum):
    IDENTITY = "identity"
    TANH = "tanh"
    SIGMOID = "sigmoid"
    LEAKY_RELU = "leaky_relu"
    ELU = "elu"


_ALIASES = {
    "purelin": Kind.IDENTITY,
    "linear": Kind.IDENTITY,
    "logsig": Kind.SIGMOID,
    "tansig": Kind.TANH,
    "leakyrelu": Kind.LEAKY_RELU,
}


@dataclass(frozen=True)
class Activation:
    kind: Kind
    param: float | None = None

    def __post_init__(self):
        if self.kind is Kind.LEAKY_RELU:
            if self.param is None or not self.param > 0 or self.param == 1:
                raise ValueError("leaky_relu slope must be > 0 and != 1")
        elif self.kind is Kind.ELU:
            if self.param is None or not self.param > 0:
                raise ValueError("elu alpha must be > 0")
        elif self.param is not None:
            raise ValueError(f"{self.kind.value} takes no parameter")

    @classmethod
    def parse(cls, spec: str | dict) -> "Activation":
        if isinstance(spec, dict):
            name = str(spec.get("name", "")).lower()
            param = spec.get("slope", spec.get("alpha"))
        else:
            name, param = spec.lower(), None
            if "(" in name and name.endswith(")"):
                name, arg = name[:-1].split("(", 1)
                param = float(arg)
        try:
            kind = _ALIASES.get(name) or Kind(name)
        except ValueError:
            raise NetworkFormatError(f"unknown activation {name!r}") from None
        if kind is Kind.LEAKY_RELU and param is None:
            param = 0.01
        if kind is Kind.ELU and param is None:
            param = 1.0
        return cls(kind, None if param is None else float(param))

    def to_doc(self) -> str | dict:
        if self.kind is Kind.LEAKY_RELU:
            return {"name": self.kind.value, "slope": self.param}
        if self.kind is Kind.ELU:
            return {"name": self.kind.value, "alpha": self.param}
        return self.kind.value

    @property
    def strictly_increasing(self) -> bool:
        # every supported kind is; kept as a property so certificates can cite it
        return True

    @property
    def smooth(self) -> bool:
        return self.kind in (Kind.IDENTITY, Kind.TANH, Kind.SIGMOID)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k is Kind.IDENTITY:
            return x.copy()
        if k is Kind.TANH:
            return np.tanh(x)
        if k is Kind.SIGMOID:
            return sigmoid(x)
        if k is Kind.LEAKY_RELU:
            return np.where(x >= 0, x, self.param * x)
        with np.errstate(over="ignore"):
            return np.where(x >= 0, x, self.param * np.expm1(np.minimum(x, 0.0)))

    def derivative(self, x):
        """Pointwise derivative; right derivative at the kink of LeakyReLU/ELU."""
        x = np.asarray(x, dtype=float)
        k = self.kind
        if k is Kind.IDENTITY:
            return np.ones_like(x)
        if k is Kind.TANH:
            return tanh_prime(x)
        if k is Kind.SIGMOID:
            return sigmoid(x) * sigmoid(-x)
        if k is Kind.LEAKY_RELU:
            return np.where(x >= 0, 1.0, self.param)
        return np.where(x >= 0, 1.0, self.param * np.exp(np.minimum(x, 0.0)))

    def __str__(self):
        return self.kind.value if self.param is None else f"{self.kind.value}({self.param:g})"


IDENTITY = Activation(Kind.IDENTITY)
TANH = Activation(Kind.TANH)
SIGMOID = Activation(Kind.SIGMOID)


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def tanh_prime(x):
    # 1/cosh^2 keeps relative accuracy in the tails where 1 - tanh^2 cancels
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        c = np.cosh(x)
        return 1.0 / (c * c)


def activation_derivative(act: Activation, x: float) -> float:
    return float(act.derivative(x))


@dataclass(frozen=True)
class Layer:
    weights: np.ndarray
    bias: np.ndarray
    activation: Activation = IDENTITY

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, ndmin=2)
        b = np.array(self.bias, dtype=float).reshape(-1)
        if w.ndim != 2:
            raise ValueError("weights must be a 2-D matrix")
        if b.shape[0] != w.shape[0]:
            raise ValueError(f"bias length {b.shape[0]} != weight rows {w.shape[0]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("non-finite parameter")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def d_in(self) -> int:
        return self.weights.shape[1]

    @property
    def d_out(self) -> int:
        return self.weights.shape[0]


@dataclass(frozen=True)
class Network:
    layers: tuple[Layer, ...] = field(default_factory=tuple)

    def __post_init__(self):
        layers = tuple(self.layers)
        if not layers:
            raise ValueError("network needs at least one layer")
        for i in range(1, len(layers)):
            if layers[i].d_in != layers[i - 1].d_out:
                raise NetworkFormatError(
                    f"dimension mismatch at layer {i}: expects {layers[i].d_in} inputs, "
                    f"layer {i - 1} produces {layers[i - 1].d_out}"
                )
        object.__setattr__(self, "layers", layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].d_in

    @property
    def output_dim(self) -> int:
        return self.layers[-1].d_out

    @property
    def widths(self) -> list[int]:
        return [self.input_dim] + [layer.d_out for layer in self.layers]

    def __len__(self):
        return len(self.layers)

    def __call__(self, x):
        return forward(self, x)


def forward(net: Network, x) -> np.ndarray:
    """Evaluate the network at one point (shape (n,)) or a batch (shape (m, n))."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != net.input_dim:
        raise ValueError(f"input has dimension {x.shape[-1]}, network expects {net.input_dim}")
    for layer in net.layers:
        x = layer.activation(x @ layer.weights.T + layer.bias)
    return x


def slice_network(net: Network, from_layer: int, to_layer: int) -> Network:
    """Sub-network made of layers ``from_layer..to_layer`` inclusive."""
    n = len(net.layers)
    if not (0 <= from_layer <= to_layer < n):
        raise IndexError(f"slice({from_layer}, {to_layer}) out of range for {n} layers")
    return Network(net.layers[from_layer : to_layer + 1])


# -- on-disk format ---------------------------------------------------------


def network_to_doc(net: Network) -> dict[str, Any]:
    return {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": layer.activation.to_doc(),
            }
            for layer in net.layers
        ],
    }


def load_network(doc: dict[str, Any]) -> Network:
    if not isinstance(doc, dict) or "layers" not in doc:
        raise NetworkFormatError("document has no 'layers' list")
    if doc.get("format", FORMAT_TAG) != FORMAT_TAG:
        raise NetworkFormatError(f"unexpected format tag {doc.get('format')!r}")
    if int(doc.get("version", FORMAT_VERSION)) != FORMAT_VERSION:
        raise NetworkFormatError(f"unsupported version {doc.get('version')!r}")
    layers = []
    prev_out = None
    for i, rec in enumerate(doc["layers"]):
        try:
            w = np.array(rec["weights"], dtype=float)
            b = np.array(rec["bias"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise NetworkFormatError(f"layer {i}: malformed weights/bias ({exc})") from None
        if w.ndim != 2:
            raise NetworkFormatError(f"layer {i}: weights must be a 2-D array")
        if b.ndim != 1 or b.shape[0] != w.shape[0]:
            raise NetworkFormatError(f"layer {i}: bias length does not match {w.shape[0]} weight rows")
        if prev_out is not None and w.shape[1] != prev_out:
            raise NetworkFormatError(
                f"dimension mismatch at layer {i}: weights are {w.shape[0]}x{w.shape[1]} "
                f"but previous layer has width {prev_out}"
            )
        act = Activation.parse(rec.get("activation", "identity"))
        layers.append(Layer(w, b, act))
        prev_out = w.shape[0]
    return Network(tuple(layers))


def dumps_network(net: Network) -> str:
    # repr-based float output is shortest-round-trip, hence lossless
    return json.dumps(network_to_doc(net), indent=1) + "\n"


def loads_network(text: str) -> Network:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"not a network document: {exc}") from None
    return load_network(doc)


def save_network(net: Network, path: str | Path) -> None:
    Path(path).write_text(dumps_network(net))


def read_network(path: str | Path) -> Network:
    return loads_network(Path(path).read_text())


def identity_network(n: int) -> Network:
    return Network((Layer(np.eye(n), np.zeros(n), IDENTITY),))


def from_arrays(weights: Sequence, biases: Sequence, activations: Sequence[Activation | str]) -> Network:
    acts = [a if isinstance(a, Activation) else Activation.parse(a) for a in activations]
    return Network(tuple(Layer(w, b, a) for w, b, a in zip(weights, biases, acts)))


def example_network() -> Network:
    """The 2-4-3-2 sigmoid/identity network with the fixed reference weights."""
    w1 = [[-0.3143, -1.2349], [0.6374, 0.0476], [0.5337, 0.9933], [0.1006, -0.3207]]
    b1 = [0.9499, 0.7459, 1.8229, -0.7684]
    w2 = [
        [0.7289, -0.8494, 1.0250, -1.2558],
        [1.4836, -1.2679, 1.8014, -0.8406],
        [-0.0152, 1.8449, 0.6851, -1.7672],
    ]
    b2 = [-1.8237, -0.8818, -1.3181]
    w3 = [[0.7084, -0.5921, 1.1720], [1.6097, -1.5994, -0.1263]]
    b3 = [0.7494, 0.7323]
    return from_arrays([w1, w2, w3], [b1, b2, b3], [SIGMOID, SIGMOID, IDENTITY])


def random_network(widths: Sequence[int], activation: Activation | str, rng: np.random.Generator,
                   output_activation: Activation | str = IDENTITY) -> Network:
    """Uniform [-1, 1] parameters scaled by 1/sqrt(fan_in)."""
    act = activation if isinstance(activation, Activation) else Activation.parse(activation)
    out_act = output_activation if isinstance(output_activation, Activation) else Activation.parse(output_activation)
    layers = []
    for i, (d_in, d_out) in enumerate(zip(widths[:-1], widths[1:])):
        scale = 1.0 / math.sqrt(d_in)
        w = rng.uniform(-1.0, 1.0, size=(d_out, d_in)) * scale
        b = rng.uniform(-1.0, 1.0, size=d_out) * scale
        layers.append(Layer(w, b, out_act if i == len(widths) - 2 else act))
    return Network(tuple(layers))
