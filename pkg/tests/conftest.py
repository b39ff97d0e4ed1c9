import numpy as np
import pytest
from hypothesis import strategies as st

from setboundary.interval import Box
from setboundary.model import SIGMOID, TANH, Activation, Kind, example_network, identity_network, random_network

EXAMPLE_BOX = Box([-0.5, -0.5], [0.5, 0.5])


@pytest.fixture
def net2432():
    return example_network()


@pytest.fixture
def ident2():
    return identity_network(2)


@pytest.fixture
def unit_square():
    return Box([0.0, 0.0], [1.0, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACTIVATIONS = [
    TANH,
    SIGMOID,
    Activation(Kind.LEAKY_RELU, 0.1),
    Activation(Kind.ELU, 1.0),
]


@st.composite
def networks(draw, smooth_only=False, max_width=5, max_layers=3):
    n_layers = draw(st.integers(1, max_layers))
    widths = [draw(st.integers(1, max_width)) for _ in range(n_layers + 1)]
    acts = [TANH, SIGMOID] if smooth_only else ACTIVATIONS
    act = draw(st.sampled_from(acts))
    seed = draw(st.integers(0, 2**31 - 1))
    return random_network(widths, act, np.random.default_rng(seed))


@st.composite
def boxes(draw, dim, radius=2.0):
    lo = np.array([draw(st.floats(-radius, radius)) for _ in range(dim)])
    width = np.array([draw(st.floats(0.0, radius)) for _ in range(dim)])
    return Box(lo, lo + width)


@st.composite
def sub_boxes(draw, box):
    a = np.array([draw(st.floats(0, 1)) for _ in range(box.dim)])
    b = np.array([draw(st.floats(0, 1)) for _ in range(box.dim)])
    lo = box.lo + np.minimum(a, b) * box.width
    hi = box.lo + np.maximum(a, b) * box.width
    return Box(np.clip(lo, box.lo, box.hi), np.clip(hi, box.lo, box.hi))
