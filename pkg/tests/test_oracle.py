import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import EXAMPLE_BOX, boxes, networks
from setboundary.geometry import SafeSet
from setboundary.interval import Box, Interval, ibp_forward
from setboundary.model import SIGMOID, Layer, Network, identity_network
from setboundary.oracle import (
    falsify,
    finite_difference_jacobian,
    mc_reach,
    point_jacobian,
    point_jacobians,
)
from setboundary.verify import VerifyConfig, verify_openmap
from setboundary.zonotope import zono_forward


def test_mc_identity_hull():
    cloud = mc_reach(identity_network(2), Box([0, 0], [1, 1]), 10_000, seed=1)
    assert cloud.hull.issubset(Box([0, 0], [1, 1]))
    assert np.all(cloud.hull.width >= 0.95)


def test_mc_point_box(net2432):
    cloud = mc_reach(net2432, Box.point([0.1, 0.2]), 50, seed=3)
    assert np.all(cloud.outputs == cloud.outputs[0])


def test_mc_inside_enclosures(net2432):
    cloud = mc_reach(net2432, EXAMPLE_BOX, 100_000, seed=5)
    assert cloud.hull.issubset(ibp_forward(net2432, EXAMPLE_BOX)[0])
    assert cloud.hull.issubset(verify_openmap(net2432, EXAMPLE_BOX, None, VerifyConfig(max_rounds=1)).final_hull)
    assert cloud.hull.issubset(zono_forward(net2432, EXAMPLE_BOX)[0])


def test_mc_deterministic_and_stream_split(net2432):
    a = mc_reach(net2432, EXAMPLE_BOX, 1000, seed=9, streams=4)
    b = mc_reach(net2432, EXAMPLE_BOX, 1000, seed=9, streams=4)
    np.testing.assert_array_equal(a.inputs, b.inputs)
    np.testing.assert_array_equal(a.outputs, b.outputs)
    c = mc_reach(net2432, EXAMPLE_BOX, 1000, seed=10, streams=4)
    assert not np.array_equal(a.inputs, c.inputs)
    with pytest.raises(ValueError):
        mc_reach(net2432, EXAMPLE_BOX, 0)


def test_sample_cloud_csv(tmp_path, net2432):
    cloud = mc_reach(net2432, EXAMPLE_BOX, 20, seed=0)
    path = tmp_path / "cloud.csv"
    cloud.to_csv(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(data[:, :2], cloud.inputs)
    np.testing.assert_array_equal(data[:, 2:], cloud.outputs)
    assert path.read_text().splitlines()[0] == "x0,x1,y0,y1"


def test_point_jacobian_examples():
    np.testing.assert_array_equal(point_jacobian(identity_network(3), [1, 2, 3]), np.eye(3))
    net = Network((Layer([[1.0]], [0.0], SIGMOID),))
    assert point_jacobian(net, [0.0])[0, 0] == 0.25


@settings(max_examples=60, deadline=None)
@given(networks(), st.data())
def test_point_jacobian_matches_finite_differences(net, data):
    x = data.draw(boxes(net.input_dim, radius=1.5)).center
    # keep clear of the LeakyReLU/ELU kink where central differences straddle two slopes
    pre = x
    for layer in net.layers:
        z = layer.weights @ pre + layer.bias
        if np.any(np.abs(z) < 1e-4):
            return
        pre = layer.activation(z)
    j = point_jacobian(net, x)
    np.testing.assert_allclose(j, finite_difference_jacobian(net, x), atol=1e-5)
    np.testing.assert_allclose(point_jacobians(net, x[None, :])[0], j, rtol=1e-12, atol=1e-15)


def test_falsify_examples():
    net = identity_network(2)
    x = Box([0, 0], [1, 1])
    assert falsify(net, x, SafeSet((Interval(0, 1), Interval(0, 1))), 10_000) is None
    cex = falsify(net, x, SafeSet((Interval(0.2, 0.8), Interval(0.2, 0.8))), 10_000)
    assert cex is not None
    assert not SafeSet((Interval(0.2, 0.8), Interval(0.2, 0.8))).contains_points(cex)
