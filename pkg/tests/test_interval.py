import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import EXAMPLE_BOX, boxes, networks, sub_boxes
from setboundary.interval import (
    MAX_DET_DIM,
    Box,
    Interval,
    IntervalError,
    IntervalMatrix,
    act_deriv_interval,
    act_interval,
    add_down,
    add_up,
    affine_image,
    ibp_forward,
    interval_det,
    interval_jacobian,
    iv_add,
    iv_mul,
    iv_neg,
    mul_down,
    mul_up,
)
from setboundary.model import IDENTITY, SIGMOID, TANH, Activation, Kind, Layer, Network, forward, identity_network
from setboundary.oracle import point_jacobians

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_scalar_examples():
    assert iv_add(Interval(0, 1), Interval(2, 3)) == Interval(2, 4)
    assert iv_mul(Interval(-1, 2), Interval(3, 3)) == Interval(-3, 6)
    assert iv_mul(Interval(-1, 1), Interval(-1, 1)) == Interval(-1, 1)
    assert iv_neg(Interval(-1, 2)) == Interval(-2, 1)


def test_inexact_results_are_widened():
    r = iv_add(Interval(0.1, 0.1), Interval(0.2, 0.2))
    assert r.lo < r.hi
    assert r.lo <= 0.30000000000000004 and 0.3 <= r.hi
    third = Interval(1, 1) / Interval(3, 3)
    assert third.lo < 1 / 3 < third.hi


def test_overflow_raises():
    with pytest.raises(IntervalError):
        Interval(1e308, 1e308) * Interval(10, 10)


@settings(max_examples=300)
@given(finite, finite)
def test_directed_rounding_brackets_exact_result(a, b):
    from fractions import Fraction

    exact_s = Fraction(a) + Fraction(b)
    assert Fraction(float(add_down(a, b))) <= exact_s <= Fraction(float(add_up(a, b)))
    exact_p = Fraction(a) * Fraction(b)
    assert Fraction(float(mul_down(a, b))) <= exact_p <= Fraction(float(mul_up(a, b)))


@settings(max_examples=200)
@given(finite, finite, finite, finite, st.data())
def test_mul_contains_all_products(a, b, c, d, data):
    x = Interval(min(a, b), max(a, b))
    y = Interval(min(c, d), max(c, d))
    r = x * y
    t = data.draw(st.floats(0, 1))
    u = data.draw(st.floats(0, 1))
    px = x.lo + t * (x.hi - x.lo)
    py = y.lo + u * (y.hi - y.lo)
    px = min(max(px, x.lo), x.hi)
    py = min(max(py, y.lo), y.hi)
    from fractions import Fraction

    assert Fraction(r.lo) <= Fraction(px) * Fraction(py) <= Fraction(r.hi)


def test_affine_examples():
    b = Box([0, 0], [1, 1])
    out = affine_image(np.eye(2), np.zeros(2), b)
    assert out.lo == pytest.approx([0, 0], abs=1e-14) and out.hi == pytest.approx([1, 1], abs=1e-14)
    assert b.issubset(out)
    out = affine_image([[1.0, 1.0]], [0.0], b)
    assert out.lo[0] == pytest.approx(0, abs=1e-14) and out.hi[0] == pytest.approx(2, abs=1e-14)
    assert out.lo[0] <= 0 and out.hi[0] >= 2
    with pytest.raises(ValueError):
        affine_image([[1.0, 1.0, 1.0]], [0.0], b)


def test_first_layer_sigmoid_image_matches_reference(net2432):
    layer = net2432.layers[0]
    pre = affine_image(layer.weights, layer.bias, EXAMPLE_BOX)
    img = Box.from_intervals(act_interval(SIGMOID, iv) for iv in pre)
    expected = [[0.5437, 0.8487], [0.5995, 0.7481], [0.7426, 0.9300], [0.2731, 0.3641]]
    np.testing.assert_allclose(img.to_list(), expected, atol=5e-4)


def test_act_interval_examples():
    z = act_interval(TANH, Interval(0, 0))
    assert z.lo <= 0 <= z.hi and z.width < 1e-300
    s = act_interval(SIGMOID, Interval(0, 0))
    assert s.lo <= 0.5 <= s.hi and s.width < 1e-11
    s = act_interval(SIGMOID, Interval(-1, 1))
    assert s.lo == pytest.approx(0.2689414213699951, rel=1e-11)
    assert s.hi == pytest.approx(0.7310585786300049, rel=1e-11)
    assert s.lo <= 0.2689414213699951 and s.hi >= 0.7310585786300049


def test_act_deriv_interval_examples():
    t = act_deriv_interval(TANH, Interval(-1, 1))
    assert t.lo == pytest.approx(0.41997434161402614, rel=1e-11) and t.hi == 1.0
    s = act_deriv_interval(SIGMOID, Interval(0, 0))
    assert s.lo <= 0.25 <= s.hi and s.width < 1e-12
    assert act_deriv_interval(IDENTITY, Interval(-3, 5)) == Interval(1, 1)


@pytest.mark.parametrize(
    "act",
    [TANH, SIGMOID, Activation(Kind.LEAKY_RELU, 0.1), Activation(Kind.LEAKY_RELU, 3.0), Activation(Kind.ELU, 0.7)],
)
@pytest.mark.parametrize("lo, hi", [(-3, -1), (-1, 2), (0, 0), (0.5, 4), (-2, 0), (0, 1)])
def test_deriv_interval_sound_by_sampling(act, lo, hi):
    iv = act_deriv_interval(act, Interval(lo, hi))
    xs = np.linspace(lo, hi, 2001)
    d = act.derivative(xs)
    assert np.all(d >= iv.lo) and np.all(d <= iv.hi)
    v = act_interval(act, Interval(lo, hi))
    vals = act(xs)
    assert np.all(vals >= v.lo) and np.all(vals <= v.hi)


def test_ibp_reference_values(net2432):
    out, bounds = ibp_forward(net2432, EXAMPLE_BOX)
    np.testing.assert_allclose(out.to_list(), [[0.8952, 1.2753], [-0.2896, 0.2783]], atol=5e-4)
    assert len(bounds.pre_activation) == 3
    assert bounds.post_activation[-1] == out


def test_ibp_identity_and_point(net2432):
    b = Box([-1, 2], [3, 2.5])
    out, _ = ibp_forward(identity_network(2), b)
    assert b.issubset(out)
    np.testing.assert_allclose(out.lo, b.lo, atol=1e-14)
    np.testing.assert_allclose(out.hi, b.hi, atol=1e-14)
    p = np.array([0.1, -0.3])
    out, _ = ibp_forward(net2432, Box.point(p))
    assert out.contains(forward(net2432, p))
    assert np.all(out.width <= 1e-9)


@settings(max_examples=25, deadline=None)
@given(networks(), st.data())
def test_ibp_soundness(net, data):
    x = data.draw(boxes(net.input_dim))
    out, _ = ibp_forward(net, x)
    pts = x.sample(100_000, np.random.default_rng(0))
    assert np.all(out.contains(forward(net, pts)))
    corners = np.array(np.meshgrid(*[[l, h] for l, h in zip(x.lo, x.hi)], indexing="ij")).reshape(x.dim, -1).T
    assert np.all(out.contains(forward(net, corners)))


@settings(max_examples=60, deadline=None)
@given(networks(), st.data())
def test_ibp_inclusion_isotonic(net, data):
    y = data.draw(boxes(net.input_dim))
    x = data.draw(sub_boxes(y))
    assert ibp_forward(net, x)[0].issubset(ibp_forward(net, y)[0])
    layer = net.layers[0]
    assert affine_image(layer.weights, layer.bias, x).issubset(affine_image(layer.weights, layer.bias, y))
    for i in range(x.dim):
        assert act_interval(layer.activation, x[i]) in act_interval(layer.activation, y[i])


@settings(max_examples=30, deadline=None)
@given(networks(), st.data())
def test_refinement_dominance(net, data):
    from setboundary.geometry import partition_box

    x = data.draw(boxes(net.input_dim, radius=1.0))
    k = data.draw(st.integers(1, 4))
    whole = ibp_forward(net, x)[0]
    cells = partition_box(x, k)
    hull = ibp_forward(net, cells[0])[0]
    for c in cells[1:]:
        hull = hull.hull(ibp_forward(net, c)[0])
    assert hull.issubset(whole)


def test_jacobian_examples(net2432):
    j = interval_jacobian(identity_network(2), Box([0, 0], [1, 1]))
    assert j.contains(np.eye(2))
    np.testing.assert_allclose(j.lo, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(j.hi, np.eye(2), atol=1e-14)
    net = Network((Layer([[2.0]], [0.0], TANH),))
    j = interval_jacobian(net, Box([0.0], [0.0]))
    assert j.lo[0, 0] == pytest.approx(2.0, rel=1e-11) and j.hi[0, 0] == pytest.approx(2.0, rel=1e-11)
    assert j.contains([[2.0]])


def test_jacobian_example_network_sampled(net2432):
    j = interval_jacobian(net2432, EXAMPLE_BOX)
    pts = EXAMPLE_BOX.sample(1000, np.random.default_rng(1))
    jacs = point_jacobians(net2432, pts)
    assert np.all(jacs >= j.lo) and np.all(jacs <= j.hi)


@settings(max_examples=40, deadline=None)
@given(networks(smooth_only=False), st.data())
def test_jacobian_and_det_soundness(net, data):
    x = data.draw(boxes(net.input_dim, radius=1.0))
    j = interval_jacobian(net, x)
    pts = x.sample(500, np.random.default_rng(2))
    jacs = point_jacobians(net, pts)
    assert np.all(jacs >= j.lo) and np.all(jacs <= j.hi)
    if net.input_dim == net.output_dim:
        d = interval_det(j)
        dets = np.linalg.det(jacs)
        slack = 1e-12 * np.maximum(1, np.abs(dets))
        assert np.all(dets >= d.lo - slack) and np.all(dets <= d.hi + slack)


def test_det_examples():
    assert interval_det(IntervalMatrix.point(np.eye(3))) == Interval(1, 1)
    m = IntervalMatrix([[1, 0], [0, 1]], [[2, 0], [0, 2]])
    assert interval_det(m) == Interval(1, 4)
    with pytest.raises(ValueError):
        interval_det(IntervalMatrix.point(np.eye(MAX_DET_DIM + 1)))


def _exact_det(m):
    from fractions import Fraction

    a = [[Fraction(v) for v in row] for row in m]
    n = len(a)
    det = Fraction(1)
    for k in range(n):
        p = next((i for i in range(k, n) if a[i][k] != 0), None)
        if p is None:
            return Fraction(0)
        if p != k:
            a[k], a[p] = a[p], a[k]
            det = -det
        det *= a[k][k]
        for i in range(k + 1, n):
            f = a[i][k] / a[k][k]
            a[i] = [a[i][j] - f * a[k][j] for j in range(n)]
    return det


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6, 8])
def test_det_sampled_points_inside(n):
    from fractions import Fraction

    rng = np.random.default_rng(n)
    for trial in range(3):
        mid = rng.normal(size=(n, n)) + 2 * n * np.eye(n) * (trial == 0)
        rad = rng.uniform(0, 0.05, size=(n, n))
        m = IntervalMatrix(mid - rad, mid + rad)
        d = interval_det(m)
        samples = 1000 if n <= 4 else 50
        for _ in range(samples):
            p = mid + rad * rng.uniform(-1, 1, size=(n, n))
            p = np.clip(p, m.lo, m.hi)
            exact = _exact_det(p)
            assert Fraction(d.lo) <= exact <= Fraction(d.hi)


def test_det_elimination_agrees_with_point_det():
    rng = np.random.default_rng(3)
    m = rng.normal(size=(6, 6)) + 6 * np.eye(6)
    d = interval_det(IntervalMatrix.point(m))
    assert d.lo <= np.linalg.det(m) * (1 + 1e-12) and d.hi >= np.linalg.det(m) * (1 - 1e-12)
    assert d.width < 1e-9 * abs(np.linalg.det(m))


def test_det_zero_pivot_returns_enclosure_of_zero():
    m = IntervalMatrix(-np.ones((5, 5)), np.ones((5, 5)))
    d = interval_det(m)
    assert d.contains_zero()
    assert math.isfinite(d.lo) and d.hi >= 5 ** 2.5 - 1e-9
