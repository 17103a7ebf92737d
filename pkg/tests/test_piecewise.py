import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad

from tmhomog.piecewise import PiecewisePoly

NODES = np.array([0.0, 0.3, 0.65])

coefs = arrays(np.float64, (3, 3), elements=st.floats(-5, 5))


@given(coefs)
def test_mean_matches_adaptive_quadrature(c):
    p = PiecewisePoly(NODES, c)
    ref = sum(quad(lambda y: float(p(y)), a, b)[0] for a, b in zip(NODES, np.append(NODES[1:], 1.0)))
    assert p.mean() == pytest.approx(ref, abs=1e-10)


@given(coefs)
def test_antiderivative_inverts_derivative(c):
    p = PiecewisePoly(NODES, c)
    np.testing.assert_allclose(p.antideriv().deriv().coef, p.coef, atol=1e-13)


@settings(max_examples=50)
@given(coefs, coefs, st.floats(0.0, 0.999))
def test_product_and_sum_pointwise(a, b, y):
    p, q = PiecewisePoly(NODES, a), PiecewisePoly(NODES, b)
    assert (p * q)(y) == pytest.approx(p(y) * q(y), rel=1e-12, abs=1e-10)
    assert (p + q)(y) == pytest.approx(p(y) + q(y), abs=1e-12)
    assert (p - 2.0)(y) == pytest.approx(p(y) - 2.0, abs=1e-12)


def test_jumps_and_node_means():
    p = PiecewisePoly([0.0, 0.5], [[1.0, 2.0], [4.0, 0.0]])  # 1 + 2s on [0, .5), 4 on [.5, 1)
    np.testing.assert_allclose(p.left_limits(), [4.0, 2.0])
    np.testing.assert_allclose(p.jumps(), [-3.0, 2.0])
    np.testing.assert_allclose(p.node_means(), [2.5, 3.0])


def test_batch_axes_broadcast():
    p = PiecewisePoly(NODES, np.ones((4, 3, 2)))
    assert p.mean().shape == (4,)
    assert p[1].coef.shape == (3, 2)
    q = p + np.arange(4.0)[:, None]  # 1 + s + n on every segment
    w = np.diff(np.append(NODES, 1.0))
    np.testing.assert_allclose(q.mean(), 1.0 + np.sum(w**2) / 2 + np.arange(4.0))


def test_mismatched_segmentation_rejected():
    with pytest.raises(ValueError):
        PiecewisePoly([0.0], np.ones((1, 1))) + PiecewisePoly([0.0, 0.5], np.ones((2, 1)))
    with pytest.raises(ValueError):
        PiecewisePoly([0.0, 0.5], np.ones((3, 1)))
