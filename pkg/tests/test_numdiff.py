import numpy as np
import pytest

from smsnroc import numdiff


def cubic(v):
    x, y, z = v
    return x**3 + 2 * x * y**2 - 3 * y * z + z**3 * x


def cubic_hessian(v):
    x, y, z = v
    return np.array([
        [6 * x, 4 * y, 3 * z**2],
        [4 * y, 4 * x, -3.0],
        [3 * z**2, -3.0, 6 * z * x],
    ])


def test_derivative_of_sin():
    x = np.linspace(-3, 3, 7)
    assert np.allclose(numdiff.derivative(np.sin, x), np.cos(x), atol=1e-11)


def test_gradient_quadratic_is_exact():
    A = np.array([[3.0, 1.0], [1.0, 2.0]])
    f = lambda v: 0.5 * v @ A @ v
    v = np.array([0.7, -1.3])
    assert np.allclose(numdiff.gradient(f, v), A @ v, atol=1e-10)


@pytest.mark.parametrize("point", [(0.3, -0.5, 1.2), (1.0, 2.0, -1.0), (-2.5, 0.1, 0.4)])
def test_hessian_matches_cubic(point):
    v = np.array(point)
    assert np.allclose(numdiff.hessian(cubic, v), cubic_hessian(v), atol=1e-8)


def test_hessian_is_symmetric():
    f = lambda v: np.exp(v[0] * v[1]) + np.sin(v[1] * v[2])
    H = numdiff.hessian(f, np.array([0.2, 0.4, -0.3]))
    assert np.array_equal(H, H.T)


def test_extrapolation_beats_plain_central_difference():
    f, x, h = np.exp, 1.0, 1e-2
    plain = (f(x + h) - f(x - h)) / (2 * h)
    rich = numdiff.derivative(f, x, h)
    assert abs(rich - np.e) < abs(plain - np.e) * 1e-4


def test_vector_valued_gradient_shape():
    f = lambda v: np.array([v[0] * v[1], v[0] + v[1], v[1] ** 2])
    J = numdiff.gradient(f, np.array([1.0, 2.0]))
    assert J.shape == (2, 3)
    assert np.allclose(J, [[2.0, 1.0, 0.0], [1.0, 1.0, 4.0]], atol=1e-10)
