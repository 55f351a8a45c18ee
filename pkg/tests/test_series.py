import math

import numpy as np
from numpy.polynomial import polynomial as P

from hovar import series
from hovar.dual import Dual


def test_mul_and_reciprocal_against_numpy():
    a = [1.5, -0.3, 2.0, 0.7]
    b = [0.2, 1.1, -0.4, 0.9]
    assert np.allclose(series.mul(a, b), P.polymul(a, b)[:4])
    inv = series.reciprocal(a)
    assert np.allclose(P.polymul(a, inv)[:4], [1, 0, 0, 0])


def test_sqrt_squares_back():
    a = [2.0, 0.5, -1.0, 0.25, 0.1]
    r = series.sqrt(a)
    assert np.allclose(series.mul(r, r), a)


def test_exp_series_composition():
    # exp(h) composed with g(h) = 2h gives exp(2h)
    order = 6
    f = [1 / math.factorial(j) for j in range(order + 1)]
    g = [0.0, 2.0] + [0.0] * (order - 1)
    out = series.compose(f, g, order)
    assert np.allclose(out, [2.0**j / math.factorial(j) for j in range(order + 1)])


def test_revert_inverts_a_series():
    a = [0.0, 1.3, -0.4, 0.2, 0.05, -0.01]
    inv = series.revert(a)
    ident = series.compose(a, inv, len(a) - 1)
    assert np.allclose(ident, [0, 1, 0, 0, 0, 0], atol=1e-14)
    # atan series reverts to tan: tan(y) = y + y^3/3 + 2y^5/15
    atan = [0.0, 1.0, 0.0, -1 / 3, 0.0, 1 / 5]
    assert np.allclose(series.revert(atan), [0, 1, 0, 1 / 3, 0, 2 / 15])


def test_derivative_integral_roundtrip():
    a = [3.0, 1.0, -2.0, 0.5]
    assert np.allclose(series.derivative(series.integral(a, 7.0)), a)
    assert series.integral(a, 7.0)[0] == 7.0
    assert np.allclose(series.from_derivatives(series.derivatives(a)), a)


def test_series_of_duals_propagates_derivatives():
    (c,) = Dual.variables([0.5])
    a = [c, 1.0 + 0.0 * c, c * c]
    inv = series.reciprocal(a)
    # 1/(c + h + c^2 h^2): constant term 1/c, its derivative -1/c^2
    assert np.isclose(inv[0].val, 2.0)
    assert np.isclose(inv[0].grad[0], -4.0)
    # second coefficient -1/c^2, derivative 2/c^3
    assert np.isclose(inv[1].grad[0], 16.0)


def test_array_coefficients_run_in_lockstep():
    c0 = np.array([1.0, 2.0, 4.0])
    a = [c0, np.ones(3), np.zeros(3)]
    inv = series.reciprocal(a)
    for j in range(3):
        ref = series.reciprocal([c0[j], 1.0, 0.0])
        assert np.allclose([inv[k][j] for k in range(3)], ref)
