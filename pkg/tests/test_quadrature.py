import numpy as np
import pytest

from hovar import quadrature


@pytest.mark.parametrize("order", [1, 3, 8, 12])
def test_gauss_exact_degree(order):
    x, w = quadrature.gauss_unit(order)
    for d in range(2 * order):
        assert np.isclose(np.sum(w * x**d), 1.0 / (d + 1), rtol=1e-13, atol=1e-15)


def test_partial_weights_exact_for_polynomials():
    x, _ = quadrature.gauss_unit(6)
    upper = np.array([0.0, 0.25, 0.6, 1.0])
    W = quadrature.partial_weights(x, upper)
    for d in range(6):
        assert np.allclose(W @ x**d, upper ** (d + 1) / (d + 1), atol=1e-14)


def test_integration_matrix_is_cached_and_readonly():
    A = quadrature.integration_matrix(5)
    assert A is quadrature.integration_matrix(5)
    with pytest.raises(ValueError):
        A[0, 0] = 1.0


def test_composite_rule():
    nodes = np.array([0.0, 0.1, 0.5, 1.0])
    t, w, cell, local = quadrature.composite(nodes, 4)
    assert len(t) == 12 and np.isclose(w.sum(), 1.0)
    assert np.isclose(np.sum(w * t**5), 1 / 6)
    assert list(cell[:5]) == [0, 0, 0, 0, 1] and list(local[:5]) == [0, 1, 2, 3, 0]


def test_rejects_bad_order():
    with pytest.raises(ValueError):
        quadrature.gauss_unit(0)
