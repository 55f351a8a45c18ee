"""Gauss-Legendre rules on the unit cell and their integration matrices."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre


@lru_cache(maxsize=None)
def gauss_unit(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the ``order``-point rule on [0, 1]."""
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    x, w = legendre.leggauss(order)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def partial_weights(nodes: np.ndarray, upper) -> np.ndarray:
    """Weights ``W[k, j]`` with ``int_0^{upper_k} p = sum_j W[k, j] p(nodes_j)``.

    Exact for polynomials of degree < len(nodes) on [0, 1]; works with any
    distinct nodes.
    """
    nodes = np.asarray(nodes, dtype=float)
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    q = len(nodes)
    vander = legendre.legvander(2.0 * nodes - 1.0, q - 1)
    inv = np.linalg.inv(vander)  # columns -> Legendre coefficients
    out = np.empty((len(upper), q))
    for j in range(q):
        coeffs = inv[:, j]
        # integral in y = 2x - 1, then rescale dx = dy / 2
        anti = legendre.legint(coeffs, lbnd=-1.0)
        out[:, j] = 0.5 * legendre.legval(2.0 * upper - 1.0, anti)
    return out


@lru_cache(maxsize=None)
def integration_matrix(order: int) -> np.ndarray:
    """``A[q, j] = int_0^{x_q} l_j`` for the Gauss nodes ``x_q`` of ``order``."""
    nodes, _ = gauss_unit(order)
    mat = partial_weights(nodes, nodes)
    mat.setflags(write=False)
    return mat


def composite(nodes: np.ndarray, order: int):
    """Per-cell Gauss points and weights on a mesh.

    Returns ``(t, w, cell, local)`` flattened cell-major.
    """
    nodes = np.asarray(nodes, dtype=float)
    xi, wi = gauss_unit(order)
    h = np.diff(nodes)
    t = (nodes[:-1, None] + h[:, None] * xi[None, :]).ravel()
    w = (h[:, None] * wi[None, :]).ravel()
    cell = np.repeat(np.arange(len(h)), order)
    local = np.tile(np.arange(order), len(h))
    return t, w, cell, local
