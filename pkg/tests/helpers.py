"""Shared oracles for the test suite."""

import numpy as np

FIXTURE_LAGRANGIANS = {
    "dirichlet": "d1x[1]^2",
    "beam": "d2x[1]^2",
    "mania": "(x[1]^3 - t)^2 * d1x[1]^6",
    "example_cv90": "abs(x[1]^2 - d1x[1]^5)^2 * abs(d2x[1])^22 + 0.001*d2x[1]^2",
    "superlinear_h4": "d2x[1]*(1 + d1x[1]^2) + d2x[1]^3/3",
}


def central_gradient(f, z, h=1e-5):
    """Central differences of a scalar function of a flat coordinate vector."""
    z = np.asarray(z, dtype=float)
    g = np.empty_like(z)
    for k in range(len(z)):
        e = np.zeros_like(z)
        e[k] = h
        g[k] = (f(z + e) - f(z - e)) / (2 * h)
    return g


def relative_error(approx, exact, floor=1e-8):
    """Max relative error over entries with |exact| > floor."""
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    mask = np.abs(exact) > floor
    if not np.any(mask):
        return float(np.max(np.abs(approx - exact)))
    return float(np.max(np.abs(approx[mask] - exact[mask]) / np.abs(exact[mask])))
