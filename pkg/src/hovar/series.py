"""Truncated power series arithmetic.

A series is a list ``[c0, c1, ..., cK]`` standing for ``sum_j c_j h**j``
truncated after ``h**K``.  Coefficients can be floats, numpy arrays (one
series per sample, evaluated in lock-step) or :class:`~hovar.dual.Dual`
numbers, so the same code propagates derivatives through series operations.
"""

from __future__ import annotations

import math

from . import dual


def truncate(a, order):
    return list(a[: order + 1])


def add(a, b):
    order = min(len(a), len(b)) - 1
    return [a[j] + b[j] for j in range(order + 1)]


def scale(a, c):
    return [c * x for x in a]


def mul(a, b, order=None):
    if order is None:
        order = min(len(a), len(b)) - 1
    out = []
    for k in range(order + 1):
        acc = a[0] * b[k]
        for j in range(1, k + 1):
            acc = acc + a[j] * b[k - j]
        out.append(acc)
    return out


def reciprocal(a):
    """1/a, requires a nonzero constant term."""
    inv0 = 1.0 / a[0]
    out = [inv0]
    for k in range(1, len(a)):
        acc = a[1] * out[k - 1]
        for j in range(2, k + 1):
            acc = acc + a[j] * out[k - j]
        out.append(-acc * inv0)
    return out


def sqrt(a):
    """Square root of a series with positive constant term."""
    r0 = dual.sqrt(a[0])
    out = [r0]
    two_r0 = 2.0 * r0
    for k in range(1, len(a)):
        acc = a[k]
        for j in range(1, k):
            acc = acc - out[j] * out[k - j]
        out.append(acc / two_r0)
    return out


def derivative(a):
    """d/dh, one order shorter."""
    return [j * a[j] for j in range(1, len(a))]


def integral(a, const=0.0):
    """Antiderivative with the given constant term, one order longer."""
    return [const] + [a[j] / (j + 1) for j in range(len(a))]


def compose(f, g, order=None):
    """f(g(h)) for a series g with zero constant term (Horner scheme)."""
    if order is None:
        order = len(g) - 1
    order = min(order, len(g) - 1)
    g = truncate(g, order)
    zero = 0.0 * g[1] if len(g) > 1 else 0.0
    result = [f[-1] + zero] + [zero] * order
    for j in range(len(f) - 2, -1, -1):
        result = mul(result, g, order)
        result[0] = result[0] + f[j]
    return result


def revert(a):
    """Inverse series: given y = a(tau) with a0 = 0, a1 != 0, return tau(y)."""
    order = len(a) - 1
    inv1 = 1.0 / a[1]
    zero = 0.0 * a[1]
    higher = [zero, zero] + list(a[2:])  # a(tau) - a1*tau
    tau = [zero, inv1] + [zero] * (order - 1)
    identity = [zero, 1.0 + zero] + [zero] * (order - 1)
    for _ in range(order - 1):
        rest = compose(higher, tau, order)
        tau = [(identity[j] - rest[j]) * inv1 for j in range(order + 1)]
    return tau


def derivatives(a):
    """Convert Taylor coefficients to derivative values f^(j)(0)."""
    return [math.factorial(j) * c for j, c in enumerate(a)]


def from_derivatives(d):
    return [c / math.factorial(j) for j, c in enumerate(d)]
