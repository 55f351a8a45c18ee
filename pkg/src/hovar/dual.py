"""Forward-mode automatic differentiation with vectorised dual numbers.

A :class:`Dual` carries a value together with its gradient (and optionally
its Hessian) with respect to ``D`` seeded input directions.  Every field may
be a numpy array, so one pass of an expression tree evaluates derivatives at
many points at once: ``val`` has shape ``S``, ``grad`` has shape ``(D, *S)``
and ``hess`` has shape ``(D, D, *S)``.

Second-order propagation is the truncated multivariate Taylor expansion that
forward-over-forward differentiation produces, written out directly.
"""

from __future__ import annotations

import numpy as np


class EvaluationError(ArithmeticError):
    """Raised when an expression cannot be evaluated to a finite number."""


class Dual:
    __slots__ = ("val", "grad", "hess")
    __array_ufunc__ = None  # make numpy defer to our reflected operators

    def __init__(self, val, grad, hess=None):
        self.val = val
        self.grad = grad
        self.hess = hess

    # -- construction -----------------------------------------------------
    @classmethod
    def variables(cls, values, second_order=False):
        """Seed one independent variable per entry of ``values``.

        Each value may be a scalar or an array; all must broadcast to one
        common shape.
        """
        arrays = np.broadcast_arrays(*[np.asarray(v, dtype=float) for v in values])
        dim = len(arrays)
        shape = arrays[0].shape if arrays else ()
        out = []
        for k, v in enumerate(arrays):
            grad = np.zeros((dim,) + shape)
            grad[k] = 1.0
            hess = np.zeros((dim, dim) + shape) if second_order else None
            out.append(cls(np.array(v, dtype=float), grad, hess))
        return out

    @property
    def order(self) -> int:
        return 1 if self.hess is None else 2

    @property
    def dim(self) -> int:
        return self.grad.shape[0]

    # -- primitive rules --------------------------------------------------
    def _chain(self, f0, f1, f2=None):
        """Apply a scalar function with value f0 and derivatives f1, f2."""
        grad = f1 * self.grad
        hess = None
        if self.hess is not None:
            g = self.grad
            hess = f1 * self.hess + f2 * (g[:, None] * g[None, :])
        return Dual(f0, grad, hess)

    def __add__(self, other):
        if isinstance(other, Dual):
            hess = None
            if self.hess is not None and other.hess is not None:
                hess = self.hess + other.hess
            return Dual(self.val + other.val, self.grad + other.grad, hess)
        val = self.val + other
        grad = np.broadcast_to(self.grad, (self.dim,) + np.shape(val))
        hess = None
        if self.hess is not None:
            hess = np.broadcast_to(self.hess, (self.dim, self.dim) + np.shape(val))
        return Dual(val, grad, hess)

    __radd__ = __add__

    def __neg__(self):
        hess = None if self.hess is None else -self.hess
        return Dual(-self.val, -self.grad, hess)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            a, b = self, other
            grad = a.grad * b.val + b.grad * a.val
            hess = None
            if a.hess is not None and b.hess is not None:
                cross = a.grad[:, None] * b.grad[None, :]
                hess = a.hess * b.val + b.hess * a.val + cross + np.swapaxes(cross, 0, 1)
            return Dual(a.val * b.val, grad, hess)
        hess = None if self.hess is None else self.hess * other
        return Dual(self.val * other, self.grad * other, hess)

    __rmul__ = __mul__

    def reciprocal(self):
        v = self.val
        if np.any(v == 0):
            raise EvaluationError("division by zero")
        inv = 1.0 / v
        return self._chain(inv, -inv * inv, 2.0 * inv * inv * inv)

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self * other.reciprocal()
        if np.any(np.asarray(other) == 0):
            raise EvaluationError("division by zero")
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        return power(self, p)

    def __repr__(self) -> str:
        return f"Dual(val={self.val!r}, grad={self.grad!r})"


# ---------------------------------------------------------------------------
# elementary functions; each accepts a Dual or a plain array


def _check_positive(v, what):
    if np.any(np.asarray(v) <= 0):
        raise EvaluationError(f"{what} of a non-positive number")


def int_power(u, p: int):
    """``u**p`` for integer ``p`` by square-and-multiply (exact at u = 0)."""
    if p == 0:
        return u * 0.0 + 1.0
    if p < 0:
        base = int_power(u, -p)
        if isinstance(base, Dual):
            return base.reciprocal()
        if np.any(np.asarray(base) == 0):
            raise EvaluationError("division by zero")
        return 1.0 / base
    result = None
    square = u
    while p:
        if p & 1:
            result = square if result is None else result * square
        p >>= 1
        if p:
            square = square * square
    return result


def power(u, p):
    if isinstance(p, Dual):
        return exp(p * log(u))
    if float(p).is_integer():
        return int_power(u, int(p))
    p = float(p)
    if isinstance(u, Dual):
        _check_positive(u.val, "non-integer power")
        v = u.val
        return u._chain(v**p, p * v ** (p - 1), p * (p - 1) * v ** (p - 2))
    _check_positive(u, "non-integer power")
    return np.asarray(u, dtype=float) ** p


def sin(u):
    if isinstance(u, Dual):
        s, c = np.sin(u.val), np.cos(u.val)
        return u._chain(s, c, -s)
    return np.sin(u)


def cos(u):
    if isinstance(u, Dual):
        s, c = np.sin(u.val), np.cos(u.val)
        return u._chain(c, -s, -c)
    return np.cos(u)


def exp(u):
    if isinstance(u, Dual):
        e = np.exp(u.val)
        return u._chain(e, e, e)
    return np.exp(u)


def log(u):
    if isinstance(u, Dual):
        _check_positive(u.val, "log")
        inv = 1.0 / u.val
        return u._chain(np.log(u.val), inv, -inv * inv)
    _check_positive(u, "log")
    return np.log(u)


def sqrt(u):
    if isinstance(u, Dual):
        _check_positive(u.val, "sqrt")
        r = np.sqrt(u.val)
        return u._chain(r, 0.5 / r, -0.25 / (r * u.val))
    if np.any(np.asarray(u) < 0):
        raise EvaluationError("sqrt of a negative number")
    return np.sqrt(u)


def absolute(u):
    """|u| with derivative sign(u); sign(0) = 0 by convention."""
    if isinstance(u, Dual):
        sg = np.sign(u.val)
        return u._chain(np.abs(u.val), sg, np.zeros_like(sg))
    return np.abs(u)


FUNCTIONS = {
    "sin": sin,
    "cos": cos,
    "exp": exp,
    "log": log,
    "sqrt": sqrt,
    "abs": absolute,
}


def value_of(u):
    return u.val if isinstance(u, Dual) else u


def ensure_finite(u, what: str = "expression") -> None:
    parts = [value_of(u)]
    if isinstance(u, Dual):
        parts.append(u.grad)
        if u.hess is not None:
            parts.append(u.hess)
    for part in parts:
        if not np.all(np.isfinite(part)):
            raise EvaluationError(f"{what} evaluated to a non-finite number")


def as_float(x) -> float:
    return float(np.asarray(x).reshape(()))


__all__ = [
    "Dual",
    "EvaluationError",
    "FUNCTIONS",
    "power",
    "int_power",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "absolute",
    "ensure_finite",
    "value_of",
    "as_float",
]
