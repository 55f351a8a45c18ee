"""Lagrangian expressions over jet variables.

Grammar (whitespace is insignificant)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := primary ('^' unary)?
    primary := number | 't' | 'x[' int ']' | 'd' int 'x[' int ']'
             | func '(' expr ')' | '(' expr ')'
    func    := sin | cos | exp | log | sqrt | abs

``x[i]`` is the i-th state component and ``dKx[i]`` its K-th derivative, all
1-indexed.  ``^`` is right-associative and binds tighter than unary minus, so
``-x[1]^2`` means ``-(x[1]^2)``.

Expressions evaluate on anything that supports arithmetic: floats, numpy
arrays, or :class:`~hovar.dual.Dual` numbers for derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np

from . import dual
from .dual import Dual, EvaluationError

__all__ = [
    "Expr",
    "Jet",
    "JetGradient",
    "ExprSyntaxError",
    "ShapeError",
    "EvaluationError",
    "parse",
    "evaluate",
    "grad_jet",
    "hess_jet",
]


class ExprSyntaxError(ValueError):
    """Malformed expression source; carries the 0-based offset and line/column."""

    def __init__(self, message: str, source: str, offset: int):
        self.offset = offset
        self.source = source
        before = source[:offset]
        self.line = before.count("\n") + 1
        self.column = offset - (before.rfind("\n") + 1) + 1
        super().__init__(f"{message} at offset {offset} (line {self.line}, column {self.column})")


class ShapeError(ValueError):
    pass


# ---------------------------------------------------------------------------
# tree nodes


@dataclass(frozen=True)
class Const:
    value: float

    def eval(self, t, xs):
        return self.value

    def __str__(self) -> str:
        v = self.value
        if float(v).is_integer() and abs(v) < 1e15:
            return str(int(v))
        return repr(float(v))


@dataclass(frozen=True)
class Var:
    order: int  # -1 for t
    index: int = 0  # 1-based component

    def eval(self, t, xs):
        if self.order < 0:
            return t
        return xs[self.order][self.index - 1]

    def __str__(self) -> str:
        if self.order < 0:
            return "t"
        if self.order == 0:
            return f"x[{self.index}]"
        return f"d{self.order}x[{self.index}]"


@dataclass(frozen=True)
class Neg:
    arg: object

    def eval(self, t, xs):
        return -self.arg.eval(t, xs)

    def __str__(self) -> str:
        return f"(-{self.arg})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    def eval(self, t, xs):
        a = self.left.eval(t, xs)
        b = self.right.eval(t, xs)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        if not isinstance(b, Dual) and np.any(np.asarray(b) == 0):
            raise EvaluationError("division by zero")
        if isinstance(b, Dual) and not isinstance(a, Dual):
            return b.reciprocal() * a
        return a / b

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: object

    def eval(self, t, xs):
        b = self.base.eval(t, xs)
        if isinstance(self.exponent, Const):
            return dual.power(b, self.exponent.value)
        e = self.exponent.eval(t, xs)
        if isinstance(e, Dual):
            return dual.power(b, e)
        e_arr = np.asarray(e, dtype=float)
        if e_arr.ndim == 0:
            return dual.power(b, float(e_arr))
        # array-valued exponent: u^v = exp(v log u)
        return dual.exp(e_arr * dual.log(b))

    def __str__(self) -> str:
        return f"({self.base}^{self.exponent})"


@dataclass(frozen=True)
class Call:
    name: str
    arg: object

    def eval(self, t, xs):
        return dual.FUNCTIONS[self.name](self.arg.eval(t, xs))

    def __str__(self) -> str:
        return f"{self.name}({self.arg})"


def _walk(node):
    yield node
    for child in ("arg", "left", "right", "base", "exponent"):
        sub = getattr(node, child, None)
        if sub is not None:
            yield from _walk(sub)


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, source: str):
        self.src = source
        self.pos = 0

    def error(self, message, offset=None):
        raise ExprSyntaxError(message, self.src, self.pos if offset is None else offset)

    def skip(self):
        while self.pos < len(self.src) and self.src[self.pos].isspace():
            self.pos += 1

    def peek(self):
        self.skip()
        return self.src[self.pos] if self.pos < len(self.src) else ""

    def expect(self, ch):
        if self.peek() != ch:
            found = repr(self.peek()) if self.peek() else "end of input"
            self.error(f"expected {ch!r}, found {found}")
        self.pos += 1

    def integer(self, what):
        self.skip()
        start = self.pos
        if self.peek() and self.peek() in "+-":
            self.error(f"{what} must be a positive integer")
        while self.pos < len(self.src) and self.src[self.pos].isdigit():
            self.pos += 1
        if start == self.pos:
            self.error(f"expected {what}")
        value = int(self.src[start : self.pos])
        if value <= 0:
            self.error(f"{what} must be a positive integer, got {value}", start)
        return value

    def number(self):
        self.skip()
        start = self.pos
        s = self.src
        while self.pos < len(s) and (s[self.pos].isdigit() or s[self.pos] == "."):
            self.pos += 1
        if self.pos < len(s) and s[self.pos] in "eE":
            save = self.pos
            self.pos += 1
            if self.pos < len(s) and s[self.pos] in "+-":
                self.pos += 1
            if self.pos < len(s) and s[self.pos].isdigit():
                while self.pos < len(s) and s[self.pos].isdigit():
                    self.pos += 1
            else:
                self.pos = save
        try:
            return Const(float(s[start : self.pos]))
        except ValueError:
            self.error(f"malformed number {s[start:self.pos]!r}", start)

    def ident(self):
        self.skip()
        start = self.pos
        while self.pos < len(self.src) and self.src[self.pos].isalpha():
            self.pos += 1
        return self.src[start : self.pos], start

    def parse(self):
        node = self.expr()
        if self.peek():
            self.error(f"unexpected {self.peek()!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek() and self.peek() in "+-":
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek() and self.peek() in "*/":
            op = self.src[self.pos]
            self.pos += 1
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        ch = self.peek()
        if ch == "-":
            self.pos += 1
            return Neg(self.unary())
        if ch == "+":
            self.pos += 1
            return self.unary()
        return self.power()

    def power(self):
        base = self.primary()
        if self.peek() == "^":
            self.pos += 1
            return Pow(base, self.unary())
        return base

    def primary(self):
        ch = self.peek()
        if not ch:
            self.error("unexpected end of input")
        if ch.isdigit() or ch == ".":
            return self.number()
        if ch == "(":
            self.pos += 1
            node = self.expr()
            self.expect(")")
            return node
        if ch.isalpha():
            name, start = self.ident()
            if name == "t":
                return Var(-1)
            if name == "x":
                self.expect("[")
                i = self.integer("component index")
                self.expect("]")
                return Var(0, i)
            if name == "d":
                k = self.integer("derivative order")
                name2, start2 = self.ident()
                if name2 != "x":
                    self.error("expected 'x' after derivative order", start2)
                self.expect("[")
                i = self.integer("component index")
                self.expect("]")
                return Var(k, i)
            if name in dual.FUNCTIONS:
                self.expect("(")
                node = self.expr()
                self.expect(")")
                return Call(name, node)
            self.error(f"unknown identifier {name!r}", start)
        self.error(f"unexpected {ch!r}")


# ---------------------------------------------------------------------------
# public types


@dataclass(frozen=True)
class Jet:
    """A point (t, x^0, ..., x^m) with every x^k a vector of length n."""

    t: float
    x: tuple

    def __post_init__(self):
        levels = tuple(tuple(float(v) for v in level) for level in self.x)
        if not levels:
            raise ShapeError("a jet needs at least the x^0 level")
        n = len(levels[0])
        if any(len(level) != n for level in levels):
            raise ShapeError("all derivative levels of a jet must have the same length")
        object.__setattr__(self, "x", levels)
        object.__setattr__(self, "t", float(self.t))

    @property
    def m(self) -> int:
        return len(self.x) - 1

    @property
    def n(self) -> int:
        return len(self.x[0])

    def coordinates(self) -> np.ndarray:
        """Flat vector (t, x^0_1, ..., x^0_n, x^1_1, ..., x^m_n)."""
        return np.concatenate([[self.t], np.ravel(self.x)])

    @classmethod
    def from_coordinates(cls, coords, m: int, n: int) -> "Jet":
        coords = np.asarray(coords, dtype=float)
        return cls(coords[0], coords[1:].reshape(m + 1, n).tolist())


@dataclass(frozen=True)
class JetGradient:
    d_t: float
    d_x: tuple  # d_x[k][i] = dL/dx_i^(k)

    def coordinates(self) -> np.ndarray:
        return np.concatenate([[self.d_t], np.ravel(self.d_x)])


class Expr:
    """Parsed Lagrangian; immutable and safe to share."""

    __slots__ = ("root", "source", "m", "n", "uses_t")

    def __init__(self, root, source: str | None = None):
        self.root = root
        self.source = source if source is not None else str(root)
        variables = [node for node in _walk(root) if isinstance(node, Var)]
        derivs = [v.order for v in variables if v.order >= 0]
        self.m = max(derivs, default=0)
        self.n = max((v.index for v in variables if v.order >= 0), default=0)
        self.uses_t = any(v.order < 0 for v in variables)

    @property
    def autonomous(self) -> bool:
        return not self.uses_t

    def __str__(self) -> str:
        return str(self.root)

    def __repr__(self) -> str:
        return f"Expr({self.source!r}, m={self.m}, n={self.n})"

    def __call__(self, t, xs):
        """Evaluate on arbitrary arithmetic values; ``xs[k][i]`` is x_{i+1}^(k)."""
        return self.root.eval(t, xs)

    def check_shape(self, m: int, n: int) -> None:
        if m < self.m or n < self.n:
            raise ShapeError(
                f"expression needs derivative order >= {self.m} and dimension >= {self.n}, "
                f"got jet with m={m}, n={n}"
            )

    # batch helpers: t has shape S, x has shape (m+1, n, *S)
    def values(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self.check_shape(x.shape[0] - 1, x.shape[1])
        with np.errstate(all="ignore"):
            out = self(np.asarray(t, dtype=float), x)
        out = np.broadcast_to(np.asarray(out, dtype=float), x.shape[2:])
        dual.ensure_finite(out, "Lagrangian")
        return np.array(out)

    def derivatives(self, t, x, second_order=False, include_t=True):
        """Value and gradient over jet coordinates, with the Hessian on request.

        Returns ``(val, grad, hess)`` with ``grad`` of shape (D, *S) where
        D = 1 + (m+1)n when ``include_t`` else (m+1)n; ``hess`` is None
        unless requested.
        """
        x = np.asarray(x, dtype=float)
        m1, n = x.shape[0], x.shape[1]
        self.check_shape(m1 - 1, n)
        shape = x.shape[2:]
        t = np.broadcast_to(np.asarray(t, dtype=float), shape)
        flat = [x[k, i] for k in range(m1) for i in range(n)]
        seeds = ([t] if include_t else []) + flat
        duals = Dual.variables(seeds, second_order=second_order)
        if include_t:
            tv, xv = duals[0], duals[1:]
        else:
            tv, xv = t, duals
        xs = [xv[k * n : (k + 1) * n] for k in range(m1)]
        with np.errstate(all="ignore"):
            out = self(tv, xs)
        if not isinstance(out, Dual):
            dim = len(seeds)
            val = np.broadcast_to(np.asarray(out, dtype=float), shape).copy()
            grad = np.zeros((dim,) + shape)
            hess = np.zeros((dim, dim) + shape) if second_order else None
            dual.ensure_finite(val, "Lagrangian")
            return val, grad, hess
        val = np.broadcast_to(out.val, shape).copy()
        grad = np.broadcast_to(out.grad, (len(seeds),) + shape).copy()
        hess = None
        if second_order:
            hess = np.broadcast_to(out.hess, (len(seeds), len(seeds)) + shape).copy()
        dual.ensure_finite(Dual(val, grad, hess), "Lagrangian")
        return val, grad, hess


def parse(source: str) -> Expr:
    if not isinstance(source, str):
        raise TypeError("expression source must be text")
    root = _Parser(source).parse()
    return Expr(root, source)


def _jet_arrays(e: Expr, j: Jet):
    e.check_shape(j.m, j.n)
    return np.asarray(j.t), np.asarray(j.x, dtype=float)


def evaluate(e: Expr, j: Jet) -> float:
    t, x = _jet_arrays(e, j)
    return float(e.values(t, x))


def grad_jet(e: Expr, j: Jet) -> JetGradient:
    t, x = _jet_arrays(e, j)
    _, grad, _ = e.derivatives(t, x)
    return JetGradient(float(grad[0]), tuple(map(tuple, grad[1:].reshape(j.m + 1, j.n))))


def hess_jet(e: Expr, j: Jet) -> np.ndarray:
    """Symmetric Hessian over (t, x^0_1, ..., x^m_n)."""
    t, x = _jet_arrays(e, j)
    _, _, hess = e.derivatives(t, x, second_order=True)
    return hess


def random_polynomial(rng: np.random.Generator, m: int, n: int, terms: int = 4, degree: int = 3) -> Expr:
    """Random polynomial Lagrangian, used as a test corpus generator."""
    names = ["t"] + [f"x[{i}]" if k == 0 else f"d{k}x[{i}]" for k in range(m + 1) for i in range(1, n + 1)]
    parts = []
    for _ in range(terms):
        coeff = rng.uniform(-2.0, 2.0)
        factors = [f"{names[rng.integers(len(names))]}^{int(rng.integers(1, degree + 1))}" for _ in range(rng.integers(1, 3))]
        parts.append(f"{coeff!r}*" + "*".join(factors))
    return parse(" + ".join(parts))
