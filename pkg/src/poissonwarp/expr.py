"""Scalar fields over chart coordinates: parse, differentiate, evaluate.

A scalar field is an immutable expression tree. Evaluation is vectorised:
a point maps coordinate names to floats or to equally shaped numpy arrays,
so a whole batch of sample points is evaluated in one pass. Shared
subtrees are evaluated once per call.
"""
from __future__ import annotations

import math
import re
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ExprError",
    "ParseError",
    "UnknownIdentifierError",
    "DomainError",
    "MissingCoordinateError",
    "ScalarField",
    "Const",
    "Symbol",
    "MatrixInverse",
    "ZERO",
    "ONE",
    "const",
    "symbol",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "power",
    "func",
    "as_field",
    "parse",
    "differentiate",
    "evaluate",
    "to_text",
    "Evaluator",
    "FUNCTIONS",
]

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")

# printing precedence
_ADD, _MUL, _NEG, _POW, _ATOM = 1, 2, 3, 4, 5


class ExprError(Exception):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifierError(ParseError):
    def __init__(self, identifier: str, position: int):
        super().__init__(f"unknown identifier {identifier!r}", position)
        self.identifier = identifier


class DomainError(ExprError):
    """A subexpression left its domain (log of nonpositive, division by zero, ...)."""

    def __init__(self, message: str, subexpression: "ScalarField"):
        super().__init__(f"{message} in {to_text(subexpression)}")
        self.subexpression = subexpression


class MissingCoordinateError(ExprError, KeyError):
    def __init__(self, name: str):
        ExprError.__init__(self, f"point has no value for coordinate {name!r}")
        self.name = name

    def __str__(self) -> str:
        return self.args[0]


class ScalarField:
    """Base node. Use the module-level builders rather than node constructors."""

    __slots__ = ("symbols", "_dcache", "__weakref__")
    prec = _ATOM

    def __init__(self, symbols: frozenset[str]):
        self.symbols = symbols
        self._dcache: dict[str, ScalarField] = {}

    # arithmetic sugar ------------------------------------------------
    def __add__(self, other):
        return add(self, as_field(other))

    def __radd__(self, other):
        return add(as_field(other), self)

    def __sub__(self, other):
        return sub(self, as_field(other))

    def __rsub__(self, other):
        return sub(as_field(other), self)

    def __mul__(self, other):
        return mul(self, as_field(other))

    def __rmul__(self, other):
        return mul(as_field(other), self)

    def __truediv__(self, other):
        return div(self, as_field(other))

    def __rtruediv__(self, other):
        return div(as_field(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent):
        return power(self, exponent)

    def __str__(self) -> str:
        return to_text(self)

    def __repr__(self) -> str:
        return f"ScalarField({to_text(self)!r})"

    @property
    def vars(self) -> tuple[str, ...]:
        return tuple(sorted(self.symbols))

    def diff(self, x: str) -> "ScalarField":
        if x not in self.symbols:
            return ZERO
        cached = self._dcache.get(x)
        if cached is None:
            cached = self._derive(x)
            self._dcache[x] = cached
        return cached

    def evaluate(self, point: Mapping[str, object]):
        return evaluate(self, point)

    # node protocol
    def _derive(self, x: str) -> "ScalarField":
        raise NotImplementedError

    def _compute(self, ev: "Evaluator"):
        raise NotImplementedError

    def _text(self) -> str:
        raise NotImplementedError

    def children(self) -> tuple["ScalarField", ...]:
        return ()


class Const(ScalarField):
    __slots__ = ("value",)

    def __init__(self, value: float):
        super().__init__(frozenset())
        self.value = float(value)
        if not math.isfinite(self.value):
            raise ValueError(f"constant must be finite, got {value!r}")

    @property
    def prec(self):
        return _NEG if self.value < 0 else _ATOM

    def _derive(self, x):
        return ZERO

    def _compute(self, ev):
        return self.value

    def _text(self):
        return _format_number(self.value)


class Symbol(ScalarField):
    __slots__ = ("name",)

    def __init__(self, name: str):
        super().__init__(frozenset((name,)))
        self.name = name

    def _derive(self, x):
        return ONE if x == self.name else ZERO

    def _compute(self, ev):
        try:
            value = ev.point[self.name]
        except KeyError:
            raise MissingCoordinateError(self.name) from None
        return value

    def _text(self):
        return self.name


class Add(ScalarField):
    __slots__ = ("terms",)
    prec = _ADD

    def __init__(self, terms: tuple[ScalarField, ...]):
        super().__init__(frozenset().union(*(t.symbols for t in terms)))
        self.terms = terms

    def children(self):
        return self.terms

    def _derive(self, x):
        return add(*(t.diff(x) for t in self.terms))

    def _compute(self, ev):
        total = ev.value(self.terms[0])
        for t in self.terms[1:]:
            total = total + ev.value(t)
        return total

    def _text(self):
        return " + ".join(_wrap(t, self.prec, i > 0) for i, t in enumerate(self.terms))


class Mul(ScalarField):
    __slots__ = ("factors",)
    prec = _MUL

    def __init__(self, factors: tuple[ScalarField, ...]):
        super().__init__(frozenset().union(*(f.symbols for f in factors)))
        self.factors = factors

    def children(self):
        return self.factors

    def _derive(self, x):
        parts = []
        for i, fac in enumerate(self.factors):
            d = fac.diff(x)
            if _is_zero(d):
                continue
            parts.append(mul(*self.factors[:i], d, *self.factors[i + 1:]))
        return add(*parts)

    def _compute(self, ev):
        total = ev.value(self.factors[0])
        for f in self.factors[1:]:
            total = total * ev.value(f)
        return total

    def _text(self):
        return " * ".join(_wrap(f, self.prec, i > 0) for i, f in enumerate(self.factors))


class Div(ScalarField):
    __slots__ = ("num", "den")
    prec = _MUL

    def __init__(self, num: ScalarField, den: ScalarField):
        super().__init__(num.symbols | den.symbols)
        self.num = num
        self.den = den

    def children(self):
        return (self.num, self.den)

    def _derive(self, x):
        dn, dd = self.num.diff(x), self.den.diff(x)
        first = div(dn, self.den)
        if _is_zero(dd):
            return first
        return sub(first, div(mul(self.num, dd), power(self.den, 2)))

    def _compute(self, ev):
        den = ev.value(self.den)
        if np.any(np.asarray(den) == 0):
            raise DomainError("division by zero", self)
        return ev.value(self.num) / den

    def _text(self):
        return f"{_wrap(self.num, self.prec, False)} / {_wrap(self.den, self.prec, True)}"


class Neg(ScalarField):
    __slots__ = ("arg",)
    prec = _NEG

    def __init__(self, arg: ScalarField):
        super().__init__(arg.symbols)
        self.arg = arg

    def children(self):
        return (self.arg,)

    def _derive(self, x):
        return neg(self.arg.diff(x))

    def _compute(self, ev):
        return -ev.value(self.arg)

    def _text(self):
        return "-" + _wrap(self.arg, self.prec, False)


class Pow(ScalarField):
    __slots__ = ("base", "exponent")
    prec = _POW

    def __init__(self, base: ScalarField, exponent: float):
        super().__init__(base.symbols)
        self.base = base
        self.exponent = float(exponent)

    def children(self):
        return (self.base,)

    def _derive(self, x):
        db = self.base.diff(x)
        c = self.exponent
        return mul(Const(c), power(self.base, c - 1.0), db)

    def _compute(self, ev):
        b = ev.value(self.base)
        arr = np.asarray(b)
        c = self.exponent
        if not c.is_integer() and np.any(arr < 0):
            raise DomainError("negative base with non-integer exponent", self)
        if c < 0 and np.any(arr == 0):
            raise DomainError("division by zero", self)
        if c == 2.0:
            return b * b
        return np.power(b, c) if isinstance(b, np.ndarray) else float(b) ** c

    def _text(self):
        # atoms only as the base; everything else gets parentheses
        base = self.base._text()
        if self.base.prec < _ATOM:
            base = f"({base})"
        return f"{base}^{_format_number(self.exponent)}"


class Func(ScalarField):
    __slots__ = ("name", "arg")

    def __init__(self, name: str, arg: ScalarField):
        if name not in FUNCTIONS:
            raise ValueError(f"unknown function {name!r}")
        super().__init__(arg.symbols)
        self.name = name
        self.arg = arg

    def children(self):
        return (self.arg,)

    def _derive(self, x):
        u, du = self.arg, self.arg.diff(x)
        if self.name == "sin":
            outer = func("cos", u)
        elif self.name == "cos":
            outer = neg(func("sin", u))
        elif self.name == "exp":
            outer = self
        elif self.name == "log":
            return div(du, u)
        else:  # sqrt
            return div(du, mul(Const(2.0), self))
        return mul(outer, du)

    def _compute(self, ev):
        u = ev.value(self.arg)
        arr = np.asarray(u)
        if self.name == "log" and np.any(arr <= 0):
            raise DomainError("log of nonpositive value", self)
        if self.name == "sqrt" and np.any(arr < 0):
            raise DomainError("sqrt of negative value", self)
        return getattr(np, self.name)(u)

    def _text(self):
        return f"{self.name}({self.arg._text()})"


class MatrixInverse:
    """Pointwise inverse of a square matrix of scalar fields.

    ``entry(k, l)`` is a scalar field whose value at a point is entry (k, l)
    of the numerical inverse there; its derivative is expressed through the
    same entries, so fields built from it stay differentiable to any order.
    """

    def __init__(self, matrix: Sequence[Sequence[ScalarField]], cond_limit: float = 1e12,
                 label: str = "inverse"):
        self.matrix = tuple(tuple(row) for row in matrix)
        self.dim = len(self.matrix)
        if any(len(row) != self.dim for row in self.matrix):
            raise ValueError("matrix must be square")
        self.cond_limit = cond_limit
        self.label = label
        symbols = frozenset().union(*(e.symbols for row in self.matrix for e in row))
        self.entries = tuple(
            tuple(InverseEntry(self, k, l, symbols) for l in range(self.dim))
            for k in range(self.dim)
        )

    def entry(self, k: int, l: int) -> ScalarField:
        return self.entries[k][l]

    def values(self, ev: "Evaluator") -> np.ndarray:
        cached = ev.cache.get(self)
        if cached is not None:
            return cached
        rows = [[ev.value(e) for e in row] for row in self.matrix]
        shape = np.broadcast_shapes(*(np.shape(v) for row in rows for v in row))
        mat = np.empty(shape + (self.dim, self.dim))
        for k, row in enumerate(rows):
            for l, v in enumerate(row):
                mat[..., k, l] = v
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(mat)
        bad = ~(cond <= self.cond_limit)
        if np.any(bad):
            raise DomainError(
                f"singular matrix (condition number {np.max(np.where(np.isfinite(cond), cond, np.inf)):.3g}"
                f" > {self.cond_limit:g})",
                self.entries[0][0],
            )
        inv = np.linalg.inv(mat)
        ev.cache[self] = inv
        return inv


class InverseEntry(ScalarField):
    __slots__ = ("owner", "k", "l")

    def __init__(self, owner: MatrixInverse, k: int, l: int, symbols: frozenset[str]):
        super().__init__(symbols)
        self.owner, self.k, self.l = owner, k, l

    def _derive(self, x):
        # d(M^-1) = -M^-1 dM M^-1
        owner, n = self.owner, self.owner.dim
        terms = []
        for a in range(n):
            for b in range(n):
                dm = owner.matrix[a][b].diff(x)
                if _is_zero(dm):
                    continue
                terms.append(mul(owner.entries[self.k][a], dm, owner.entries[b][self.l]))
        return neg(add(*terms))

    def _compute(self, ev):
        return self.owner.values(ev)[..., self.k, self.l]

    def _text(self):
        return f"{self.owner.label}[{self.k},{self.l}]"


ZERO = Const(0.0)
ONE = Const(1.0)


def _is_zero(node: ScalarField) -> bool:
    return isinstance(node, Const) and node.value == 0.0


def _const_value(node: ScalarField):
    return node.value if isinstance(node, Const) else None


# builders with light constant folding ---------------------------------

def const(value: float) -> ScalarField:
    value = float(value)
    if value == 0.0:
        return ZERO
    if value == 1.0:
        return ONE
    return Const(value)


def symbol(name: str) -> ScalarField:
    return Symbol(name)


def as_field(value) -> ScalarField:
    if isinstance(value, ScalarField):
        return value
    if isinstance(value, (int, float, np.integer, np.floating)):
        return const(float(value))
    raise TypeError(f"cannot use {type(value).__name__} as a scalar field")


def add(*terms) -> ScalarField:
    flat: list[ScalarField] = []
    total = 0.0
    for t in terms:
        t = as_field(t)
        if isinstance(t, Add):
            items = t.terms
        else:
            items = (t,)
        for item in items:
            if isinstance(item, Const):
                total += item.value
            else:
                flat.append(item)
    if total != 0.0:
        flat.append(Const(total))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Add(tuple(flat))


def neg(a) -> ScalarField:
    a = as_field(a)
    if isinstance(a, Const):
        return const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def sub(a, b) -> ScalarField:
    return add(a, neg(b))


def mul(*factors) -> ScalarField:
    flat: list[ScalarField] = []
    coeff = 1.0
    for f in factors:
        f = as_field(f)
        items = f.factors if isinstance(f, Mul) else (f,)
        for item in items:
            if isinstance(item, Const):
                if item.value == 0.0:
                    return ZERO
                coeff *= item.value
            elif isinstance(item, Neg):
                coeff = -coeff
                flat.append(item.arg)
            else:
                flat.append(item)
    if not flat:
        return const(coeff)
    body = flat[0] if len(flat) == 1 else Mul(tuple(flat))
    if coeff == 1.0:
        return body
    if coeff == -1.0:
        return Neg(body)
    return Mul((Const(coeff),) + (body.factors if isinstance(body, Mul) else (body,)))


def div(a, b) -> ScalarField:
    a, b = as_field(a), as_field(b)
    if _is_zero(a):
        return ZERO
    bv = _const_value(b)
    if bv is not None:
        if bv == 0.0:
            return Div(a, b)  # reported at evaluation time
        return mul(const(1.0 / bv), a) if bv != 1.0 else a
    return Div(a, b)


def power(base, exponent: float) -> ScalarField:
    base = as_field(base)
    exponent = float(exponent)
    if exponent == 0.0:
        return ONE
    if exponent == 1.0:
        return base
    bv = _const_value(base)
    if bv is not None and (bv > 0 or exponent.is_integer()) and not (bv == 0 and exponent < 0):
        return const(bv ** exponent)
    if isinstance(base, Pow) and exponent.is_integer() and base.exponent.is_integer():
        return power(base.base, base.exponent * exponent)
    return Pow(base, exponent)


def func(name: str, arg) -> ScalarField:
    arg = as_field(arg)
    if isinstance(arg, Const):
        v = arg.value
        if name == "log" and v <= 0 or name == "sqrt" and v < 0:
            return Func(name, arg)  # reported at evaluation time
        return const(float(getattr(math, name)(v)))
    return Func(name, arg)


# evaluation -------------------------------------------------------------

class Evaluator:
    """Evaluates many fields at one point (or batch) with a shared cache."""

    def __init__(self, point: Mapping[str, object]):
        self.point = {k: (np.asarray(v, dtype=float) if not np.isscalar(v) else float(v))
                      for k, v in point.items()}
        self.cache: dict[object, object] = {}

    def value(self, node: ScalarField):
        try:
            return self.cache[node]
        except KeyError:
            pass
        with np.errstate(all="ignore"):
            v = node._compute(self)
        if not np.all(np.isfinite(v)):
            raise DomainError("non-finite value", node)
        self.cache[node] = v
        return v

    def __call__(self, node: ScalarField):
        return self.value(node)

    def array(self, fields: Iterable[ScalarField], shape: tuple[int, ...]) -> np.ndarray:
        """Stack values of ``fields`` along a new trailing axis, broadcast to ``shape``."""
        vals = [np.broadcast_to(self.value(f), shape) for f in fields]
        if not vals:
            return np.empty(shape + (0,))
        return np.stack(vals, axis=-1)


def evaluate(s: ScalarField, point: Mapping[str, object]):
    """Value of ``s`` at ``point``; a float for scalar points, an array for batches."""
    v = Evaluator(point).value(s)
    if isinstance(v, np.ndarray):
        if v.ndim == 0:
            return float(v)
        return v
    shapes = [np.shape(p) for p in point.values()]
    shape = np.broadcast_shapes(*shapes) if shapes else ()
    if shape:
        return np.full(shape, float(v))
    return float(v)


def differentiate(s: ScalarField, x: str) -> ScalarField:
    """Exact partial derivative of ``s`` with respect to coordinate ``x``."""
    return s.diff(x)


# printing ---------------------------------------------------------------

def _format_number(v: float) -> str:
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _wrap(node: ScalarField, parent_prec: int, strict: bool) -> str:
    text = node._text()
    if node.prec < parent_prec or (strict and node.prec == parent_prec):
        return f"({text})"
    return text


def to_text(s: ScalarField) -> str:
    """Render in the grammar accepted by :func:`parse`."""
    return s._text()


# parsing ----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<id>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Sequence[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.vars = set(variables)
        self.cache: dict[str, ScalarField] = {}

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.peek()
        if text != value or kind == "end":
            got = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, got {got}", pos)
        self.take()

    def parse(self) -> ScalarField:
        node = self.expr()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = add(node, rhs) if op == "+" else sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = mul(node, rhs) if op == "*" else div(node, rhs)
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            return neg(self.unary())
        return self.factor()

    def factor(self):
        base = self.base()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return power(base, self.exponent())
        return base

    def exponent(self) -> float:
        sign = 1.0
        if self.peek()[0] == "op" and self.peek()[1] == "-":
            self.take()
            sign = -1.0
        kind, text, pos = self.peek()
        if kind != "num":
            got = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected numeric exponent, got {got}", pos)
        self.take()
        value = sign * float(text)
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            # right associative: a^b^c == a^(b^c)
            self.take()
            value = value ** self.exponent()
        return value

    def base(self):
        kind, text, pos = self.take()
        if kind == "num":
            return const(float(text))
        if kind == "id":
            if self.peek()[1] == "(" and self.peek()[0] == "op":
                if text not in FUNCTIONS:
                    raise UnknownIdentifierError(text, pos)
                self.take()
                arg = self.expr()
                self.expect(")")
                return func(text, arg)
            if text not in self.vars:
                raise UnknownIdentifierError(text, pos)
            node = self.cache.get(text)
            if node is None:
                node = self.cache[text] = Symbol(text)
            return node
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        got = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {got}", pos)


def parse(text: str, variables: Sequence[str]) -> ScalarField:
    """Parse ``text`` into a scalar field over the coordinates ``variables``."""
    return _Parser(text, variables).parse()
