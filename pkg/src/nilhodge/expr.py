"""A small expression language for coefficient functions on the nilmanifold.

Grammar (usual precedence, ``^`` binds tightest and is right-associative)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := ("+" | "-") unary | power
    power := atom (("^" | "**") unary)?
    atom  := NUMBER | NAME | FUNC "(" expr ")" | "(" expr ")"

Names: ``i``, ``pi``, coordinates ``x1..x4`` and user parameters.  Functions:
``sin``, ``cos``, ``exp``.  Decimal literals are read as exact rationals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

import numpy as np

from .exact import Qi

__all__ = [
    "ExpressionError",
    "ExpressionSyntaxError",
    "UnknownSymbolError",
    "NotExactError",
    "Expression",
    "parse_expression",
    "check_quotient_periodicity",
    "frame_derivative_expression",
    "constant_expression",
    "COORDINATES",
    "FUNCTIONS",
]

COORDINATES = ("x1", "x2", "x3", "x4")
FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}
CONSTANTS = ("i", "pi")


class ExpressionError(ValueError):
    pass


class ExpressionSyntaxError(ExpressionError):
    def __init__(self, message: str, text: str, offset: int):
        super().__init__(f"{message} at offset {offset}: {text!r}")
        self.offset = offset
        self.text = text


class UnknownSymbolError(ExpressionError):
    pass


class NotExactError(ExpressionError):
    """The expression cannot be evaluated to an exact complex rational."""


# -- AST -----------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: Fraction


@dataclass(frozen=True)
class Name:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: object


@dataclass(frozen=True)
class Binary:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Call:
    func: str
    arg: object


_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\*\*|[-+*/^()]))")


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError(f"unexpected character {text[start]!r}", text, start)
        start = m.start(m.lastindex)
        kind = ("num", "name", "op")[m.lastindex - 1]
        out.append((kind, m.group(m.lastindex), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, known: set[str] | None):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.known = known

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value: str):
        kind, v, pos = self.peek()
        if v != value or kind == "end":
            what = "end of input" if kind == "end" else repr(v)
            raise ExpressionSyntaxError(f"expected {value!r}, found {what}", self.text, pos)
        self.take()

    def parse(self):
        node = self.expr()
        kind, v, pos = self.peek()
        if kind != "end":
            raise ExpressionSyntaxError(f"unexpected {v!r}", self.text, pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            node = Binary(op, node, self.unary())
        return node

    def unary(self):
        if self.peek()[0] == "op" and self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            return Unary(op, self.unary())
        return self.power()

    def power(self):
        node = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] in ("^", "**"):
            self.take()
            node = Binary("^", node, self.unary())
        return node

    def atom(self):
        kind, v, pos = self.take()
        if kind == "num":
            return Num(Fraction(v))
        if kind == "name":
            if v in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(v, arg)
            if self.known is not None and v not in self.known and v not in CONSTANTS and v not in COORDINATES:
                raise UnknownSymbolError(f"unknown symbol {v!r} at offset {pos}")
            return Name(v)
        if v == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(v)
        raise ExpressionSyntaxError(f"unexpected {what}", self.text, pos)


# -- evaluation ------------------------------------------------------------------


def _names(node, acc: set):
    if isinstance(node, Name):
        acc.add(node.name)
    elif isinstance(node, Unary):
        _names(node.operand, acc)
    elif isinstance(node, Binary):
        _names(node.left, acc)
        _names(node.right, acc)
    elif isinstance(node, Call):
        _names(node.arg, acc)
    return acc


class Expression:
    """Parsed expression; immutable."""

    __slots__ = ("text", "ast")

    def __init__(self, text: str, ast):
        self.text = text
        self.ast = ast

    def __repr__(self):
        return f"Expression({self.text!r})"

    def __str__(self):
        return self.text

    def symbols(self) -> set[str]:
        return _names(self.ast, set())

    def parameters(self) -> set[str]:
        return self.symbols() - set(COORDINATES) - set(CONSTANTS)

    def depends_on_coordinates(self, params: Mapping | None = None, _seen=()) -> bool:
        params = params or {}
        for s in self.symbols():
            if s in COORDINATES:
                return True
            val = params.get(s)
            if isinstance(val, Expression):
                if s in _seen:
                    raise ExpressionError(f"parameter {s!r} is defined in terms of itself")
                if val.depends_on_coordinates(params, _seen + (s,)):
                    return True
        return False

    def substitute(self, params: Mapping | None = None) -> "Expression":
        """Inline parameters bound to other expressions (numbers stay symbolic)."""
        ast = _subst(self.ast, params or {}, ())
        return Expression(_render(ast), ast)

    def diff(self, var: str, params: Mapping | None = None) -> "Expression":
        """Symbolic partial derivative; parameters bound to expressions are inlined first."""
        ast = _diff(_subst(self.ast, params or {}, ()), var)
        return Expression(_render(ast), ast)

    def times(self, other: "Expression") -> "Expression":
        return Expression(f"({self.text})*({other.text})", Binary("*", self.ast, other.ast))

    def evaluate(self, env: Mapping | None = None):
        """Numeric evaluation; coordinates and parameters come from ``env``.

        Values in ``env`` may be numbers, numpy arrays (broadcast together),
        exact ``Qi``/``Fraction`` values, or other ``Expression`` objects.
        """
        return _eval(self.ast, env or {}, ())

    def exact(self, params: Mapping | None = None) -> Qi:
        """Exact evaluation; raises NotExactError when that is impossible."""
        return _exact(self.ast, params or {}, ())


def _lookup_numeric(name: str, env: Mapping, seen: tuple):
    if name == "i":
        return 1j
    if name == "pi":
        return np.pi
    if name not in env:
        raise UnknownSymbolError(f"unbound symbol {name!r}")
    val = env[name]
    if isinstance(val, Expression):
        if name in seen:
            raise ExpressionError(f"parameter {name!r} is defined in terms of itself")
        return _eval(val.ast, env, seen + (name,))
    if isinstance(val, Qi):
        return complex(val) if val.im else float(val.re)
    if isinstance(val, Fraction):
        return float(val)
    return val


def _eval(node, env, seen):
    if isinstance(node, Num):
        return float(node.value)
    if isinstance(node, Name):
        return _lookup_numeric(node.name, env, seen)
    if isinstance(node, Unary):
        v = _eval(node.operand, env, seen)
        return -v if node.op == "-" else v
    if isinstance(node, Binary):
        a = _eval(node.left, env, seen)
        b = _eval(node.right, env, seen)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        if isinstance(node.right, Num) and node.right.value.denominator == 1:
            return a ** int(node.right.value)
        return np.power(np.asarray(a, dtype=complex), b)
    if isinstance(node, Call):
        return FUNCTIONS[node.func](_eval(node.arg, env, seen))
    raise TypeError(node)


def _exact(node, params, seen) -> Qi:
    if isinstance(node, Num):
        return Qi(node.value)
    if isinstance(node, Name):
        n = node.name
        if n == "i":
            return Qi(0, 1)
        if n == "pi" or n in COORDINATES:
            raise NotExactError(f"{n!r} has no exact rational value")
        if n not in params:
            raise UnknownSymbolError(f"unbound symbol {n!r}")
        val = params[n]
        if isinstance(val, Expression):
            if n in seen:
                raise ExpressionError(f"parameter {n!r} is defined in terms of itself")
            return _exact(val.ast, params, seen + (n,))
        try:
            return Qi.coerce(val)
        except TypeError:
            raise NotExactError(f"parameter {n!r} = {val!r} is not an exact rational") from None
    if isinstance(node, Unary):
        v = _exact(node.operand, params, seen)
        return -v if node.op == "-" else v
    if isinstance(node, Binary):
        a = _exact(node.left, params, seen)
        if node.op == "^":
            b = _exact(node.right, params, seen)
            if b.im or b.re.denominator != 1:
                raise NotExactError("non-integer exponent")
            return a ** int(b.re)
        b = _exact(node.right, params, seen)
        return {"+": a + b, "-": a - b, "*": a * b}[node.op] if node.op != "/" else a / b
    if isinstance(node, Call):
        raise NotExactError(f"{node.func}() has no exact rational value")
    raise TypeError(node)


_ZERO, _ONE = Num(Fraction(0)), Num(Fraction(1))


def _subst(node, params, seen):
    if isinstance(node, Name):
        val = params.get(node.name)
        if isinstance(val, Expression):
            if node.name in seen:
                raise ExpressionError(f"parameter {node.name!r} is defined in terms of itself")
            return _subst(val.ast, params, seen + (node.name,))
        return node
    if isinstance(node, Unary):
        return Unary(node.op, _subst(node.operand, params, seen))
    if isinstance(node, Binary):
        return Binary(node.op, _subst(node.left, params, seen), _subst(node.right, params, seen))
    if isinstance(node, Call):
        return Call(node.func, _subst(node.arg, params, seen))
    return node


def _add(a, b, op="+"):
    if b == _ZERO:
        return a
    if a == _ZERO:
        return b if op == "+" else Unary("-", b)
    return Binary(op, a, b)


def _mul(a, b):
    if a == _ZERO or b == _ZERO:
        return _ZERO
    if a == _ONE:
        return b
    if b == _ONE:
        return a
    return Binary("*", a, b)


def _diff(node, var):
    if isinstance(node, Num):
        return _ZERO
    if isinstance(node, Name):
        return _ONE if node.name == var else _ZERO
    if isinstance(node, Unary):
        inner = _diff(node.operand, var)
        return inner if node.op == "+" or inner == _ZERO else Unary("-", inner)
    if isinstance(node, Call):
        du = _diff(node.arg, var)
        if du == _ZERO:
            return _ZERO
        outer = {
            "sin": Call("cos", node.arg),
            "cos": Unary("-", Call("sin", node.arg)),
            "exp": node,
        }[node.func]
        return _mul(outer, du)
    a, b = node.left, node.right
    da, db = _diff(a, var), _diff(b, var)
    if node.op in "+-":
        return _add(da, db, node.op)
    if node.op == "*":
        return _add(_mul(da, b), _mul(a, db))
    if node.op == "/":
        if db == _ZERO:
            return _ZERO if da == _ZERO else Binary("/", da, b)
        num = _add(_mul(da, b), _mul(a, db), "-")
        return _ZERO if num == _ZERO else Binary("/", num, Binary("^", b, Num(Fraction(2))))
    if db != _ZERO:
        raise ExpressionError("cannot differentiate a power whose exponent depends on the variable")
    if da == _ZERO:
        return _ZERO
    return _mul(_mul(b, Binary("^", a, Binary("-", b, _ONE))), da)


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}


def _render(node, parent=0) -> str:
    if isinstance(node, Num):
        v = node.value
        return str(v.numerator) if v.denominator == 1 else f"({v.numerator}/{v.denominator})"
    if isinstance(node, Name):
        return node.name
    if isinstance(node, Call):
        return f"{node.func}({_render(node.arg)})"
    if isinstance(node, Unary):
        text = f"{node.op}{_render(node.operand, 3)}"
        return f"({text})" if parent >= 3 else text
    p = _PREC[node.op]
    # left-associative ops need the right operand bracketed at equal precedence
    left = _render(node.left, p + (node.op == "^"))
    right = _render(node.right, p + (node.op != "^"))
    text = f"{left}{node.op}{right}"
    return f"({text})" if p < parent else text


def constant_expression(value: Qi) -> "Expression":
    """An expression with the exact value ``value``."""
    value = Qi.coerce(value)
    ast = _add(Num(value.re), _mul(Num(value.im), Name("i"))) if value.im else Num(value.re)
    return Expression(_render(ast), ast)


def frame_derivative_expression(expr: "Expression", k: int, params: Mapping | None = None, shear: int = 1):
    """e_k applied symbolically: e_1 = d/dx1, e_2 = d/dx2 + shear*x1*d/dx3, e_3, e_4."""
    base = expr.diff(COORDINATES[k - 1], params)
    if k != 2 or not shear:
        return base
    extra = expr.diff("x3", params)
    if extra.ast == _ZERO:
        return base
    ast = _add(base.ast, _mul(Binary("*", Num(Fraction(shear)), Name("x1")), extra.ast))
    return Expression(_render(ast), ast)


def parse_expression(text: str, known: set[str] | None = None) -> Expression:
    """Parse ``text``.  If ``known`` is given, other parameter names are rejected."""
    if not isinstance(text, str):
        raise TypeError("expression text must be a string")
    return Expression(text, _Parser(text, set(known) if known is not None else None).parse())


def check_quotient_periodicity(
    expr: Expression, samples: int = 64, params: Mapping | None = None, seed: int = 0, shear: int = 1
) -> float:
    """Largest mismatch of ``expr`` under the deck transformations of the quotient.

    Checks (x1+1, x2, x3 + shear*x2, x4) and unit translations in x2, x3, x4 at
    random points.  Zero (to rounding) means ``expr`` descends to the manifold.
    """
    rng = np.random.default_rng(seed)
    x = rng.random((4, samples))
    env = dict(params or {})

    def at(p):
        return np.broadcast_to(expr.evaluate({**env, **dict(zip(COORDINATES, p))}), (samples,))

    base = at(x)
    moves = [
        (x[0] + 1, x[1], x[2] + shear * x[1], x[3]),
        (x[0], x[1] + 1, x[2], x[3]),
        (x[0], x[1], x[2] + 1, x[3]),
        (x[0], x[1], x[2], x[3] + 1),
    ]
    return float(max(np.max(np.abs(at(m) - base)) for m in moves))
