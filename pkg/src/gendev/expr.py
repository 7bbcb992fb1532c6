"""Expression language for chart data.

Grammar (whitespace insignificant)::

    expr   := term (('+'|'-') term)*
    term   := factor (('*'|'/') factor)*
    factor := '-' factor | power
    power  := atom ('^' integer)?
    atom   := number | ident | func '(' expr ')' | '(' expr ')'
    ident  := 'x' digit+ | 'pi' | 'e'
    func   := 'sin' | 'cos' | 'tan' | 'exp' | 'log' | 'sqrt'

Expressions are parsed into small immutable node objects, differentiated
symbolically (with constant folding) and compiled to vectorised numpy code.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt")


class ExprError(ValueError):
    """Base class for expression errors."""


class ExprSyntaxError(ExprError):
    """Malformed expression.  ``offset`` is a 1-based byte offset."""

    def __init__(self, message: str, offset: int, src: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.src = src


class UnknownIdentifierError(ExprError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class VariableIndexError(ExprError):
    def __init__(self, name: str, dim: int, offset: int):
        super().__init__(
            f"variable {name!r} at offset {offset} exceeds dimension {dim}")
        self.name = name
        self.dim = dim
        self.offset = offset


class EvaluationError(ArithmeticError):
    """Non-finite value produced while evaluating an expression."""


# -- nodes ---------------------------------------------------------------------

class Node:
    __slots__ = ()
    prec = 100

    def __str__(self) -> str:
        return to_text(self)


@dataclass(frozen=True)
class Const(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    index: int  # 0-based


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class Add(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Sub(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Mul(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Div(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Pow(Node):
    base: Node
    exponent: int


@dataclass(frozen=True)
class Func(Node):
    name: str
    arg: Node


ZERO = Const(0.0)
ONE = Const(1.0)


# -- constructors with constant folding ----------------------------------------

def _is(node: Node, value: float) -> bool:
    return isinstance(node, Const) and node.value == value


_MATH = {
    "sin": math.sin, "cos": math.cos, "tan": math.tan,
    "exp": math.exp, "log": math.log, "sqrt": math.sqrt,
}


def neg(a: Node) -> Node:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def add(a: Node, b: Node) -> Node:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is(a, 0.0):
        return b
    if _is(b, 0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.arg)
    return Add(a, b)


def sub(a: Node, b: Node) -> Node:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is(b, 0.0):
        return a
    if _is(a, 0.0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.arg)
    return Sub(a, b)


def mul(a: Node, b: Node) -> Node:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is(a, 0.0) or _is(b, 0.0):
        return ZERO
    if _is(a, 1.0):
        return b
    if _is(b, 1.0):
        return a
    if _is(a, -1.0):
        return neg(b)
    if _is(b, -1.0):
        return neg(a)
    if isinstance(a, Neg):
        return neg(mul(a.arg, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.arg))
    return Mul(a, b)


def div(a: Node, b: Node) -> Node:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0.0:
        return Const(a.value / b.value)
    if _is(a, 0.0):
        return ZERO
    if _is(b, 1.0):
        return a
    if isinstance(a, Neg):
        return neg(div(a.arg, b))
    return Div(a, b)


def power(a: Node, k: int) -> Node:
    if k == 0:
        return ONE
    if k == 1:
        return a
    if isinstance(a, Const) and not (a.value == 0.0 and k < 0):
        return Const(a.value ** k)
    if isinstance(a, Pow):
        return power(a.base, a.exponent * k)
    return Pow(a, k)


def func(name: str, a: Node) -> Node:
    if isinstance(a, Const):
        try:
            return Const(_MATH[name](a.value))
        except (ValueError, OverflowError):
            pass
    return Func(name, a)


# -- parser ---------------------------------------------------------------------

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
""", re.VERBOSE)


@dataclass
class _Tok:
    kind: str
    text: str
    offset: int  # 1-based byte offset


def _tokenize(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}",
                                  _byte_offset(src, pos), src)
        kind = m.lastgroup
        if kind != "ws":
            toks.append(_Tok(kind, m.group(), _byte_offset(src, pos)))
        pos = m.end()
    toks.append(_Tok("eof", "", _byte_offset(src, len(src))))
    return toks


def _byte_offset(src: str, index: int) -> int:
    return len(src[:index].encode("utf-8")) + 1


class _Parser:
    def __init__(self, src: str, dim: int, aliases: dict[str, int] | None):
        self.src = src
        self.dim = dim
        self.aliases = aliases or {}
        self.toks = _tokenize(src)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def fail(self, message: str) -> ExprSyntaxError:
        tok = self.tok
        what = "end of input" if tok.kind == "eof" else repr(tok.text)
        return ExprSyntaxError(f"{message}, found {what}", tok.offset, self.src)

    def eat(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def parse(self) -> Node:
        if self.tok.kind == "eof":
            raise self.fail("expected expression")
        node = self.expr()
        if self.tok.kind != "eof":
            raise self.fail("unexpected token")
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            if self.eat("+"):
                node = add(node, self.term())
            elif self.eat("-"):
                node = sub(node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.factor()
        while True:
            if self.eat("*"):
                node = mul(node, self.factor())
            elif self.eat("/"):
                node = div(node, self.factor())
            else:
                return node

    def factor(self) -> Node:
        if self.eat("-"):
            return neg(self.factor())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if not self.eat("^"):
            return base
        sign = -1 if self.eat("-") else 1
        tok = self.tok
        if tok.kind != "num" or not tok.text.isdigit():
            raise self.fail("expected integer exponent")
        self.i += 1
        return power(base, sign * int(tok.text))

    def atom(self) -> Node:
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return Const(float(tok.text))
        if tok.kind == "ident":
            self.i += 1
            name = tok.text
            if name in FUNCTIONS:
                if not self.eat("("):
                    raise self.fail(f"expected '(' after {name}")
                arg = self.expr()
                if not self.eat(")"):
                    raise self.fail("expected ')'")
                return func(name, arg)
            if name == "pi":
                return Const(math.pi)
            if name == "e":
                return Const(math.e)
            if name in self.aliases:
                return Var(self.aliases[name] - 1)
            m = re.fullmatch(r"x(\d+)", name)
            if m is None:
                raise UnknownIdentifierError(name, tok.offset)
            idx = int(m.group(1))
            if idx < 1 or idx > self.dim:
                raise VariableIndexError(name, self.dim, tok.offset)
            return Var(idx - 1)
        if self.eat("("):
            node = self.expr()
            if not self.eat(")"):
                raise self.fail("expected ')'")
            return node
        raise self.fail("expected number, variable, function or '('")


def parse(src: str | bytes, dim: int, aliases: dict[str, int] | None = None) -> Node:
    """Parse ``src`` into an expression tree over ``x1..x{dim}``.

    ``aliases`` maps extra identifiers to 1-based variable indices (used for
    the curve parameter ``t``).
    """
    if isinstance(src, bytes):
        src = src.decode("utf-8")
    return _Parser(src, dim, aliases).parse()


# -- calculus --------------------------------------------------------------------

def diff(node: Node, index: int) -> Node:
    """Symbolic partial derivative with respect to variable ``index`` (0-based)."""
    match node:
        case Const():
            return ZERO
        case Var(index=i):
            return ONE if i == index else ZERO
        case Neg(arg=a):
            return neg(diff(a, index))
        case Add(left=a, right=b):
            return add(diff(a, index), diff(b, index))
        case Sub(left=a, right=b):
            return sub(diff(a, index), diff(b, index))
        case Mul(left=a, right=b):
            return add(mul(diff(a, index), b), mul(a, diff(b, index)))
        case Div(left=a, right=b):
            da, db = diff(a, index), diff(b, index)
            if _is(db, 0.0):
                return div(da, b)
            return div(sub(mul(da, b), mul(a, db)), power(b, 2))
        case Pow(base=a, exponent=k):
            return mul(mul(Const(float(k)), power(a, k - 1)), diff(a, index))
        case Func(name=name, arg=a):
            da = diff(a, index)
            if _is(da, 0.0):
                return ZERO
            if name == "sin":
                outer = func("cos", a)
            elif name == "cos":
                outer = neg(func("sin", a))
            elif name == "tan":
                outer = add(ONE, power(func("tan", a), 2))
            elif name == "exp":
                outer = func("exp", a)
            elif name == "log":
                return div(da, a)
            elif name == "sqrt":
                return div(da, mul(Const(2.0), func("sqrt", a)))
            else:  # pragma: no cover
                raise ExprError(f"unknown function {name}")
            return mul(outer, da)
    raise TypeError(f"not an expression node: {node!r}")


def variables(node: Node) -> set[int]:
    match node:
        case Var(index=i):
            return {i}
        case Const():
            return set()
        case Neg(arg=a) | Func(arg=a) | Pow(base=a):
            return variables(a)
        case Add(left=a, right=b) | Sub(left=a, right=b) | Mul(left=a, right=b) \
                | Div(left=a, right=b):
            return variables(a) | variables(b)
    raise TypeError(f"not an expression node: {node!r}")


# -- printing and compilation ------------------------------------------------------

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}


def _prec(node: Node) -> int:
    if isinstance(node, Const) and node.value < 0:
        return 3
    return _PREC.get(type(node), 5)


def _fmt_const(value: float) -> str:
    if value == math.pi:
        return "pi"
    if value == math.e:
        return "e"
    return repr(float(value))


def to_text(node: Node) -> str:
    """Render in the input grammar; ``parse(to_text(n))`` reproduces ``n``."""
    def wrap(child: Node, level: int, strict: bool = False) -> str:
        text = to_text(child)
        p = _prec(child)
        if p < level or (strict and p == level):
            return f"({text})"
        return text

    match node:
        case Const(value=v):
            return _fmt_const(v)
        case Var(index=i):
            return f"x{i + 1}"
        case Neg(arg=a):
            return "-" + wrap(a, 3)
        case Add(left=a, right=b):
            return f"{wrap(a, 1)} + {wrap(b, 1, True)}"
        case Sub(left=a, right=b):
            return f"{wrap(a, 1)} - {wrap(b, 1, True)}"
        case Mul(left=a, right=b):
            return f"{wrap(a, 2)}*{wrap(b, 2, True)}"
        case Div(left=a, right=b):
            return f"{wrap(a, 2)}/{wrap(b, 2, True)}"
        case Pow(base=a, exponent=k):
            return f"{wrap(a, 5)}^{k}"
        case Func(name=name, arg=a):
            return f"{name}({to_text(a)})"
    raise TypeError(f"not an expression node: {node!r}")


def to_python(node: Node) -> str:
    match node:
        case Const(value=v):
            return repr(float(v))
        case Var(index=i):
            return f"x{i + 1}"
        case Neg(arg=a):
            return f"(-{to_python(a)})"
        case Add(left=a, right=b):
            return f"({to_python(a)} + {to_python(b)})"
        case Sub(left=a, right=b):
            return f"({to_python(a)} - {to_python(b)})"
        case Mul(left=a, right=b):
            return f"({to_python(a)} * {to_python(b)})"
        case Div(left=a, right=b):
            return f"({to_python(a)} / {to_python(b)})"
        case Pow(base=a, exponent=k):
            if k == 2:
                s = to_python(a)
                return f"({s} * {s})" if isinstance(a, (Var, Const)) else f"({s} ** 2)"
            return f"({to_python(a)} ** {k}.0)" if k < 0 else f"({to_python(a)} ** {k})"
        case Func(name=name, arg=a):
            return f"_np.{name}({to_python(a)})"
    raise TypeError(f"not an expression node: {node!r}")


def compile_nodes(nodes: Sequence[Node], dim: int) -> Callable[[np.ndarray], np.ndarray]:
    """Compile ``nodes`` into ``f(X) -> out`` with ``X`` of shape ``(..., dim)``
    and ``out`` of shape ``(..., len(nodes))``.

    Raises :class:`EvaluationError` if any output is not finite.
    """
    m = len(nodes)
    lines = ["def _compiled(X):"]
    lines.append("    X = _np.asarray(X, dtype=_np.float64)")
    for i in range(dim):
        lines.append(f"    x{i + 1} = X[..., {i}]")
    lines.append(f"    out = _np.empty(X.shape[:-1] + ({m},))")
    lines.append("    with _np.errstate(all='ignore'):")
    for k, node in enumerate(nodes):
        lines.append(f"        out[..., {k}] = {to_python(node)}")
    lines.append("    if not _np.isfinite(out).all():")
    lines.append("        _raise(X, out)")
    lines.append("    return out")
    source = "\n".join(lines)
    namespace = {"_np": np, "_raise": _raise_nonfinite}
    exec(compile(source, "<gendev-expr>", "exec"), namespace)
    fn = namespace["_compiled"]
    fn.source = source
    return fn


def _raise_nonfinite(X: np.ndarray, out: np.ndarray) -> None:
    bad = ~np.isfinite(out)
    where = np.argwhere(bad)[0]
    point = X[tuple(where[:-1])] if X.ndim > 1 else X
    raise EvaluationError(
        f"non-finite value in component {int(where[-1])} at point {point.tolist()}")
