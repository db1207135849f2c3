"""Arithmetic expression trees: parsing, evaluation, exact differentiation.

The surface grammar (used by system config files and CLI flags):

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' atom)?
    atom   := number | ident | func '(' expr ')' | '(' expr ')' | '-' atom

Identifiers are either declared constants or phase variables (``Q1..Qd``,
``P1..Pd``, and ``V1..Vd`` for Lagrangians); functions are ``sin``, ``cos``,
``exp``, ``log``, ``sqrt``.  Differentiation is symbolic on the tree with
constant folding, so structural zeros in Jacobians are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

from .errors import EvalDomainError, ParseError

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class Expr:
    """Base node; subclasses implement ``eval`` and ``diff``."""

    def eval(self, env: dict[str, float]) -> float:
        raise NotImplementedError

    def diff(self, name: str) -> "Expr":
        raise NotImplementedError

    def names(self) -> set[str]:
        """All identifiers appearing in the tree."""
        return set()

    def __str__(self) -> str:
        return _render(self, 0)


@dataclass(frozen=True)
class Num(Expr):
    value: float

    def eval(self, env):
        return self.value

    def diff(self, name):
        return Num(0.0)


@dataclass(frozen=True)
class Name(Expr):
    ident: str
    pos: tuple[int, int] = field(default=(1, 1), compare=False)

    def eval(self, env):
        try:
            return env[self.ident]
        except KeyError:
            raise EvalDomainError(f"identifier '{self.ident}' has no value") from None

    def diff(self, name):
        return Num(1.0 if self.ident == name else 0.0)

    def names(self):
        return {self.ident}


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr

    def eval(self, env):
        return -self.arg.eval(env)

    def diff(self, name):
        return neg(self.arg.diff(name))

    def names(self):
        return self.arg.names()


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def eval(self, env):
        a = self.left.eval(env)
        b = self.right.eval(env)
        if self.op == "+":
            y = a + b
        elif self.op == "-":
            y = a - b
        elif self.op == "*":
            y = a * b
        elif self.op == "/":
            if b == 0.0:
                raise EvalDomainError("division by zero")
            y = a / b
        else:
            return _safe_pow(a, b)
        if not math.isfinite(y):
            raise EvalDomainError(f"overflow in {a!r} {self.op} {b!r}")
        return y

    def diff(self, name):
        u, v = self.left, self.right
        du, dv = u.diff(name), v.diff(name)
        if self.op == "+":
            return add(du, dv)
        if self.op == "-":
            return sub(du, dv)
        if self.op == "*":
            return add(mul(du, v), mul(u, dv))
        if self.op == "/":
            return div(sub(mul(du, v), mul(u, dv)), mul(v, v))
        # u^v: power rule when the exponent has no dependence on `name`,
        # else the general exp/log form.
        if isinstance(dv, Num) and dv.value == 0.0:
            return mul(mul(v, pow_(u, sub(v, Num(1.0)))), du)
        return mul(pow_(u, v), add(mul(dv, Call("log", u)), mul(v, div(du, u))))

    def names(self):
        return self.left.names() | self.right.names()


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr
    pos: tuple[int, int] = field(default=(1, 1), compare=False)

    def eval(self, env):
        x = self.arg.eval(env)
        if self.func == "sin":
            return math.sin(x)
        if self.func == "cos":
            return math.cos(x)
        if self.func == "exp":
            y = math.exp(x) if x < 709.0 else math.inf
            if not math.isfinite(y):
                raise EvalDomainError(f"exp overflow at argument {x!r}")
            return y
        if self.func == "log":
            if x <= 0.0:
                raise EvalDomainError(f"log of non-positive value {x!r}")
            return math.log(x)
        if x < 0.0:
            raise EvalDomainError(f"sqrt of negative value {x!r}")
        return math.sqrt(x)

    def diff(self, name):
        u = self.arg
        du = u.diff(name)
        if self.func == "sin":
            outer = Call("cos", u)
        elif self.func == "cos":
            outer = neg(Call("sin", u))
        elif self.func == "exp":
            outer = Call("exp", u)
        elif self.func == "log":
            return div(du, u)
        else:  # sqrt
            return div(du, mul(Num(2.0), Call("sqrt", u)))
        return mul(outer, du)

    def names(self):
        return self.arg.names()


def _safe_pow(a: float, b: float) -> float:
    if a == 0.0 and b < 0.0:
        raise EvalDomainError("zero raised to a negative power")
    if a < 0.0 and b != round(b):
        raise EvalDomainError(f"fractional power of negative base {a!r}")
    try:
        y = a ** b
    except OverflowError:
        raise EvalDomainError(f"overflow in {a!r} ^ {b!r}") from None
    if not math.isfinite(y):
        raise EvalDomainError(f"overflow in {a!r} ^ {b!r}")
    return y


# Smart constructors: fold numeric literals so derivative trees stay small
# and structural zeros stay exact.

def _num(x: Expr) -> float | None:
    return x.value if isinstance(x, Num) else None


def add(a: Expr, b: Expr) -> Expr:
    av, bv = _num(a), _num(b)
    if av == 0.0:
        return b
    if bv == 0.0:
        return a
    if av is not None and bv is not None:
        return Num(av + bv)
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    av, bv = _num(a), _num(b)
    if bv == 0.0:
        return a
    if av == 0.0:
        return neg(b)
    if av is not None and bv is not None:
        return Num(av - bv)
    return Binary("-", a, b)


def mul(a: Expr, b: Expr) -> Expr:
    av, bv = _num(a), _num(b)
    if av == 0.0 or bv == 0.0:
        return Num(0.0)
    if av == 1.0:
        return b
    if bv == 1.0:
        return a
    if av is not None and bv is not None:
        return Num(av * bv)
    return Binary("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    av, bv = _num(a), _num(b)
    if av == 0.0:
        return Num(0.0)
    if bv == 1.0:
        return a
    if av is not None and bv is not None and bv != 0.0:
        return Num(av / bv)
    return Binary("/", a, b)


def pow_(a: Expr, b: Expr) -> Expr:
    bv = _num(b)
    if bv == 1.0:
        return a
    if bv == 0.0:
        return Num(1.0)
    av = _num(a)
    if av is not None and bv is not None:
        try:
            return Num(_safe_pow(av, bv))
        except EvalDomainError:
            pass
    return Binary("^", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _render(e: Expr, parent_prec: int) -> str:
    if isinstance(e, Num):
        v = e.value
        s = repr(int(v)) if v == int(v) and abs(v) < 1e16 else repr(v)
        return f"({s})" if v < 0 and parent_prec > 0 else s
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, Neg):
        inner = _render(e.arg, 4)
        return f"-{inner}" if parent_prec == 0 else f"(-{inner})"
    if isinstance(e, Call):
        return f"{e.func}({_render(e.arg, 0)})"
    prec = _PRECEDENCE[e.op]
    # '^' takes single atoms on both sides, so both operands parenthesize
    left = _render(e.left, prec if prec < 3 else prec + 1)
    right = _render(e.right, prec + 1)
    s = f"{left} {e.op} {right}" if prec < 3 else f"{left}{e.op}{right}"
    return f"({s})" if prec < parent_prec else s


class Token(NamedTuple):
    kind: str  # 'num' | 'ident' | 'op' | 'end'
    text: str
    line: int
    col: int


def _tokenize(source: str) -> Iterator[Token]:
    line, col = 1, 1
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c in "+-*/^()":
            yield Token("op", c, line, col)
            i += 1
            col += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (source[j].isdigit() or (source[j] == "." and not seen_dot)):
                seen_dot = seen_dot or source[j] == "."
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            yield Token("num", text, line, col)
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            yield Token("ident", source[i:j], line, col)
            col += j - i
            i = j
            continue
        raise ParseError(f"unexpected character {c!r}", line, col)
    yield Token("end", "", line, col)


class _Parser:
    def __init__(self, source: str):
        self.tokens = list(_tokenize(source))
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind != "op" or tok.text != text:
            raise ParseError(f"expected '{text}', found {tok.text!r}" if tok.text else f"expected '{text}'",
                             tok.line, tok.col)
        return self.advance()

    def parse(self) -> Expr:
        e = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.advance().text
            rhs = self.term()
            e = Binary(op, e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.advance().text
            rhs = self.factor()
            e = Binary(op, e, rhs)
        return e

    def factor(self) -> Expr:
        e = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            e = Binary("^", e, self.atom())
        return e

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            self.advance()
            nxt = self.peek()
            if nxt.kind == "op" and nxt.text == "(":
                if tok.text not in FUNCTIONS:
                    raise ParseError(f"unknown function '{tok.text}'", tok.line, tok.col)
                self.advance()
                inner = self.expr()
                self.expect_op(")")
                return Call(tok.text, inner, pos=(tok.line, tok.col))
            return Name(tok.text, pos=(tok.line, tok.col))
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            inner = self.expr()
            self.expect_op(")")
            return inner
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return neg(self.atom())
        raise ParseError(f"expected a value, found {tok.text!r}" if tok.text else "unexpected end of input",
                         tok.line, tok.col)


def parse_expression(source: str) -> Expr:
    """Parse one expression, raising :class:`ParseError` with position info."""
    return _Parser(source).parse()


def check_names(e: Expr, allowed: set[str]) -> None:
    """Validate that every identifier in ``e`` is in ``allowed``.

    Reports the first offender with its source position.
    """
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Name) and node.ident not in allowed:
            raise ParseError(f"unknown identifier '{node.ident}'", *node.pos)
        if isinstance(node, Neg):
            stack.append(node.arg)
        elif isinstance(node, Binary):
            stack.extend((node.right, node.left))
        elif isinstance(node, Call):
            stack.append(node.arg)
