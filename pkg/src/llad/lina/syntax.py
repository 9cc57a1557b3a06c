"""Concrete syntax for Linear A / Linear B.

::

    expr   ::= 'let' binder '=' expr 'in' expr | simple
    binder ::= '(' x ';' y' ')' | x | y' | 'tupP' '(' [x ',' x] ')' | 'tupT' '(' [y' ',' y'] ')'
    simple ::= y' '+.' y' | x '*.' y' | atom
    atom   ::= '(' x ';' y' ')' | '(' expr ';' expr ')' | '(' expr ')' | x | y' | float
             | 'tupP' '(' [expr ',' expr] ')' | 'tupT' '(' [expr ',' expr] ')'
             | 'dup' '(' y' ')' | 'drop' '(' expr ')' | 'zero' ':' type | f '(' x, ... ')'
    type   ::= unary ['*' type]
    unary  ::= 'R' | '1' | '(' type ')'

Tangent identifiers end with a prime. ``##`` starts a comment. A tuple or
pair written with bare variables is the core form; wrap an operand in
parentheses to get the expression form (``tupP((a), (b))``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import ParseError
from ..terms import REGISTRY
from .ast import (
    Drop, Dup, Expr, JTensor, JType, Let, LetPT, LetT, LetTupP, LetTupP0, LetTupT,
    LetTupT0, Lit, ONE, PT, PVar, PairE, Prim, R, Scale, TAdd, TVar, TupP, TupP0, TupPE, TupT,
    TupT0, TupTE, Zero, is_tangent_name, show_jtype,
)

KEYWORDS = {"let", "in", "tupP", "tupT", "dup", "drop", "zero", "R"} | set(REGISTRY)

_TOKEN = re.compile(r"""
    (?P<ws>\s+|\#\#[^\n]*)
  | (?P<num>-?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][-+]?\d+)?|-?inf\b|nan\b)
  | (?P<op>\+\.|\*\.|[();,:=*])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_#]*'?)
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if not m:
            raise ParseError(f"unexpected character {src[pos]!r}", line, pos - line_start + 1)
        if m.lastgroup != "ws":
            out.append(Token(m.lastgroup, m.group(), line, pos - line_start + 1))
        for i, ch in enumerate(m.group()):
            if ch == "\n":
                line += 1
                line_start = pos + i + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


class _Parser:
    def __init__(self, src: str):
        self.toks = tokenize(src)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str) -> ParseError:
        t = self.tok
        return ParseError(f"{msg}, found {t.text or 'end of input'!r}", t.line, t.col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "ident"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            raise self.error(f"expected {text!r}")

    def is_name(self, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind == "ident" and t.text not in KEYWORDS

    def name(self, tangent: bool | None = None) -> str:
        if not self.is_name():
            raise self.error("expected a variable")
        text = self.tok.text
        if tangent is True and not is_tangent_name(text):
            raise self.error("expected a tangent variable")
        if tangent is False and is_tangent_name(text):
            raise self.error("expected a primal variable")
        self.i += 1
        return text

    # types
    def type_(self) -> JType:
        left = self.unary()
        if self.accept("*"):
            return JTensor(left, self.type_())
        return left

    def unary(self) -> JType:
        t = self.tok
        if self.accept("R"):
            return R
        if t.kind == "num" and t.text == "1":
            self.i += 1
            return ONE
        if self.accept("("):
            inner = self.type_()
            self.expect(")")
            return inner
        raise self.error("expected a type")

    # expressions
    def expr(self) -> Expr:
        if self.accept("let"):
            return self.let()
        if self.is_name() and self.peek(1).text in ("+.", "*."):
            a = self.name()
            op = self.tok.text
            self.i += 1
            b = self.name(tangent=True)
            if op == "+.":
                if not is_tangent_name(a):
                    raise self.error("'+.' expects tangent operands")
                return TAdd(a, b)
            if is_tangent_name(a):
                raise self.error("'*.' expects a primal scalar on the left")
            return Scale(a, b)
        return self.atom()

    def let(self) -> Expr:
        if self.tok.text == "(":
            self.i += 1
            x = self.name(tangent=False)
            self.expect(";")
            dy = self.name(tangent=True)
            self.expect(")")
            self.expect("=")
            e1 = self.expr()
            self.expect("in")
            return LetPT(x, dy, e1, self.expr())
        if self.tok.text in ("tupP", "tupT"):
            tangent = self.tok.text == "tupT"
            self.i += 1
            self.expect("(")
            xs: list[str] = []
            if not self.accept(")"):
                xs.append(self.name(tangent))
                self.expect(",")
                xs.append(self.name(tangent))
                self.expect(")")
            self.expect("=")
            z = self.name(tangent)
            self.expect("in")
            body = self.expr()
            if tangent:
                return LetTupT(xs[0], xs[1], z, body) if xs else LetTupT0(z, body)
            return LetTupP(xs[0], xs[1], z, body) if xs else LetTupP0(z, body)
        x = self.name()
        self.expect("=")
        e1 = self.expr()
        self.expect("in")
        e2 = self.expr()
        return LetT(x, e1, e2) if is_tangent_name(x) else Let(x, e1, e2)

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Lit(float(t.text))
        if t.text == "(":
            if (self.is_name(1) and self.peek(2).text == ";" and self.is_name(3)
                    and self.peek(4).text == ")" and not is_tangent_name(self.peek(1).text)
                    and is_tangent_name(self.peek(3).text)):
                x, dy = self.peek(1).text, self.peek(3).text
                self.i += 5
                return PT(x, dy)
            self.i += 1
            first = self.expr()
            if self.accept(";"):
                second = self.expr()
                self.expect(")")
                return PairE(first, second)
            self.expect(")")
            return first
        if t.text in ("tupP", "tupT") and t.kind == "ident":
            tangent = t.text == "tupT"
            self.i += 1
            self.expect("(")
            if self.accept(")"):
                return TupT0() if tangent else TupP0()
            if self.is_name() and self.peek(1).text == "," and self.is_name(2) \
                    and self.peek(3).text == ")":
                a = self.name(tangent)
                self.expect(",")
                b = self.name(tangent)
                self.expect(")")
                return TupT(a, b) if tangent else TupP(a, b)
            a = self.expr()
            self.expect(",")
            b = self.expr()
            self.expect(")")
            return TupTE(a, b) if tangent else TupPE(a, b)
        if self.accept("dup"):
            self.expect("(")
            dx = self.name(tangent=True)
            self.expect(")")
            return Dup(dx)
        if self.accept("drop"):
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return Drop(e)
        if self.accept("zero"):
            self.expect(":")
            return Zero(self.type_())
        if t.kind == "ident" and t.text in REGISTRY:
            f = t.text
            self.i += 1
            self.expect("(")
            args = [self.name(tangent=False)]
            while self.accept(","):
                args.append(self.name(tangent=False))
            self.expect(")")
            return Prim(f, tuple(args))
        x = self.name()
        return TVar(x) if is_tangent_name(x) else PVar(x)

    def done(self) -> None:
        if self.tok.kind != "eof":
            raise self.error("trailing input")


def parse_expr(src: str) -> Expr:
    p = _Parser(src)
    e = p.expr()
    p.done()
    return e


def parse_jtype(src: str) -> JType:
    p = _Parser(src)
    t = p.type_()
    p.done()
    return t


# ------------------------------------------------------------------ printer


def _operands(a: Expr, b: Expr) -> tuple[str, str]:
    # two bare variables would read back as the core form
    bare = (PVar, TVar)
    sa = show_expr(a)
    if isinstance(a, bare) and isinstance(b, bare):
        sa = f"({sa})"
    return sa, show_expr(b)


def show_expr(e: Expr) -> str:
    match e:
        case PT(x, dy):
            return f"({x}; {dy})"
        case LetPT(x, dy, a, b):
            return f"let ({x}; {dy}) = {show_expr(a)} in {show_expr(b)}"
        case TupP0():
            return "tupP()"
        case TupP(a, b):
            return f"tupP({a}, {b})"
        case LetTupP0(z, b):
            return f"let tupP() = {z} in {show_expr(b)}"
        case LetTupP(x1, x2, z, b):
            return f"let tupP({x1}, {x2}) = {z} in {show_expr(b)}"
        case TupT0():
            return "tupT()"
        case TupT(a, b):
            return f"tupT({a}, {b})"
        case LetTupT0(z, b):
            return f"let tupT() = {z} in {show_expr(b)}"
        case LetTupT(x1, x2, z, b):
            return f"let tupT({x1}, {x2}) = {z} in {show_expr(b)}"
        case Lit(v):
            return repr(float(v))
        case Prim(f, args):
            return f"{f}({', '.join(args)})"
        case Zero(t):
            return f"zero : {show_jtype(t, nested=isinstance(t, JTensor))}"
        case TAdd(a, b):
            return f"{a} +. {b}"
        case Scale(x, dy):
            return f"{x} *. {dy}"
        case Dup(dx):
            return f"dup({dx})"
        case Drop(b):
            return f"drop({show_expr(b)})"
        case PVar(x):
            return x
        case TVar(dx):
            return dx
        case Let(x, a, b) | LetT(x, a, b):
            return f"let {x} = {show_expr(a)} in {show_expr(b)}"
        case PairE(a, b):
            return "({}; {})".format(*_operands(a, b))
        case TupPE(a, b):
            return "tupP({}, {})".format(*_operands(a, b))
        case TupTE(a, b):
            return "tupT({}, {})".format(*_operands(a, b))
    raise TypeError(e)

